#pragma once
// The four-stage inference pipeline over pluggable text-completion clients:
// initial chain-of-thought, decomposition, per-subquestion answering, and
// the final pass over the accumulated context.

#include <atomic>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "daslam/core.hpp"

namespace daslam::pipeline {

struct GenerationParams {
  double temperature = 0.95;
  double top_p = 0.18;
  int max_tokens = 2048;
  std::vector<std::string> stop;

  // top_p must lie in [0, 1] and max_tokens must be positive.
  void validate() const;
};

enum class Stage : uint8_t { InitialCot, Decompose, Subanswer, Final };

std::string_view stage_name(Stage s);

struct PipelineError : std::runtime_error {
  PipelineError(Stage stage_, const std::string& msg,
                EpisodeTranscript partial_ = {})
      : std::runtime_error(std::string(stage_name(stage_)) + ": " + msg),
        stage(stage_),
        partial(std::move(partial_)) {}
  Stage stage;
  EpisodeTranscript partial;  // whatever completed before the failure
};

/// One text-completion backend. Implementations must be safe for
/// concurrent calls.
class CompletionClient {
 public:
  virtual ~CompletionClient() = default;
  virtual std::string complete(const std::string& prompt,
                               const GenerationParams& params) = 0;
  size_t calls_made() const { return calls_; }

 protected:
  void count_call() { ++calls_; }

 private:
  std::atomic<size_t> calls_{0};
};

// Deterministic scripted client. Ordered mode consumes canned responses in
// sequence; keyed mode resolves each prompt by exact content. Exhausted or
// unknown prompts raise PipelineError-compatible runtime errors.
class ReplayClient : public CompletionClient {
 public:
  explicit ReplayClient(std::vector<std::string> script);
  explicit ReplayClient(std::map<std::string, std::string> keyed_by_prompt);

  std::string complete(const std::string& prompt,
                       const GenerationParams& params) override;

 private:
  std::mutex mutex_;
  std::deque<std::string> script_;
  std::map<std::string, std::string> keyed_;
  bool keyed_mode_;
};

struct HttpClientConfig {
  std::string endpoint;  // "http://host:port"
  std::string model_name;
  std::string path = "/v1/completions";
  std::string auth_env_var = "SOLVER_API_KEY";
  double timeout_s = 60.0;
  int max_retries = 3;
  int retry_backoff_ms = 100;  // doubled per attempt
};

// POST {"model","prompt","temperature","top_p","max_tokens","stop"?} and
// reads {"choices":[{"text": ...}]}. Bearer token comes from the configured
// environment variable when set. Retries transport failures and 429 only;
// any other well-formed response is final.
class HttpCompletionClient : public CompletionClient {
 public:
  explicit HttpCompletionClient(HttpClientConfig config);
  std::string complete(const std::string& prompt,
                       const GenerationParams& params) override;

 private:
  HttpClientConfig config_;
};

/// Named prompt templates for the four stages. Placeholders: {question},
/// {choices}, {initial_steps}, {initial_answer}, {context}, {subquestion}.
struct TemplateSet {
  std::string cot;
  std::string decompose_feedback;
  std::string decompose_nf;
  std::string subanswer;
  std::string final_stage;

  static TemplateSet builtin();
  // Sections named [cot], [decompose_feedback], [decompose_nf], [subanswer],
  // [final]. Throws std::runtime_error naming the path on IO failure and on
  // validation failure.
  static TemplateSet load(const std::filesystem::path& path);
  // Checks every stage template contains the placeholders it needs.
  void validate() const;
};

struct PipelineConfig {
  PipelineMode mode = PipelineMode::Daslam;
  int max_subquestions = 8;
  TemplateSet templates = TemplateSet::builtin();
  GenerationParams generation;
  bool early_exit_on_gold_match = false;
};

std::string render_choices(const Question& q);
std::string render_cot_prompt(const TemplateSet& t, const Question& q);
// Rendered block describing the initial solver response; this exact string
// is what separates the feedback decomposer prompt from the no-feedback one.
std::string initial_response_block(const SolverResponse& initial);
std::string render_decompose_prompt(const TemplateSet& t, const Question& q,
                                    const SolverResponse* initial);
std::string render_context_block(
    const std::vector<std::string>& subquestions,
    const std::vector<SolverResponse>& answers, size_t count);
std::string render_subanswer_prompt(const TemplateSet& t, const Question& q,
                                    const SubproblemPlan& plan,
                                    const std::vector<SolverResponse>& answers,
                                    size_t index);
std::string render_final_prompt(const TemplateSet& t, const Question& q,
                                const SubproblemPlan& plan,
                                const std::vector<SolverResponse>& answers);

// Numbered-list parsing for decomposer output: "1.", "1)" and "-" markers.
std::vector<std::string> parse_subquestion_list(std::string_view completion);

// Stage 1: one chain-of-thought call.
SolverResponse run_cot(CompletionClient& solver, const Question& q,
                       const PipelineConfig& cfg);

// Stage 2: one decomposer call; initial must be present exactly when the
// mode uses solver feedback. Truncates to max_subquestions; zero parseable
// subquestions is an error.
SubproblemPlan decompose(CompletionClient& decomposer, const Question& q,
                         const SolverResponse* initial,
                         const PipelineConfig& cfg);

// Stage 3: one solver call per subquestion; each prompt carries the
// original question and all earlier subquestion/answer pairs.
std::vector<SolverResponse> answer_subproblems(CompletionClient& solver,
                                               const Question& q,
                                               const SubproblemPlan& plan,
                                               const PipelineConfig& cfg);

// Stage 4: single call over all subquestion/answer traces plus the original
// question.
SolverResponse final_answer(CompletionClient& solver, const Question& q,
                            const SubproblemPlan& plan,
                            const std::vector<SolverResponse>& sub_answers,
                            const PipelineConfig& cfg);

// Composes the stages per the configured mode and records every prompt.
// gold_answer is only consulted when early_exit_on_gold_match is set.
EpisodeTranscript run_episode(const PipelineConfig& cfg,
                              CompletionClient& solver,
                              CompletionClient* decomposer, const Question& q,
                              const AnswerValue* gold_answer = nullptr);

}  // namespace daslam::pipeline
