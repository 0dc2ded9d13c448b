#include "daslam/orchestrator.hpp"

#include <cctype>
#include <chrono>
#include <fstream>
#include <sstream>
#include <thread>

#include "httplib.h"
#include "json.hpp"

#include "daslam/text_analysis.hpp"

namespace daslam::pipeline {
namespace {

std::string trim(std::string_view s) {
  size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  size_t e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::string replace_all(std::string text, std::string_view placeholder,
                        std::string_view value) {
  size_t pos = 0;
  while ((pos = text.find(placeholder, pos)) != std::string::npos) {
    text.replace(pos, placeholder.size(), value);
    pos += value.size();
  }
  return text;
}

std::string join_lines(const std::vector<std::string>& lines) {
  std::string out;
  for (size_t i = 0; i < lines.size(); ++i) {
    if (i > 0) out += "\n";
    out += lines[i];
  }
  return out;
}

void require_placeholders(const std::string& tmpl, const std::string& section,
                          std::initializer_list<const char*> names) {
  for (const char* name : names) {
    if (tmpl.find(name) == std::string::npos)
      throw std::runtime_error("template section [" + section +
                               "] missing placeholder " + name);
  }
}

}  // namespace

void GenerationParams::validate() const {
  if (top_p < 0.0 || top_p > 1.0)
    throw std::invalid_argument("top_p must lie in [0, 1]");
  if (max_tokens <= 0)
    throw std::invalid_argument("max_tokens must be positive");
}

std::string_view stage_name(Stage s) {
  switch (s) {
    case Stage::InitialCot:
      return "initial_cot";
    case Stage::Decompose:
      return "decompose";
    case Stage::Subanswer:
      return "subanswer";
    case Stage::Final:
      return "final";
  }
  return "final";
}

ReplayClient::ReplayClient(std::vector<std::string> script)
    : script_(script.begin(), script.end()), keyed_mode_(false) {}

ReplayClient::ReplayClient(std::map<std::string, std::string> keyed_by_prompt)
    : keyed_(std::move(keyed_by_prompt)), keyed_mode_(true) {}

std::string ReplayClient::complete(const std::string& prompt,
                                   const GenerationParams&) {
  std::lock_guard<std::mutex> lock(mutex_);
  count_call();
  if (keyed_mode_) {
    auto it = keyed_.find(prompt);
    if (it == keyed_.end())
      throw std::runtime_error("replay script has no response for prompt");
    return it->second;
  }
  if (script_.empty()) throw std::runtime_error("replay script exhausted");
  std::string response = std::move(script_.front());
  script_.pop_front();
  return response;
}

HttpCompletionClient::HttpCompletionClient(HttpClientConfig config)
    : config_(std::move(config)) {}

std::string HttpCompletionClient::complete(const std::string& prompt,
                                           const GenerationParams& params) {
  count_call();
  nlohmann::json body = {{"model", config_.model_name},
                         {"prompt", prompt},
                         {"temperature", params.temperature},
                         {"top_p", params.top_p},
                         {"max_tokens", params.max_tokens}};
  if (!params.stop.empty()) body["stop"] = params.stop;

  httplib::Headers headers;
  if (!config_.auth_env_var.empty()) {
    if (const char* key = std::getenv(config_.auth_env_var.c_str()))
      headers.emplace("Authorization", std::string("Bearer ") + key);
  }

  std::string transport_error;
  for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(std::chrono::milliseconds(
          config_.retry_backoff_ms << (attempt - 1)));
    }
    httplib::Client client(config_.endpoint);
    client.set_connection_timeout(static_cast<int>(config_.timeout_s), 0);
    client.set_read_timeout(static_cast<int>(config_.timeout_s), 0);
    auto res = client.Post(config_.path, headers, body.dump(),
                           "application/json");
    if (!res) {
      transport_error = httplib::to_string(res.error());
      continue;  // transport failure: retry
    }
    if (res->status == 429) {
      transport_error = "throttled (429)";
      continue;
    }
    if (res->status != 200)
      throw std::runtime_error("completion service status " +
                               std::to_string(res->status));
    nlohmann::json parsed = nlohmann::json::parse(res->body, nullptr, false);
    if (parsed.is_discarded() || !parsed.contains("choices") ||
        !parsed["choices"].is_array() || parsed["choices"].empty() ||
        !parsed["choices"][0].contains("text") ||
        !parsed["choices"][0]["text"].is_string())
      throw std::runtime_error("malformed completion response");
    return parsed["choices"][0]["text"].get<std::string>();
  }
  throw std::runtime_error("transport failure after " +
                           std::to_string(config_.max_retries) +
                           " retries: " + transport_error);
}

TemplateSet TemplateSet::builtin() {
  TemplateSet t;
  t.cot =
      "Solve the problem step by step. Put each reasoning step on its own "
      "line and end with a line starting with \"Answer:\".\n"
      "\n"
      "Problem: {question}\n"
      "{choices}";
  t.decompose_feedback =
      "Write numbered subquestions, one per line like \"1. ...\", that break "
      "the problem below into simpler steps.\n"
      "\n"
      "Problem: {question}\n"
      "{choices}\n"
      "Solver reasoning:\n"
      "{initial_steps}\n"
      "Solver answer: {initial_answer}\n"
      "\n"
      "Subquestions:";
  t.decompose_nf =
      "Write numbered subquestions, one per line like \"1. ...\", that break "
      "the problem below into simpler steps.\n"
      "\n"
      "Problem: {question}\n"
      "{choices}\n"
      "\n"
      "Subquestions:";
  t.subanswer =
      "Problem: {question}\n"
      "{choices}\n"
      "{context}"
      "Subquestion: {subquestion}\n"
      "Answer the subquestion step by step and end with a line starting with "
      "\"Answer:\".";
  t.final_stage =
      "Problem: {question}\n"
      "{choices}\n"
      "{context}"
      "Now solve the original problem using the work above. Put each "
      "reasoning step on its own line and end with a line starting with "
      "\"Answer:\".\n"
      "\n"
      "Problem: {question}\n"
      "{choices}";
  return t;
}

TemplateSet TemplateSet::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in)
    throw std::runtime_error("cannot open template file: " + path.string());

  std::map<std::string, std::vector<std::string>> sections;
  std::string current;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.size() >= 2 && line.front() == '[' && line.back() == ']') {
      current = line.substr(1, line.size() - 2);
      sections[current];  // create even if empty
      continue;
    }
    if (current.empty()) continue;  // preamble before first section
    sections[current].push_back(line);
  }

  auto section_text = [&](const std::string& name) {
    auto it = sections.find(name);
    if (it == sections.end())
      throw std::runtime_error("template file " + path.string() +
                               " missing section [" + name + "]");
    auto lines = it->second;
    while (!lines.empty() && trim(lines.front()).empty()) lines.erase(lines.begin());
    while (!lines.empty() && trim(lines.back()).empty()) lines.pop_back();
    return join_lines(lines);
  };

  TemplateSet t;
  t.cot = section_text("cot");
  t.decompose_feedback = section_text("decompose_feedback");
  t.decompose_nf = section_text("decompose_nf");
  t.subanswer = section_text("subanswer");
  t.final_stage = section_text("final");
  t.validate();
  return t;
}

void TemplateSet::validate() const {
  require_placeholders(cot, "cot", {"{question}"});
  require_placeholders(decompose_feedback, "decompose_feedback",
                       {"{question}", "{initial_steps}", "{initial_answer}"});
  require_placeholders(decompose_nf, "decompose_nf", {"{question}"});
  if (decompose_nf.find("{initial_steps}") != std::string::npos ||
      decompose_nf.find("{initial_answer}") != std::string::npos)
    throw std::runtime_error(
        "template section [decompose_nf] must not reference the initial "
        "response");
  require_placeholders(subanswer, "subanswer",
                       {"{question}", "{context}", "{subquestion}"});
  require_placeholders(final_stage, "final", {"{question}", "{context}"});
}

std::string render_choices(const Question& q) {
  if (q.choices.empty()) return {};
  std::string out = "Choices:";
  for (const auto& c : q.choices) out += "\n(" + c.label + ") " + c.text;
  return out;
}

std::string render_cot_prompt(const TemplateSet& t, const Question& q) {
  std::string out = replace_all(t.cot, "{question}", q.text);
  return replace_all(std::move(out), "{choices}", render_choices(q));
}

std::string initial_response_block(const SolverResponse& initial) {
  return "Solver reasoning:\n" + join_lines(initial.steps) +
         "\nSolver answer: " + initial.answer.display() + "\n";
}

std::string render_decompose_prompt(const TemplateSet& t, const Question& q,
                                    const SolverResponse* initial) {
  std::string tmpl = initial ? t.decompose_feedback : t.decompose_nf;
  std::string out = replace_all(std::move(tmpl), "{question}", q.text);
  out = replace_all(std::move(out), "{choices}", render_choices(q));
  if (initial) {
    out = replace_all(std::move(out), "{initial_steps}",
                      join_lines(initial->steps));
    out = replace_all(std::move(out), "{initial_answer}",
                      initial->answer.display());
  }
  return out;
}

std::string render_context_block(const std::vector<std::string>& subquestions,
                                 const std::vector<SolverResponse>& answers,
                                 size_t count) {
  std::string out;
  for (size_t i = 0; i < count && i < subquestions.size() && i < answers.size();
       ++i) {
    out += "Subquestion: " + subquestions[i] + "\n";
    out += answers[i].raw_text + "\n";
  }
  return out;
}

std::string render_subanswer_prompt(const TemplateSet& t, const Question& q,
                                    const SubproblemPlan& plan,
                                    const std::vector<SolverResponse>& answers,
                                    size_t index) {
  std::string out = replace_all(t.subanswer, "{question}", q.text);
  out = replace_all(std::move(out), "{choices}", render_choices(q));
  out = replace_all(std::move(out), "{context}",
                    render_context_block(plan.subquestions, answers, index));
  return replace_all(std::move(out), "{subquestion}",
                     plan.subquestions.at(index));
}

std::string render_final_prompt(const TemplateSet& t, const Question& q,
                                const SubproblemPlan& plan,
                                const std::vector<SolverResponse>& answers) {
  std::string out = replace_all(t.final_stage, "{question}", q.text);
  out = replace_all(std::move(out), "{choices}", render_choices(q));
  return replace_all(
      std::move(out), "{context}",
      render_context_block(plan.subquestions, answers, answers.size()));
}

std::vector<std::string> parse_subquestion_list(std::string_view completion) {
  std::vector<std::string> subquestions;
  for (const auto& line : text::split_steps(completion)) {
    std::string_view v = line;
    size_t digits = 0;
    while (digits < v.size() &&
           std::isdigit(static_cast<unsigned char>(v[digits])))
      ++digits;
    if (digits > 0 && digits < v.size() &&
        (v[digits] == '.' || v[digits] == ')')) {
      std::string body = trim(v.substr(digits + 1));
      if (!body.empty()) subquestions.push_back(std::move(body));
      continue;
    }
    if (!v.empty() && v.front() == '-') {
      std::string body = trim(v.substr(1));
      if (!body.empty()) subquestions.push_back(std::move(body));
    }
  }
  return subquestions;
}

SolverResponse run_cot(CompletionClient& solver, const Question& q,
                       const PipelineConfig& cfg) {
  const std::string prompt = render_cot_prompt(cfg.templates, q);
  std::string completion;
  try {
    completion = solver.complete(prompt, cfg.generation);
  } catch (const std::exception& e) {
    throw PipelineError(Stage::InitialCot, e.what());
  }
  return text::parse_solver_response(std::move(completion), q.answer_kind,
                                     q.choices);
}

SubproblemPlan decompose(CompletionClient& decomposer, const Question& q,
                         const SolverResponse* initial,
                         const PipelineConfig& cfg) {
  const std::string prompt =
      render_decompose_prompt(cfg.templates, q, initial);
  std::string completion;
  try {
    completion = decomposer.complete(prompt, cfg.generation);
  } catch (const std::exception& e) {
    throw PipelineError(Stage::Decompose, e.what());
  }
  SubproblemPlan plan;
  plan.subquestions = parse_subquestion_list(completion);
  if (plan.subquestions.empty())
    throw PipelineError(Stage::Decompose, "empty decomposition");
  if (plan.subquestions.size() > static_cast<size_t>(cfg.max_subquestions))
    plan.subquestions.resize(static_cast<size_t>(cfg.max_subquestions));
  plan.source = initial ? PlanSource::WithFeedback : PlanSource::NoFeedback;
  return plan;
}

std::vector<SolverResponse> answer_subproblems(CompletionClient& solver,
                                               const Question& q,
                                               const SubproblemPlan& plan,
                                               const PipelineConfig& cfg) {
  if (plan.subquestions.empty())
    throw PipelineError(Stage::Subanswer, "empty subquestion plan");
  std::vector<SolverResponse> answers;
  for (size_t i = 0; i < plan.subquestions.size(); ++i) {
    const std::string prompt =
        render_subanswer_prompt(cfg.templates, q, plan, answers, i);
    std::string completion;
    try {
      completion = solver.complete(prompt, cfg.generation);
    } catch (const std::exception& e) {
      throw PipelineError(Stage::Subanswer,
                          "subquestion " + std::to_string(i + 1) + ": " +
                              e.what());
    }
    answers.push_back(text::parse_solver_response(
        std::move(completion), q.answer_kind, q.choices));
  }
  return answers;
}

SolverResponse final_answer(CompletionClient& solver, const Question& q,
                            const SubproblemPlan& plan,
                            const std::vector<SolverResponse>& sub_answers,
                            const PipelineConfig& cfg) {
  if (sub_answers.size() != plan.subquestions.size())
    throw PipelineError(Stage::Final,
                        "sub-answer count does not match the plan");
  const std::string prompt =
      render_final_prompt(cfg.templates, q, plan, sub_answers);
  std::string completion;
  try {
    completion = solver.complete(prompt, cfg.generation);
  } catch (const std::exception& e) {
    throw PipelineError(Stage::Final, e.what());
  }
  return text::parse_solver_response(std::move(completion), q.answer_kind,
                                     q.choices);
}

EpisodeTranscript run_episode(const PipelineConfig& cfg,
                              CompletionClient& solver,
                              CompletionClient* decomposer, const Question& q,
                              const AnswerValue* gold_answer) {
  cfg.generation.validate();
  EpisodeTranscript t;
  t.question_ref = q.id;
  t.mode = cfg.mode;
  try {
    t.prompts.push_back(render_cot_prompt(cfg.templates, q));
    t.initial = run_cot(solver, q, cfg);

    if (cfg.mode == PipelineMode::CotOnly) {
      t.final = t.initial;
      return t;
    }
    if (cfg.early_exit_on_gold_match && gold_answer &&
        !t.initial.answer.is_unparsed() && t.initial.answer == *gold_answer) {
      t.final = t.initial;
      return t;
    }
    if (!decomposer)
      throw PipelineError(Stage::Decompose, "no decomposer client configured");

    const SolverResponse* feedback =
        cfg.mode == PipelineMode::Daslam ? &t.initial : nullptr;
    t.prompts.push_back(render_decompose_prompt(cfg.templates, q, feedback));
    t.plan = decompose(*decomposer, q, feedback, cfg);

    for (size_t i = 0; i < t.plan.subquestions.size(); ++i) {
      const std::string prompt =
          render_subanswer_prompt(cfg.templates, q, t.plan, t.sub_answers, i);
      t.prompts.push_back(prompt);
      std::string completion;
      try {
        completion = solver.complete(prompt, cfg.generation);
      } catch (const std::exception& e) {
        throw PipelineError(Stage::Subanswer,
                            "subquestion " + std::to_string(i + 1) + ": " +
                                e.what());
      }
      t.sub_answers.push_back(text::parse_solver_response(
          std::move(completion), q.answer_kind, q.choices));
    }

    t.prompts.push_back(
        render_final_prompt(cfg.templates, q, t.plan, t.sub_answers));
    t.final = final_answer(solver, q, t.plan, t.sub_answers, cfg);
    return t;
  } catch (PipelineError& e) {
    e.partial = t;
    throw;
  }
}

}  // namespace daslam::pipeline
