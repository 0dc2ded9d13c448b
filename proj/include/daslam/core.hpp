#pragma once
// Domain types shared by every module: questions, answers, solver responses,
// decomposition plans, gold records, and episode transcripts.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace daslam {

enum class AnswerKind : uint8_t { Numeric, SingleChoice, MultiChoice };

std::string_view answer_kind_name(AnswerKind k);
AnswerKind answer_kind_from_name(std::string_view name);

// Canonical numeric rendering: exact rational in lowest terms where the
// literal fits integer arithmetic, otherwise the decimal with trailing
// zeros stripped. "0.5", "1/2" and "2/4" all canonicalize to "1/2".
// Throws std::invalid_argument("not numeric: ...") on non-numeric input.
std::string normalize_numeric(std::string_view literal);

bool is_numeric_literal(std::string_view token);

/// Typed answer: a numeric value, one choice label, a set of labels, or the
/// raw text when nothing could be extracted.
class AnswerValue {
 public:
  enum class Kind : uint8_t { Numeric, Choice, ChoiceSet, Unparsed };

  AnswerValue() : kind_(Kind::Unparsed) {}

  static AnswerValue numeric(std::string literal);
  static AnswerValue choice(std::string label);
  static AnswerValue choice_set(std::vector<std::string> labels);
  static AnswerValue unparsed(std::string raw);

  Kind kind() const { return kind_; }
  bool is_unparsed() const { return kind_ == Kind::Unparsed; }

  const std::string& literal() const { return text_; }    // Numeric: as extracted
  const std::string& canonical() const { return canonical_; }
  const std::string& label() const { return text_; }      // Choice
  const std::vector<std::string>& labels() const { return labels_; }  // ChoiceSet
  const std::string& raw() const { return text_; }        // Unparsed

  std::string display() const;

  // Normalized equality: Numeric compares canonically ("0.5" == "1/2"),
  // ChoiceSet is order-insensitive by construction.
  bool operator==(const AnswerValue& other) const;

 private:
  Kind kind_;
  std::string text_;
  std::string canonical_;            // Numeric only
  std::vector<std::string> labels_;  // ChoiceSet only; sorted, deduplicated
};

struct ChoiceOption {
  std::string label;
  std::string text;
  bool operator==(const ChoiceOption&) const = default;
};

struct Question {
  std::string id;
  std::string text;
  std::string category;
  AnswerKind answer_kind = AnswerKind::Numeric;
  std::vector<ChoiceOption> choices;  // required for choice kinds
  bool operator==(const Question&) const = default;
};

/// One solver completion: the raw text, the reasoning steps (non-empty lines),
/// and the answer extracted from it.
struct SolverResponse {
  std::string raw_text;
  std::vector<std::string> steps;
  AnswerValue answer;
  bool operator==(const SolverResponse&) const = default;
};

enum class PlanSource : uint8_t { WithFeedback, NoFeedback, Gold };

std::string_view plan_source_name(PlanSource s);
PlanSource plan_source_from_name(std::string_view name);

struct SubproblemPlan {
  std::vector<std::string> subquestions;
  PlanSource source = PlanSource::Gold;
  bool operator==(const SubproblemPlan&) const = default;
};

struct GoldRecord {
  Question question;
  std::vector<std::string> gold_steps;
  AnswerValue gold_answer;
  std::optional<SubproblemPlan> gold_subquestions;
  bool operator==(const GoldRecord&) const = default;
};

enum class PipelineMode : uint8_t { CotOnly, DaslamNF, Daslam };

std::string_view pipeline_mode_name(PipelineMode m);
PipelineMode pipeline_mode_from_name(std::string_view name);

/// Full record of one pipeline episode, including every prompt sent
/// (solver and decomposer prompts, in send order).
struct EpisodeTranscript {
  std::string question_ref;
  SolverResponse initial;
  SubproblemPlan plan;
  std::vector<SolverResponse> sub_answers;
  SolverResponse final;
  PipelineMode mode = PipelineMode::Daslam;
  std::vector<std::string> prompts;
  bool operator==(const EpisodeTranscript&) const = default;
};

// Violations are data, not failures: empty list means the record is valid.
std::vector<std::string> validate_gold_record(const GoldRecord& record);

}  // namespace daslam
