#pragma once
// Deterministic text extraction the rewards and evaluator depend on:
// tokenization, entity extraction, step splitting, arithmetic-operation
// sequences, and answer extraction.

#include <cstdint>
#include <filesystem>
#include <memory>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "daslam/core.hpp"

namespace daslam::text {

// Splits on whitespace and punctuation boundaries. Numeric literals
// (integers, decimals, integer fractions like "3/4") stay single tokens;
// alphabetic runs stay single tokens; every other code point is its own
// token.
std::vector<std::string> tokenize(std::string_view text);

// Splits at line breaks, trims surrounding whitespace, drops empty lines.
std::vector<std::string> split_steps(std::string_view text);

/// Distinct lowercased nouns and canonicalized numeric literals of a text.
struct EntitySet {
  std::set<std::string> nouns;
  std::set<std::string> numbers;
  size_t size() const { return nouns.size() + numbers.size(); }
  bool operator==(const EntitySet&) const = default;
};

/// Pluggable noun classifier. Tokens are passed in lowercased.
class NounDetector {
 public:
  virtual ~NounDetector() = default;
  virtual bool is_noun(const std::string& lowercased_token) const = 0;
};

// Heuristic detector: alphabetic token, length >= 2, not a stopword.
// Single letters ("x") are never nouns under this detector.
class StopwordComplementDetector : public NounDetector {
 public:
  StopwordComplementDetector();  // built-in stopword list
  explicit StopwordComplementDetector(std::set<std::string> stopwords);
  bool is_noun(const std::string& token) const override;

 private:
  std::set<std::string> stopwords_;
};

// Lexicon detector: token is a noun iff it appears in the lexicon.
class LexiconDetector : public NounDetector {
 public:
  explicit LexiconDetector(std::set<std::string> lexicon);
  bool is_noun(const std::string& token) const override;

 private:
  std::set<std::string> lexicon_;
};

// One token per line, UTF-8, '#' starts a comment. Used for both stopword
// lists and noun lexicons.
std::set<std::string> load_token_list(const std::filesystem::path& path);

// Nouns are lowercased and not stemmed ("worker" and "workers" are distinct
// entities); numbers are canonicalized so "0.50" and "1/2" collapse.
EntitySet extract_entities(std::string_view text, const NounDetector& detector);

// Auxiliary/copula verbs that delimit the interrogative head of a question
// ("How many good workers | are needed ...").
bool is_auxiliary_verb(const std::string& lowercased_token);

// First numeric literal of a text region together with its position, for
// answer-entity extraction. Signed literals are recognized after separators
// that cannot end an operand ("= -5").
struct NumericSpan {
  size_t begin = 0;
  size_t end = 0;
  std::string literal;
};
std::vector<NumericSpan> numeric_literals(std::string_view region);

enum class Op : uint8_t { Add, Sub, Mul, Div, Pow, Root };

std::string_view op_name(Op op);
Op op_from_name(std::string_view name);

using OpSequence = std::vector<Op>;

// Scans each step left to right, one symbol per operator occurrence.
// '-' counts only in infix position (between two operand tokens), so unary
// minus and list dashes are excluded; '=' is not an operation; fraction
// literals like "3/4" are numbers, not divisions.
OpSequence extract_ops(const std::vector<std::string>& steps);

// Answer extraction, in priority order: a \boxed{...} marker, then the last
// line starting with "Answer"/"Final Answer" (text after the colon), then
// for choice kinds the last parenthesized or standalone label, then for
// numeric the last numeric literal of the final step. Unparsed when all fail.
AnswerValue extract_answer(std::string_view raw, AnswerKind kind,
                           const std::vector<ChoiceOption>& choices);

// Builds a SolverResponse from a raw completion: steps via split_steps,
// answer via extract_answer.
SolverResponse parse_solver_response(std::string raw, AnswerKind kind,
                                     const std::vector<ChoiceOption>& choices);

}  // namespace daslam::text
