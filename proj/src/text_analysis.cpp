#include "daslam/text_analysis.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace daslam::text {
namespace {

bool is_ascii_digit(char c) { return c >= '0' && c <= '9'; }
bool is_ascii_alpha(char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z');
}

// Length in bytes of the UTF-8 code point starting at s[i].
size_t codepoint_len(std::string_view s, size_t i) {
  unsigned char c = static_cast<unsigned char>(s[i]);
  size_t len = 1;
  if ((c & 0x80) == 0x00)
    len = 1;
  else if ((c & 0xE0) == 0xC0)
    len = 2;
  else if ((c & 0xF0) == 0xE0)
    len = 3;
  else if ((c & 0xF8) == 0xF0)
    len = 4;
  return std::min(len, s.size() - i);
}

std::string to_lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return out;
}

std::string trim(std::string_view s) {
  size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  size_t e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

bool is_word_token(const std::string& tok) {
  return !tok.empty() && std::all_of(tok.begin(), tok.end(), [](char c) {
    return is_ascii_alpha(c);
  });
}

// Operands for infix detection: numbers, identifiers, and close/open
// brackets on the respective side.
bool operand_on_left(const std::string& tok) {
  return is_numeric_literal(tok) || is_word_token(tok) || tok == ")" ||
         tok == "}" || tok == "]";
}
bool operand_on_right(const std::string& tok) {
  return is_numeric_literal(tok) || is_word_token(tok) || tok == "(" ||
         tok == "{" || tok == "[" || tok == "√";
}

const char* kAuxVerbs[] = {
    "is",   "are",  "was",   "were",  "am",    "be",   "been", "being",
    "do",   "does", "did",   "can",   "could", "will", "would", "shall",
    "should", "may", "might", "must",  "has",   "have", "had"};

// Compact English stopword list for the heuristic noun detector. Single
// letters are already excluded by the length rule.
const char* kStopwords[] = {
    "a",       "about",   "above",  "after",   "again",   "against", "all",
    "also",    "am",      "an",     "and",     "another", "any",     "are",
    "as",      "at",      "be",     "because", "been",    "before",  "being",
    "below",   "between", "both",   "but",     "by",      "can",     "cannot",
    "could",   "did",     "do",     "does",    "doing",   "down",    "during",
    "each",    "either",  "else",   "every",   "few",     "for",     "from",
    "further", "had",     "has",    "have",    "having",  "he",      "her",
    "here",    "hers",    "him",    "his",     "how",     "if",      "in",
    "into",    "is",      "it",     "its",     "itself",  "just",    "let",
    "may",     "me",      "might",  "more",    "most",    "much",    "must",
    "my",      "no",      "nor",    "not",     "of",      "off",     "on",
    "once",    "only",    "or",     "other",   "our",     "ours",    "out",
    "over",    "own",     "per",    "same",    "shall",   "she",     "should",
    "so",      "some",    "such",   "than",    "that",    "the",     "their",
    "theirs",  "them",    "then",   "there",   "these",   "they",    "this",
    "those",   "through", "to",     "too",     "under",   "until",   "up",
    "upon",    "us",      "very",   "was",     "we",      "were",    "what",
    "when",    "where",   "which",  "while",   "who",     "whom",    "why",
    "will",    "with",    "would",  "you",     "your",    "yours"};

}  // namespace

std::vector<std::string> tokenize(std::string_view s) {
  std::vector<std::string> tokens;
  size_t i = 0;
  const size_t n = s.size();
  while (i < n) {
    char c = s[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
      continue;
    }
    if (is_ascii_digit(c)) {
      size_t j = i;
      while (j < n && is_ascii_digit(s[j])) ++j;
      bool has_dot = false;
      if (j + 1 < n && s[j] == '.' && is_ascii_digit(s[j + 1])) {
        has_dot = true;
        ++j;
        while (j < n && is_ascii_digit(s[j])) ++j;
      }
      // Integer fractions ("3/4") stay one token; "0.5/2" does not.
      if (!has_dot && j + 1 < n && s[j] == '/' && is_ascii_digit(s[j + 1])) {
        size_t k = j + 1;
        while (k < n && is_ascii_digit(s[k])) ++k;
        j = k;
      }
      tokens.emplace_back(s.substr(i, j - i));
      i = j;
      continue;
    }
    if (is_ascii_alpha(c)) {
      size_t j = i;
      while (j < n && is_ascii_alpha(s[j])) ++j;
      tokens.emplace_back(s.substr(i, j - i));
      i = j;
      continue;
    }
    size_t len = codepoint_len(s, i);
    tokens.emplace_back(s.substr(i, len));
    i += len;
  }
  return tokens;
}

std::vector<std::string> split_steps(std::string_view s) {
  std::vector<std::string> steps;
  size_t start = 0;
  while (start <= s.size()) {
    size_t nl = s.find('\n', start);
    std::string_view line =
        nl == std::string_view::npos ? s.substr(start) : s.substr(start, nl - start);
    std::string trimmed = trim(line);
    if (!trimmed.empty()) steps.push_back(std::move(trimmed));
    if (nl == std::string_view::npos) break;
    start = nl + 1;
  }
  return steps;
}

StopwordComplementDetector::StopwordComplementDetector() {
  for (const char* w : kStopwords) stopwords_.insert(w);
}

StopwordComplementDetector::StopwordComplementDetector(
    std::set<std::string> stopwords)
    : stopwords_(std::move(stopwords)) {}

bool StopwordComplementDetector::is_noun(const std::string& token) const {
  if (token.size() < 2) return false;
  if (!is_word_token(token)) return false;
  return stopwords_.find(token) == stopwords_.end();
}

LexiconDetector::LexiconDetector(std::set<std::string> lexicon)
    : lexicon_(std::move(lexicon)) {}

bool LexiconDetector::is_noun(const std::string& token) const {
  return lexicon_.find(token) != lexicon_.end();
}

std::set<std::string> load_token_list(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open token list: " + path.string());
  std::set<std::string> tokens;
  std::string line;
  while (std::getline(in, line)) {
    size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::string tok = trim(line);
    if (!tok.empty()) tokens.insert(to_lower(tok));
  }
  return tokens;
}

EntitySet extract_entities(std::string_view s, const NounDetector& detector) {
  EntitySet out;
  for (const auto& tok : tokenize(s)) {
    if (is_numeric_literal(tok)) {
      out.numbers.insert(normalize_numeric(tok));
    } else if (is_word_token(tok)) {
      std::string lower = to_lower(tok);
      if (detector.is_noun(lower)) out.nouns.insert(std::move(lower));
    }
  }
  return out;
}

std::string_view op_name(Op op) {
  switch (op) {
    case Op::Add:
      return "+";
    case Op::Sub:
      return "-";
    case Op::Mul:
      return "*";
    case Op::Div:
      return "/";
    case Op::Pow:
      return "^";
    case Op::Root:
      return "sqrt";
  }
  return "+";
}

Op op_from_name(std::string_view name) {
  if (name == "+") return Op::Add;
  if (name == "-") return Op::Sub;
  if (name == "*") return Op::Mul;
  if (name == "/") return Op::Div;
  if (name == "^") return Op::Pow;
  if (name == "sqrt") return Op::Root;
  throw std::invalid_argument("unknown op: " + std::string(name));
}

OpSequence extract_ops(const std::vector<std::string>& steps) {
  OpSequence ops;
  for (const auto& step : steps) {
    const auto tokens = tokenize(step);
    for (size_t i = 0; i < tokens.size(); ++i) {
      const std::string& tok = tokens[i];
      if (tok == "+") {
        ops.push_back(Op::Add);
      } else if (tok == "*" || tok == "×" || tok == "⋅" ||
                 tok == "·") {
        ops.push_back(Op::Mul);
      } else if (tok == "/" || tok == "÷") {
        ops.push_back(Op::Div);
      } else if (tok == "^") {
        ops.push_back(Op::Pow);
      } else if (tok == "√") {
        ops.push_back(Op::Root);
      } else if (tok == "-" || tok == "−") {
        bool left = i > 0 && operand_on_left(tokens[i - 1]);
        bool right = i + 1 < tokens.size() && operand_on_right(tokens[i + 1]);
        if (left && right) ops.push_back(Op::Sub);
      }
    }
  }
  return ops;
}

namespace {

// Unary minus is accepted when the '-' follows a separator that cannot end
// an operand ("= -5", "(-1/12)", start of region).
bool minus_attaches(std::string_view s, size_t minus_pos) {
  size_t p = minus_pos;
  while (p > 0 && (s[p - 1] == ' ' || s[p - 1] == '\t')) --p;
  if (p == 0) return true;
  char before = s[p - 1];
  return before == '=' || before == '(' || before == '{' || before == '[' ||
         before == ':' || before == ',';
}

struct NumericMatch {
  size_t begin = 0;
  size_t end = 0;  // one past
  std::string literal;
};

std::vector<NumericMatch> find_numeric_literals(std::string_view s) {
  std::vector<NumericMatch> out;
  size_t i = 0;
  const size_t n = s.size();
  while (i < n) {
    if (!is_ascii_digit(s[i])) {
      ++i;
      continue;
    }
    size_t begin = i;
    bool negative = false;
    if (i > 0 && s[i - 1] == '-' && minus_attaches(s, i - 1)) {
      negative = true;
      begin = i - 1;
    }
    size_t j = i;
    while (j < n && is_ascii_digit(s[j])) ++j;
    bool has_dot = false;
    if (j + 1 < n && s[j] == '.' && is_ascii_digit(s[j + 1])) {
      has_dot = true;
      ++j;
      while (j < n && is_ascii_digit(s[j])) ++j;
    }
    if (!has_dot && j + 1 < n && s[j] == '/' &&
        (is_ascii_digit(s[j + 1]) ||
         (s[j + 1] == '-' && j + 2 < n && is_ascii_digit(s[j + 2])))) {
      size_t k = j + 1;
      if (s[k] == '-') ++k;
      while (k < n && is_ascii_digit(s[k])) ++k;
      j = k;
    }
    std::string literal(s.substr(begin, j - begin));
    if (negative && literal.front() != '-') literal = "-" + literal;
    out.push_back({begin, j, std::move(literal)});
    i = j;
  }
  return out;
}

// "\frac{a}{b}" with integer arms becomes "a/b"; other LaTeX decoration in
// answer regions is stripped to bare text.
std::string strip_latex(std::string region) {
  std::string out;
  out.reserve(region.size());
  size_t i = 0;
  while (i < region.size()) {
    if (region.compare(i, 6, "\\frac{") == 0) {
      size_t a_start = i + 6;
      size_t a_end = region.find('}', a_start);
      if (a_end != std::string::npos && a_end + 1 < region.size() &&
          region[a_end + 1] == '{') {
        size_t b_start = a_end + 2;
        size_t b_end = region.find('}', b_start);
        if (b_end != std::string::npos) {
          out += region.substr(a_start, a_end - a_start);
          out += "/";
          out += region.substr(b_start, b_end - b_start);
          i = b_end + 1;
          continue;
        }
      }
    }
    if (region[i] == '$' || region[i] == '\\') {
      ++i;
      continue;
    }
    out += region[i];
    ++i;
  }
  return out;
}

// Balanced-brace content of the last \boxed{...}; empty optional if none.
std::optional<std::string> last_boxed_content(std::string_view s) {
  const std::string marker = "\\boxed{";
  size_t pos = s.rfind(marker);
  if (pos == std::string_view::npos) return std::nullopt;
  size_t i = pos + marker.size();
  int depth = 1;
  std::string content;
  while (i < s.size() && depth > 0) {
    char c = s[i];
    if (c == '{') ++depth;
    if (c == '}') {
      --depth;
      if (depth == 0) break;
    }
    content += c;
    ++i;
  }
  if (depth != 0) return std::nullopt;
  return content;
}

std::optional<std::string> last_answer_line_region(std::string_view s) {
  const auto lines = split_steps(s);
  for (auto it = lines.rbegin(); it != lines.rend(); ++it) {
    std::string lower = to_lower(*it);
    size_t offset = 0;
    if (lower.rfind("final answer", 0) == 0)
      offset = 12;
    else if (lower.rfind("answer", 0) == 0)
      offset = 6;
    else
      continue;
    size_t colon = it->find(':', offset);
    if (colon == std::string::npos) continue;
    return trim(std::string_view(*it).substr(colon + 1));
  }
  return std::nullopt;
}

std::vector<std::string> labels_in_region(
    std::string_view region, const std::vector<ChoiceOption>& choices,
    bool last_only) {
  std::set<std::string> known;
  for (const auto& c : choices) known.insert(c.label);
  std::vector<std::string> found;
  std::string last;
  const auto tokens = tokenize(region);
  for (size_t i = 0; i < tokens.size(); ++i) {
    const std::string& tok = tokens[i];
    if (known.find(tok) == known.end()) continue;
    bool parenthesized = i > 0 && tokens[i - 1] == "(" &&
                         i + 1 < tokens.size() && tokens[i + 1] == ")";
    bool standalone =
        (i == 0 || !is_word_token(tokens[i - 1])) &&
        (i + 1 == tokens.size() || !is_word_token(tokens[i + 1]));
    if (!parenthesized && !standalone) continue;
    last = tok;
    if (std::find(found.begin(), found.end(), tok) == found.end())
      found.push_back(tok);
  }
  if (last_only) {
    if (last.empty()) return {};
    return {last};
  }
  return found;
}

std::optional<AnswerValue> parse_region(const std::string& region,
                                        AnswerKind kind,
                                        const std::vector<ChoiceOption>& choices) {
  if (kind == AnswerKind::Numeric) {
    const auto literals = find_numeric_literals(strip_latex(region));
    if (literals.empty()) return std::nullopt;
    return AnswerValue::numeric(literals.back().literal);
  }
  if (kind == AnswerKind::SingleChoice) {
    auto labels = labels_in_region(region, choices, /*last_only=*/true);
    if (labels.empty()) return std::nullopt;
    return AnswerValue::choice(labels.front());
  }
  auto labels = labels_in_region(region, choices, /*last_only=*/false);
  if (labels.empty()) return std::nullopt;
  return AnswerValue::choice_set(std::move(labels));
}

}  // namespace

AnswerValue extract_answer(std::string_view raw, AnswerKind kind,
                           const std::vector<ChoiceOption>& choices) {
  if (auto boxed = last_boxed_content(raw)) {
    if (auto v = parse_region(*boxed, kind, choices)) return *v;
  }
  if (auto region = last_answer_line_region(raw)) {
    if (auto v = parse_region(*region, kind, choices)) return *v;
  }
  if (kind != AnswerKind::Numeric) {
    if (auto v = parse_region(std::string(raw), kind, choices)) return *v;
  } else {
    const auto steps = split_steps(raw);
    if (!steps.empty()) {
      if (auto v = parse_region(steps.back(), kind, choices)) return *v;
    }
  }
  return AnswerValue::unparsed(std::string(raw));
}

SolverResponse parse_solver_response(std::string raw, AnswerKind kind,
                                     const std::vector<ChoiceOption>& choices) {
  SolverResponse r;
  r.steps = split_steps(raw);
  r.answer = extract_answer(raw, kind, choices);
  r.raw_text = std::move(raw);
  return r;
}

bool is_auxiliary_verb(const std::string& token) {
  for (const char* v : kAuxVerbs) {
    if (token == v) return true;
  }
  return false;
}

std::vector<NumericSpan> numeric_literals(std::string_view region) {
  std::vector<NumericSpan> out;
  for (const auto& m : find_numeric_literals(region))
    out.push_back({m.begin, m.end, m.literal});
  return out;
}

}  // namespace daslam::text
