#include "daslam/core.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <stdexcept>

namespace daslam {
namespace {

using Int = __int128;

Int int_abs(Int v) { return v < 0 ? -v : v; }

Int int_gcd(Int a, Int b) {
  a = int_abs(a);
  b = int_abs(b);
  while (b != 0) {
    Int t = a % b;
    a = b;
    b = t;
  }
  return a;
}

std::string int_to_string(Int v) {
  if (v == 0) return "0";
  bool neg = v < 0;
  if (neg) v = -v;
  std::string digits;
  while (v > 0) {
    digits.push_back(static_cast<char>('0' + static_cast<int>(v % 10)));
    v /= 10;
  }
  if (neg) digits.push_back('-');
  std::reverse(digits.begin(), digits.end());
  return digits;
}

bool all_digits(std::string_view s) {
  if (s.empty()) return false;
  return std::all_of(s.begin(), s.end(),
                     [](unsigned char c) { return std::isdigit(c); });
}

// Digit budget that keeps __int128 arithmetic exact.
constexpr size_t kMaxDigits = 30;

bool parse_int(std::string_view digits, bool negative, Int& out) {
  if (!all_digits(digits) || digits.size() > kMaxDigits) return false;
  Int v = 0;
  for (char c : digits) v = v * 10 + (c - '0');
  out = negative ? -v : v;
  return true;
}

std::string strip_trailing_zeros(std::string decimal) {
  if (decimal.find('.') == std::string::npos) return decimal;
  while (!decimal.empty() && decimal.back() == '0') decimal.pop_back();
  if (!decimal.empty() && decimal.back() == '.') decimal.pop_back();
  if (decimal.empty() || decimal == "-") return "0";
  return decimal;
}

std::string render_rational(Int num, Int den) {
  if (den < 0) {
    den = -den;
    num = -num;
  }
  Int g = int_gcd(num, den);
  if (g > 1) {
    num /= g;
    den /= g;
  }
  if (num == 0) return "0";
  if (den == 1) return int_to_string(num);
  return int_to_string(num) + "/" + int_to_string(den);
}

}  // namespace

bool is_numeric_literal(std::string_view token) {
  if (token.empty()) return false;
  std::string_view body = token;
  if (body.front() == '-') body.remove_prefix(1);
  if (body.empty()) return false;
  size_t slash = body.find('/');
  if (slash != std::string_view::npos) {
    std::string_view num = body.substr(0, slash);
    std::string_view den = body.substr(slash + 1);
    if (!den.empty() && den.front() == '-') den.remove_prefix(1);
    return all_digits(num) && all_digits(den);
  }
  size_t dot = body.find('.');
  if (dot != std::string_view::npos) {
    return all_digits(body.substr(0, dot)) && all_digits(body.substr(dot + 1));
  }
  return all_digits(body);
}

std::string normalize_numeric(std::string_view literal) {
  // Trim surrounding whitespace.
  size_t begin = literal.find_first_not_of(" \t\r\n");
  size_t end = literal.find_last_not_of(" \t\r\n");
  if (begin == std::string_view::npos)
    throw std::invalid_argument("not numeric: " + std::string(literal));
  std::string_view s = literal.substr(begin, end - begin + 1);
  if (!is_numeric_literal(s))
    throw std::invalid_argument("not numeric: " + std::string(literal));

  bool negative = s.front() == '-';
  std::string_view body = negative ? s.substr(1) : s;

  size_t slash = body.find('/');
  if (slash != std::string_view::npos) {
    std::string_view num_digits = body.substr(0, slash);
    std::string_view den_part = body.substr(slash + 1);
    bool den_negative = !den_part.empty() && den_part.front() == '-';
    if (den_negative) den_part.remove_prefix(1);
    Int num = 0, den = 0;
    if (!parse_int(num_digits, negative, num) ||
        !parse_int(den_part, den_negative, den) || den == 0)
      throw std::invalid_argument("not numeric: " + std::string(literal));
    return render_rational(num, den);
  }

  size_t dot = body.find('.');
  if (dot == std::string_view::npos) {
    Int v = 0;
    if (parse_int(body, negative, v)) return int_to_string(v);
    // Too many digits for exact arithmetic: strip leading zeros and keep.
    std::string out(body);
    size_t nz = out.find_first_not_of('0');
    out = nz == std::string::npos ? "0" : out.substr(nz);
    return (negative && out != "0") ? "-" + out : out;
  }

  std::string_view int_part = body.substr(0, dot);
  std::string_view frac_part = body.substr(dot + 1);
  if (int_part.size() + frac_part.size() <= kMaxDigits) {
    Int scaled = 0;
    for (char c : int_part) scaled = scaled * 10 + (c - '0');
    Int den = 1;
    for (char c : frac_part) {
      scaled = scaled * 10 + (c - '0');
      den *= 10;
    }
    if (negative) scaled = -scaled;
    return render_rational(scaled, den);
  }
  // Exact arithmetic would overflow; fall back to the stripped decimal.
  return strip_trailing_zeros((negative ? "-" : "") + std::string(body));
}

AnswerValue AnswerValue::numeric(std::string literal) {
  AnswerValue v;
  v.kind_ = Kind::Numeric;
  v.canonical_ = normalize_numeric(literal);
  v.text_ = std::move(literal);
  return v;
}

AnswerValue AnswerValue::choice(std::string label) {
  AnswerValue v;
  v.kind_ = Kind::Choice;
  v.text_ = std::move(label);
  return v;
}

AnswerValue AnswerValue::choice_set(std::vector<std::string> labels) {
  AnswerValue v;
  v.kind_ = Kind::ChoiceSet;
  std::sort(labels.begin(), labels.end());
  labels.erase(std::unique(labels.begin(), labels.end()), labels.end());
  v.labels_ = std::move(labels);
  return v;
}

AnswerValue AnswerValue::unparsed(std::string raw) {
  AnswerValue v;
  v.kind_ = Kind::Unparsed;
  v.text_ = std::move(raw);
  return v;
}

std::string AnswerValue::display() const {
  switch (kind_) {
    case Kind::Numeric:
      return text_;
    case Kind::Choice:
      return text_;
    case Kind::ChoiceSet: {
      std::string out;
      for (const auto& l : labels_) {
        if (!out.empty()) out += ",";
        out += l;
      }
      return out;
    }
    case Kind::Unparsed:
      return "<unparsed>";
  }
  return {};
}

bool AnswerValue::operator==(const AnswerValue& other) const {
  if (kind_ != other.kind_) return false;
  switch (kind_) {
    case Kind::Numeric:
      return canonical_ == other.canonical_;
    case Kind::Choice:
    case Kind::Unparsed:
      return text_ == other.text_;
    case Kind::ChoiceSet:
      return labels_ == other.labels_;
  }
  return false;
}

std::string_view answer_kind_name(AnswerKind k) {
  switch (k) {
    case AnswerKind::Numeric:
      return "numeric";
    case AnswerKind::SingleChoice:
      return "single_choice";
    case AnswerKind::MultiChoice:
      return "multi_choice";
  }
  return "numeric";
}

AnswerKind answer_kind_from_name(std::string_view name) {
  if (name == "numeric") return AnswerKind::Numeric;
  if (name == "single_choice") return AnswerKind::SingleChoice;
  if (name == "multi_choice") return AnswerKind::MultiChoice;
  throw std::invalid_argument("unknown answer kind: " + std::string(name));
}

std::string_view plan_source_name(PlanSource s) {
  switch (s) {
    case PlanSource::WithFeedback:
      return "with_feedback";
    case PlanSource::NoFeedback:
      return "no_feedback";
    case PlanSource::Gold:
      return "gold";
  }
  return "gold";
}

PlanSource plan_source_from_name(std::string_view name) {
  if (name == "with_feedback") return PlanSource::WithFeedback;
  if (name == "no_feedback") return PlanSource::NoFeedback;
  if (name == "gold") return PlanSource::Gold;
  throw std::invalid_argument("unknown plan source: " + std::string(name));
}

std::string_view pipeline_mode_name(PipelineMode m) {
  switch (m) {
    case PipelineMode::CotOnly:
      return "cot_only";
    case PipelineMode::DaslamNF:
      return "daslam_nf";
    case PipelineMode::Daslam:
      return "daslam";
  }
  return "daslam";
}

PipelineMode pipeline_mode_from_name(std::string_view name) {
  if (name == "cot_only") return PipelineMode::CotOnly;
  if (name == "daslam_nf") return PipelineMode::DaslamNF;
  if (name == "daslam") return PipelineMode::Daslam;
  throw std::invalid_argument("unknown pipeline mode: " + std::string(name));
}

std::vector<std::string> validate_gold_record(const GoldRecord& record) {
  std::vector<std::string> violations;
  const Question& q = record.question;

  if (q.text.empty()) violations.push_back("question text empty");

  if (q.answer_kind != AnswerKind::Numeric) {
    if (q.choices.empty()) {
      violations.push_back("choices empty");
    } else {
      std::vector<std::string> labels;
      for (const auto& c : q.choices) labels.push_back(c.label);
      std::sort(labels.begin(), labels.end());
      if (std::adjacent_find(labels.begin(), labels.end()) != labels.end())
        violations.push_back("duplicate choice labels");
    }
  }

  const auto gold_kind = record.gold_answer.kind();
  bool kind_matches = false;
  switch (q.answer_kind) {
    case AnswerKind::Numeric:
      kind_matches = gold_kind == AnswerValue::Kind::Numeric;
      break;
    case AnswerKind::SingleChoice:
      kind_matches = gold_kind == AnswerValue::Kind::Choice;
      break;
    case AnswerKind::MultiChoice:
      kind_matches = gold_kind == AnswerValue::Kind::ChoiceSet;
      break;
  }
  if (!kind_matches) violations.push_back("answer kind mismatch");

  if (record.gold_subquestions) {
    const auto& plan = *record.gold_subquestions;
    if (plan.subquestions.empty())
      violations.push_back("gold subquestions empty");
    for (size_t i = 0; i < plan.subquestions.size(); ++i) {
      if (plan.subquestions[i].empty())
        violations.push_back("subquestion " + std::to_string(i + 1) + " empty");
    }
  }
  return violations;
}

}  // namespace daslam
