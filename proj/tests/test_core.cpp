#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <random>

#include "daslam/core.hpp"

using namespace daslam;

namespace {

GoldRecord aqua_record() {
  GoldRecord r;
  r.question.id = "aqua-1";
  r.question.text =
      "John borrowed 3 soccer boots from Jake; what is the probability that "
      "Jake's boots were not amongst the 4 taken?";
  r.question.category = "AQuA";
  r.question.answer_kind = AnswerKind::SingleChoice;
  r.question.choices = {{"A", "12/91"},
                        {"B", "3/15"},
                        {"C", "12/15"},
                        {"D", "33/91"},
                        {"E", "3/91"}};
  r.gold_steps = {"The first boot can be one of the 12 from the 15.",
                  "The total probability comes to 33/91."};
  r.gold_answer = AnswerValue::choice("D");
  return r;
}

}  // namespace

TEST_CASE("normalize_numeric canonical forms") {
  CHECK(normalize_numeric("0.50") == "1/2");
  CHECK(normalize_numeric("-1/12") == "-1/12");
  CHECK(normalize_numeric("240") == "240");
  CHECK(normalize_numeric("2/4") == "1/2");
  CHECK(normalize_numeric("1/-2") == "-1/2");
  CHECK(normalize_numeric("-0") == "0");
  CHECK(normalize_numeric("78.21") == "7821/100");
  CHECK(normalize_numeric("007") == "7");
  CHECK_THROWS_WITH_AS(normalize_numeric("abc"), doctest::Contains("not numeric"),
                       std::invalid_argument);
  CHECK_THROWS_AS(normalize_numeric(""), std::invalid_argument);
  CHECK_THROWS_AS(normalize_numeric("1/0"), std::invalid_argument);
}

TEST_CASE("normalize_numeric is idempotent and constant on classes") {
  const char* equivalent[] = {"0.5", "1/2", "2/4", "0.500", "3/6"};
  for (const char* a : equivalent) {
    CHECK(normalize_numeric(a) == "1/2");
    CHECK(normalize_numeric(normalize_numeric(a)) == normalize_numeric(a));
  }

  std::mt19937_64 rng(7);
  for (int i = 0; i < 200; ++i) {
    long num = static_cast<long>(rng() % 2000) - 1000;
    long den = static_cast<long>(rng() % 999) + 1;
    long k = static_cast<long>(rng() % 9) + 1;
    std::string a = std::to_string(num) + "/" + std::to_string(den);
    std::string b = std::to_string(num * k) + "/" + std::to_string(den * k);
    CHECK(normalize_numeric(a) == normalize_numeric(b));
    CHECK(normalize_numeric(normalize_numeric(a)) == normalize_numeric(a));
  }
}

TEST_CASE("answer values compare under normalization") {
  CHECK(AnswerValue::numeric("1/2") == AnswerValue::numeric("0.5"));
  CHECK(AnswerValue::numeric("-1/12") == AnswerValue::numeric("-1/12"));
  CHECK_FALSE(AnswerValue::numeric("-1/12") == AnswerValue::numeric("1/18"));
  CHECK(AnswerValue::choice_set({"A", "C"}) == AnswerValue::choice_set({"C", "A"}));
  CHECK(AnswerValue::choice_set({"A", "A", "C"}) ==
        AnswerValue::choice_set({"C", "A"}));
  CHECK_FALSE(AnswerValue::choice("A") == AnswerValue::choice_set({"A"}));
  CHECK(AnswerValue::numeric("0.5").literal() == "0.5");
  CHECK(AnswerValue::numeric("0.5").canonical() == "1/2");
}

TEST_CASE("validate_gold_record examples") {
  SUBCASE("well-formed five-choice record") {
    CHECK(validate_gold_record(aqua_record()).empty());
  }
  SUBCASE("multi-choice record with empty choices") {
    GoldRecord r = aqua_record();
    r.question.answer_kind = AnswerKind::MultiChoice;
    r.question.choices.clear();
    r.gold_answer = AnswerValue::choice_set({"A", "D"});
    const auto violations = validate_gold_record(r);
    CHECK(std::find(violations.begin(), violations.end(), "choices empty") !=
          violations.end());
  }
  SUBCASE("numeric gold against a single-choice question") {
    GoldRecord r = aqua_record();
    r.gold_answer = AnswerValue::numeric("33/91");
    const auto violations = validate_gold_record(r);
    CHECK(std::find(violations.begin(), violations.end(),
                    "answer kind mismatch") != violations.end());
  }
  SUBCASE("duplicate labels") {
    GoldRecord r = aqua_record();
    r.question.choices = {{"A", "x"}, {"A", "y"}};
    const auto violations = validate_gold_record(r);
    CHECK(std::find(violations.begin(), violations.end(),
                    "duplicate choice labels") != violations.end());
  }
  SUBCASE("empty question text") {
    GoldRecord r = aqua_record();
    r.question.text.clear();
    CHECK_FALSE(validate_gold_record(r).empty());
  }
}
