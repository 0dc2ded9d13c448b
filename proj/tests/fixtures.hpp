#pragma once
// Shared fixtures for the reward and acceptance suites: a deterministic
// map-backed embedding provider, the worked painter example, and a
// brute-force subsequence oracle.

#include <cmath>
#include <memory>
#include <map>
#include <string>
#include <vector>

#include "daslam/core.hpp"
#include "daslam/embeddings.hpp"
#include "daslam/reward.hpp"
#include "daslam/text_analysis.hpp"

namespace daslam::testfix {

// Returns preset vectors; unknown texts map to the zero vector.
class MapProvider : public embed::EmbeddingProvider {
 public:
  explicit MapProvider(size_t dim = 2) : dim_(dim) {}
  void set(const std::string& text, std::vector<double> values) {
    vectors_[text] = std::move(values);
  }
  // Pairs `text` with the anchor direction so cosine(text, anchor) == c.
  void set_cosine_against_anchor(const std::string& text, double c) {
    vectors_[text] = {c, std::sqrt(std::max(0.0, 1.0 - c * c))};
  }
  void set_anchor(const std::string& text) { vectors_[text] = {1.0, 0.0}; }

 protected:
  embed::EmbeddingVector compute(const std::string& text) override {
    auto it = vectors_.find(text);
    if (it != vectors_.end()) return {it->second};
    return {std::vector<double>(dim_, 0.0)};
  }

 private:
  size_t dim_;
  std::map<std::string, std::vector<double>> vectors_;
};

// Exhaustive longest-common-subsequence oracle: enumerates every
// subsequence of `a` and keeps the longest that also embeds in `b`.
inline size_t lcs_brute_force(const text::OpSequence& a,
                              const text::OpSequence& b) {
  size_t best = 0;
  const size_t n = a.size();
  for (size_t mask = 0; mask < (size_t{1} << n); ++mask) {
    text::OpSequence candidate;
    for (size_t i = 0; i < n; ++i) {
      if (mask & (size_t{1} << i)) candidate.push_back(a[i]);
    }
    if (candidate.size() <= best) continue;
    size_t j = 0;
    for (size_t i = 0; i < b.size() && j < candidate.size(); ++i) {
      if (b[i] == candidate[j]) ++j;
    }
    if (j == candidate.size()) best = candidate.size();
  }
  return best;
}

inline const char* painter_question() {
  return "Each good worker can paint my new house alone in 12 hours. Each "
         "bad worker can paint my house alone in 36 hours. I need my house "
         "painted in 3 hours. If I can only find 3 good workers, how many "
         "bad workers must I also find in order to have my house painted on "
         "time?";
}

inline std::vector<std::string> painter_subquestions() {
  return {"How many good workers are needed to paint the house in 3 hours?",
          "How many bad workers are needed to paint the house in 3 hours?",
          "What is the total number of workers needed to paint the house in "
          "3 hours?"};
}

inline text::LexiconDetector painter_lexicon() {
  return text::LexiconDetector(
      {"worker", "workers", "house", "hours", "order", "time", "number"});
}

inline std::string painter_first_answer() {
  return "We can calculate the amount of work done in 3 hours by a good "
         "worker by dividing 12 hours by 3 hours.\n"
         "We get 4 as the answer.\n"
         "We know that a bad worker can paint the house in 36 hours.\n"
         "We need to find out how many good workers are needed to paint the "
         "house in 3 hours.\n"
         "We can calculate the number of good workers needed by dividing 12 "
         "by 4.\n"
         "Answer: 3 good workers can paint the house in 3 hours.";
}

struct WorkedExample {
  GoldRecord gold;
  EpisodeTranscript transcript;
  std::shared_ptr<MapProvider> provider;
};

inline const double kC1[] = {0.47673503, 0.45063934, 0.5173945, 0.46866685,
                             0.47825924};
inline const double kC2[] = {0.44773823, 0.47917843, 0.20383504};

// Assembles one episode that reproduces every worked reward component at
// once: entity sets of sizes 5 and 9, one consistent subquestion/answer pair
// with a preset cosine, operation sequences [- - + - +] vs [- - / +], the
// five step-cosine pairs, and a wrong final answer.
inline WorkedExample worked_example() {
  WorkedExample ex;
  ex.provider = std::make_shared<MapProvider>();

  ex.gold.question.id = "painter";
  ex.gold.question.text = painter_question();
  ex.gold.question.category = "P-ALG";
  ex.gold.question.answer_kind = AnswerKind::Numeric;
  ex.gold.gold_steps = {"gold one a - b", "gold two c - d",
                        "gold three e / f", "gold four g + h",
                        "gold five done"};
  ex.gold.gold_answer = AnswerValue::numeric("1/18");

  ex.transcript.question_ref = "painter";
  ex.transcript.mode = PipelineMode::Daslam;
  ex.transcript.plan.subquestions = painter_subquestions();
  ex.transcript.plan.source = PlanSource::WithFeedback;

  ex.transcript.initial.steps = {"initial step one", "initial step two",
                                 "initial step three"};
  ex.transcript.initial.raw_text = "initial step one\ninitial step two\n"
                                   "initial step three";
  ex.transcript.initial.answer = AnswerValue::numeric("1800");

  ex.transcript.final.steps = {"model one a - b", "model two c - d",
                               "model three e + f", "model four g - h",
                               "model five i + j"};
  {
    std::string raw;
    for (const auto& s : ex.transcript.final.steps) raw += s + "\n";
    ex.transcript.final.raw_text = raw;
  }
  ex.transcript.final.answer = AnswerValue::numeric("-1/12");

  SolverResponse first = text::parse_solver_response(
      painter_first_answer(), AnswerKind::Numeric, {});
  SolverResponse blank_two =
      text::parse_solver_response("nothing useful", AnswerKind::Numeric, {});
  SolverResponse blank_three =
      text::parse_solver_response("still nothing", AnswerKind::Numeric, {});
  ex.transcript.sub_answers = {first, blank_two, blank_three};

  // Preset cosines: the first pair matches the worked value, the step
  // alignments reproduce the five c1/c2 pairs against unit gold anchors.
  ex.provider->set_anchor(painter_subquestions()[0]);
  ex.provider->set_cosine_against_anchor(painter_first_answer(), 0.70457435);
  for (size_t j = 0; j < ex.gold.gold_steps.size(); ++j) {
    ex.provider->set_anchor(ex.gold.gold_steps[j]);
    ex.provider->set_cosine_against_anchor(ex.transcript.final.steps[j],
                                          kC1[j]);
    if (j < ex.transcript.initial.steps.size())
      ex.provider->set_cosine_against_anchor(ex.transcript.initial.steps[j],
                                            kC2[j]);
  }
  return ex;
}

// --- Golden replay episode -------------------------------------------------
// A deterministic full pipeline run: wrong initial answer, three
// subquestions, correct final answer.

inline Question golden_question() {
  Question q;
  q.id = "painter";
  q.text = painter_question();
  q.category = "P-ALG";
  q.answer_kind = AnswerKind::Numeric;
  return q;
}

inline GoldRecord golden_gold_record() {
  GoldRecord r;
  r.question = golden_question();
  r.gold_steps = {
      "A good worker paints 1/12 of the house per hour, so 3 good workers "
      "paint 9/12 = 3/4 in 3 hours.",
      "The remaining 1/4 must come from bad workers.",
      "A bad worker paints 3/36 = 1/12 of the house in 3 hours.",
      "1/4 / 1/12 = 3 bad workers.",
      "Answer: 3"};
  r.gold_answer = AnswerValue::numeric("3");
  SubproblemPlan plan;
  plan.subquestions = painter_subquestions();
  plan.source = PlanSource::Gold;
  r.gold_subquestions = plan;
  return r;
}

inline std::vector<std::string> golden_solver_script() {
  return {
      // Initial attempt, wrong answer.
      "Each good worker can paint the house in 12 hours.\n"
      "I need the house painted in 3 hours.\n"
      "Answer: 12",
      // Subquestion answers.
      painter_first_answer(),
      "A bad worker paints 1/36 of the house per hour.\n"
      "In 3 hours one bad worker paints 3/36 = 1/12 of the house.\n"
      "Answer: 12 bad workers each cover 1/12 of the house.",
      "Three good workers cover 3/4 of the house in 3 hours.\n"
      "The remaining 1/4 is left for bad workers.\n"
      "Answer: 4 workers in total beyond the good ones is wrong; the "
      "remainder is 1/4.",
      // Final pass, correct answer.
      "Three good workers paint 3/4 of the house in 3 hours.\n"
      "The remaining 1/4 must be painted by bad workers.\n"
      "Each bad worker paints 3/36 = 1/12 in 3 hours.\n"
      "1/4 divided by 1/12 = 3.\n"
      "Answer: 3"};
}

inline std::vector<std::string> golden_decomposer_script() {
  return {
      "1. How many good workers are needed to paint the house in 3 hours?\n"
      "2. How many bad workers are needed to paint the house in 3 hours?\n"
      "3. What is the total number of workers needed to paint the house in 3 "
      "hours?"};
}

}  // namespace daslam::testfix
