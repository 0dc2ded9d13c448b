#include "daslam/reward.hpp"

#include <algorithm>
#include <cctype>
#include <stdexcept>

namespace daslam::reward {
namespace {

std::string to_lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return out;
}

std::string first_noun(const std::vector<std::string>& tokens, size_t from,
                       size_t to, const text::NounDetector& detector) {
  for (size_t i = from; i < to && i < tokens.size(); ++i) {
    std::string lower = to_lower(tokens[i]);
    if (detector.is_noun(lower)) return lower;
  }
  return {};
}

std::string last_noun(const std::vector<std::string>& tokens, size_t from,
                      size_t to, const text::NounDetector& detector) {
  std::string found;
  for (size_t i = from; i < to && i < tokens.size(); ++i) {
    std::string lower = to_lower(tokens[i]);
    if (detector.is_noun(lower)) found = std::move(lower);
  }
  return found;
}

}  // namespace

double entity_coverage(const text::EntitySet& subquestion_entities,
                       const text::EntitySet& question_entities) {
  if (question_entities.size() == 0)
    throw std::domain_error("no entities in question");
  return static_cast<double>(subquestion_entities.size()) /
         static_cast<double>(question_entities.size());
}

std::string asked_entity(const std::string& subquestion,
                         const text::NounDetector& detector) {
  const auto tokens = text::tokenize(subquestion);
  size_t clause_end = tokens.size();
  for (size_t i = 0; i < tokens.size(); ++i) {
    if (text::is_auxiliary_verb(to_lower(tokens[i]))) {
      clause_end = i;
      break;
    }
  }
  std::string noun = last_noun(tokens, 0, clause_end, detector);
  if (noun.empty()) noun = first_noun(tokens, 0, tokens.size(), detector);
  return noun;
}

std::string answered_entity(const SolverResponse& response,
                            const text::NounDetector& detector) {
  if (response.steps.empty()) return {};
  std::string region = response.steps.back();
  // Strip an "Answer:"-style prefix so the entity scan starts at the value.
  std::string lower = to_lower(region);
  size_t offset = std::string::npos;
  if (lower.rfind("final answer", 0) == 0 || lower.rfind("answer", 0) == 0)
    offset = region.find(':');
  if (offset != std::string::npos) region = region.substr(offset + 1);

  const auto numerics = text::numeric_literals(region);
  const auto tokens = text::tokenize(
      numerics.empty() ? region : region.substr(numerics.front().end));
  std::string noun = first_noun(tokens, 0, tokens.size(), detector);
  if (noun.empty() && !numerics.empty()) {
    const auto all = text::tokenize(region);
    noun = first_noun(all, 0, all.size(), detector);
  }
  return noun;
}

double consistency(
    const std::vector<std::pair<std::string, SolverResponse>>& subqa,
    embed::EmbeddingProvider& provider, const text::NounDetector& detector,
    std::vector<ConsistencyTerm>* terms) {
  if (subqa.empty())
    throw std::invalid_argument("consistency: empty subquestion list");
  double total = 0.0;
  for (const auto& [subquestion, response] : subqa) {
    ConsistencyTerm term;
    term.subquestion = subquestion;
    term.asked_entity = asked_entity(subquestion, detector);
    term.answered_entity = answered_entity(response, detector);
    term.indicator = (!term.asked_entity.empty() &&
                      term.asked_entity == term.answered_entity)
                         ? 1
                         : 0;
    term.cosine = embed::cosine(provider.embed(subquestion),
                                provider.embed(response.raw_text));
    total += static_cast<double>(term.indicator) + term.cosine;
    if (terms) terms->push_back(std::move(term));
  }
  return total;
}

size_t lcs_length(const text::OpSequence& a, const text::OpSequence& b) {
  const size_t n = a.size(), m = b.size();
  if (n == 0 || m == 0) return 0;
  std::vector<size_t> prev(m + 1, 0), curr(m + 1, 0);
  for (size_t i = 1; i <= n; ++i) {
    for (size_t j = 1; j <= m; ++j) {
      if (a[i - 1] == b[j - 1])
        curr[j] = prev[j - 1] + 1;
      else
        curr[j] = std::max(prev[j], curr[j - 1]);
    }
    std::swap(prev, curr);
  }
  return prev[m];
}

OpsMatch order_of_operations(const text::OpSequence& model_ops,
                             const text::OpSequence& gold_ops) {
  OpsMatch result;
  result.matched = lcs_length(model_ops, gold_ops);
  result.gold_total = gold_ops.size();
  result.value = result.gold_total == 0
                     ? 1.0
                     : static_cast<double>(result.matched) /
                           static_cast<double>(result.gold_total);
  return result;
}

std::pair<double, std::vector<StepAlignment>> cot_proximity(
    const std::vector<std::string>& final_steps,
    const std::vector<std::string>& baseline_steps,
    const std::vector<std::string>& gold_steps,
    embed::EmbeddingProvider& provider) {
  if (gold_steps.empty())
    throw std::invalid_argument("cot_proximity: gold steps empty");
  std::vector<StepAlignment> alignments;
  double total = 0.0;
  for (size_t j = 0; j < gold_steps.size(); ++j) {
    StepAlignment a;
    a.index = j;
    const auto gold_vec = provider.embed(gold_steps[j]);
    a.c1 = j < final_steps.size()
               ? embed::cosine(provider.embed(final_steps[j]), gold_vec)
               : 0.0;
    a.c2 = j < baseline_steps.size()
               ? embed::cosine(provider.embed(baseline_steps[j]), gold_vec)
               : 0.0;
    if (a.c1 > a.c2)
      a.contribution = a.c1;
    else if (a.c2 > a.c1)
      a.contribution = -1.0 - a.c2;
    else
      a.contribution = 0.0;
    total += a.contribution;
    alignments.push_back(a);
  }
  return {total, std::move(alignments)};
}

int final_correctness(const AnswerValue& predicted, const AnswerValue& gold) {
  if (predicted.is_unparsed() || gold.is_unparsed()) return 0;
  return predicted == gold ? 1 : 0;
}

RewardBreakdown total_reward(const EpisodeTranscript& transcript,
                             const GoldRecord& gold,
                             embed::EmbeddingProvider& provider,
                             const text::NounDetector& detector) {
  if (transcript.mode == PipelineMode::CotOnly)
    throw std::invalid_argument(
        "total_reward: rewards are defined for decomposition episodes");

  RewardBreakdown b;
  b.question_ref = transcript.question_ref;

  // R1: entities of the concatenated subquestions against the question's.
  std::string concatenated;
  for (const auto& sq : transcript.plan.subquestions) {
    if (!concatenated.empty()) concatenated += " ";
    concatenated += sq;
  }
  const auto eq_prime = text::extract_entities(concatenated, detector);
  const auto eq = text::extract_entities(gold.question.text, detector);
  b.subquestion_entities = eq_prime.size();
  b.question_entities = eq.size();
  b.r1 = entity_coverage(eq_prime, eq);

  // R2 over the (subquestion, sub-answer) pairs.
  std::vector<std::pair<std::string, SolverResponse>> subqa;
  const size_t pairs = std::min(transcript.plan.subquestions.size(),
                                transcript.sub_answers.size());
  for (size_t i = 0; i < pairs; ++i)
    subqa.emplace_back(transcript.plan.subquestions[i],
                       transcript.sub_answers[i]);
  b.r2 = consistency(subqa, provider, detector, &b.consistency_terms);

  // R3 on operation sequences of the final reasoning vs the gold's.
  b.model_ops = text::extract_ops(transcript.final.steps);
  b.gold_ops = text::extract_ops(gold.gold_steps);
  const auto match = order_of_operations(b.model_ops, b.gold_ops);
  b.ops_matched_in_order = match.matched;
  b.gold_op_count = match.gold_total;
  b.r3 = match.value;

  // R4 against the initial response as baseline.
  auto [r4, alignments] = cot_proximity(transcript.final.steps,
                                        transcript.initial.steps,
                                        gold.gold_steps, provider);
  b.r4 = r4;
  b.alignments = std::move(alignments);

  b.r5 = final_correctness(transcript.final.answer, gold.gold_answer);

  b.total = ((((b.r1 + b.r2) + b.r3) + b.r4) + b.r5);
  return b;
}

}  // namespace daslam::reward
