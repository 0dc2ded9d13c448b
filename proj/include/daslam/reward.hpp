#pragma once
// The five reward components and their sum, computed from an episode
// transcript plus a gold record.

#include <optional>
#include <string>
#include <vector>

#include "daslam/core.hpp"
#include "daslam/embeddings.hpp"
#include "daslam/text_analysis.hpp"

namespace daslam::reward {

/// Per-step cosine comparison for the reasoning-proximity reward.
/// contribution = c1 if c1 > c2, (-1 - c2) if c2 > c1, 0 on ties.
struct StepAlignment {
  size_t index = 0;
  double c1 = 0.0;  // cosine(final step j, gold step j)
  double c2 = 0.0;  // cosine(baseline step j, gold step j)
  double contribution = 0.0;
  bool operator==(const StepAlignment&) const = default;
};

struct ConsistencyTerm {
  std::string subquestion;
  std::string asked_entity;     // entity whose value the subquestion asks for
  std::string answered_entity;  // entity named next to the answered value
  int indicator = 0;            // 1 iff the two entities match
  double cosine = 0.0;          // cosine(subquestion, answer text)
  bool operator==(const ConsistencyTerm&) const = default;
};

struct RewardBreakdown {
  std::optional<std::string> question_ref;
  double r1 = 0.0;
  double r2 = 0.0;
  double r3 = 0.0;
  double r4 = 0.0;
  double r5 = 0.0;
  double total = 0.0;  // ((((r1 + r2) + r3) + r4) + r5), fixed order

  // Intermediate quantities.
  size_t subquestion_entities = 0;
  size_t question_entities = 0;
  std::vector<ConsistencyTerm> consistency_terms;
  text::OpSequence model_ops;
  text::OpSequence gold_ops;
  size_t ops_matched_in_order = 0;  // l
  size_t gold_op_count = 0;         // m
  std::vector<StepAlignment> alignments;
  bool operator==(const RewardBreakdown&) const = default;
};

// R1: |E_Q'| / |E_Q|, sizes counting nouns + numbers. Unclamped; values
// above 1 are possible. Throws std::domain_error("no entities in question")
// when E_Q is empty.
double entity_coverage(const text::EntitySet& subquestion_entities,
                       const text::EntitySet& question_entities);

// Entity asked for by a subquestion: the last noun before the first
// auxiliary-verb token ("How many good workers are ..." -> "workers"),
// falling back to the first noun anywhere. Empty string when none.
std::string asked_entity(const std::string& subquestion,
                         const text::NounDetector& detector);

// Entity named in the answer: the first noun after the first numeric of the
// final step's answer region ("Answer: 3 good workers ..." -> "workers"),
// falling back to the first noun of that region. Empty string when none.
std::string answered_entity(const SolverResponse& response,
                            const text::NounDetector& detector);

// R2: sum over pairs of (entity-match indicator + cosine of the subquestion
// and answer embeddings). Unextractable entities make the indicator 0.
double consistency(
    const std::vector<std::pair<std::string, SolverResponse>>& subqa,
    embed::EmbeddingProvider& provider, const text::NounDetector& detector,
    std::vector<ConsistencyTerm>* terms = nullptr);

// Length of the longest common subsequence, the order-preserving match count.
size_t lcs_length(const text::OpSequence& a, const text::OpSequence& b);

struct OpsMatch {
  size_t matched = 0;     // l
  size_t gold_total = 0;  // m
  double value = 1.0;     // l/m, or 1 when m == 0
};

// R3: l/m with l the LCS length against the gold sequence and m the gold
// operation count; vacuously 1 when the gold has no operations.
OpsMatch order_of_operations(const text::OpSequence& model_ops,
                             const text::OpSequence& gold_ops);

// R4: per gold step j, compares cosine(final_j, gold_j) against
// cosine(baseline_j, gold_j); a missing step contributes cosine 0 for its
// side. Returns the summed contributions and the per-step alignments.
std::pair<double, std::vector<StepAlignment>> cot_proximity(
    const std::vector<std::string>& final_steps,
    const std::vector<std::string>& baseline_steps,
    const std::vector<std::string>& gold_steps,
    embed::EmbeddingProvider& provider);

// R5: 1 iff normalized equality; Unparsed on either side scores 0.
int final_correctness(const AnswerValue& predicted, const AnswerValue& gold);

// Composes the five components over a full decomposition episode.
// Precondition: transcript.mode != CotOnly.
RewardBreakdown total_reward(const EpisodeTranscript& transcript,
                             const GoldRecord& gold,
                             embed::EmbeddingProvider& provider,
                             const text::NounDetector& detector);

}  // namespace daslam::reward
