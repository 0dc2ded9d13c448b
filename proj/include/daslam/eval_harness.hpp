#pragma once
// Exact-match scoring and per-category accuracy aggregation across pipeline
// modes.

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "daslam/core.hpp"
#include "daslam/orchestrator.hpp"

namespace daslam::eval {

struct PerItemResult {
  std::string id;
  PipelineMode mode = PipelineMode::CotOnly;
  AnswerValue predicted;
  AnswerValue gold;
  bool correct = false;
  std::optional<std::string> error;  // pipeline failure annotation
};

struct CategoryStats {
  size_t n = 0;
  size_t correct = 0;
  // Rounding happens only at render time.
  double accuracy_percent() const {
    return n == 0 ? 0.0 : 100.0 * static_cast<double>(correct) / static_cast<double>(n);
  }
};

struct EvalResult {
  PipelineMode mode = PipelineMode::CotOnly;
  std::vector<PerItemResult> per_item;
  std::map<std::string, CategoryStats> per_category;
};

// Exact match under the shared answer normalization.
bool score_item(const AnswerValue& predicted, const AnswerValue& gold);

struct ClientPair {
  std::shared_ptr<pipeline::CompletionClient> solver;
  std::shared_ptr<pipeline::CompletionClient> decomposer;  // may be null for CoT-only
};

// Per-item client factory; replay-backed evaluation hands each item its own
// scripts so one exhausted script cannot derail the rest.
using ClientSource = std::function<ClientPair(const GoldRecord&)>;

// Runs one episode per record and aggregates by category. Items whose
// pipeline errors out count as incorrect, with the error recorded. When
// transcripts is non-null every (possibly partial) transcript is collected
// in dataset order. Throws std::invalid_argument("empty dataset") on an
// empty input.
EvalResult run_eval(const std::vector<GoldRecord>& dataset,
                    const pipeline::PipelineConfig& cfg,
                    const ClientSource& clients,
                    std::vector<EpisodeTranscript>* transcripts = nullptr,
                    int parallelism = 1);

struct Report {
  std::string table;  // aligned text table
  std::string csv;
};

// Rows are categories (sorted), columns the modes in fixed order CotOnly,
// DaslamNF, Daslam; cells are accuracy to one decimal. All results must
// cover the same item ids.
Report render_report(const std::vector<EvalResult>& results);

}  // namespace daslam::eval
