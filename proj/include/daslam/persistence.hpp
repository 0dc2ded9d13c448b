#pragma once
// JSONL schemas, readers, and writers for every on-disk artifact: datasets,
// transcripts, reward breakdowns, checkpoints, and reports.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

#include "daslam/core.hpp"
#include "daslam/reward.hpp"
#include "daslam/rl_trainer.hpp"

namespace daslam::io {

enum class SchemaKind : uint8_t { Dataset, Transcript, Reward, Checkpoint, Report };

constexpr int kSchemaVersion = 1;

std::string_view schema_kind_name(SchemaKind kind);

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Readers reject unknown versions with a named error, never silently coerce.
struct SchemaVersionError : IoError {
  using IoError::IoError;
};

using json = nlohmann::ordered_json;

// JSON conversions (field order is part of the on-disk format).
json to_json(const AnswerValue& v);
AnswerValue answer_value_from_json(const json& j);

json to_json(const SolverResponse& r);
SolverResponse solver_response_from_json(const json& j);

json to_json(const SubproblemPlan& p);
SubproblemPlan subproblem_plan_from_json(const json& j);

// Dataset lines are flat: id, question, category, answer_kind, choices,
// gold_steps, gold_answer, gold_subquestions (optional).
json to_json(const GoldRecord& r);
GoldRecord gold_record_from_json(const json& j);

json to_json(const EpisodeTranscript& t);
EpisodeTranscript transcript_from_json(const json& j);

json to_json(const reward::RewardBreakdown& b);
reward::RewardBreakdown reward_breakdown_from_json(const json& j);

// One JSON object per line, UTF-8, trailing newline; the file is written to
// a temporary sibling and atomically renamed into place on completion.
// Returns the number of records written. IO errors carry the path.
template <typename Record>
size_t write_jsonl(const std::filesystem::path& path,
                   const std::vector<Record>& records);

// Validated records; parse errors carry the 1-based line number.
template <typename Record>
std::vector<Record> read_jsonl(const std::filesystem::path& path,
                               SchemaKind expected_kind);

// Raw-line primitives used by the typed wrappers above.
size_t write_jsonl_lines(const std::filesystem::path& path,
                         const std::vector<std::string>& lines);
std::vector<json> read_jsonl_objects(const std::filesystem::path& path,
                                     SchemaKind expected_kind);

// Atomic whole-file text write (temp + rename), shared by reports.
void write_text_file(const std::filesystem::path& path,
                     const std::string& content);

// Trainer checkpoints: single JSON document with the policy, KL coefficient,
// iteration counter and RNG state.
void save_checkpoint(const std::filesystem::path& path,
                     const rl::PpoState& state);
rl::PpoState load_checkpoint(const std::filesystem::path& path);

}  // namespace daslam::io
