#include "daslam/persistence.hpp"

#include <fstream>
#include <sstream>

namespace daslam::io {
namespace {

json version_header() { return json{{"v", kSchemaVersion}}; }

void check_version(const json& j, SchemaKind kind, size_t line) {
  if (!j.contains("v") || !j["v"].is_number_integer())
    throw SchemaVersionError("line " + std::to_string(line) +
                             ": missing schema version");
  const int v = j["v"].get<int>();
  if (v != kSchemaVersion)
    throw SchemaVersionError(
        "line " + std::to_string(line) + ": unsupported " +
        std::string(schema_kind_name(kind)) + " schema version " +
        std::to_string(v));
}

json ops_to_json(const text::OpSequence& ops) {
  json arr = json::array();
  for (auto op : ops) arr.push_back(std::string(text::op_name(op)));
  return arr;
}

text::OpSequence ops_from_json(const json& arr) {
  text::OpSequence ops;
  for (const auto& j : arr) ops.push_back(text::op_from_name(j.get<std::string>()));
  return ops;
}

}  // namespace

std::string_view schema_kind_name(SchemaKind kind) {
  switch (kind) {
    case SchemaKind::Dataset:
      return "dataset";
    case SchemaKind::Transcript:
      return "transcript";
    case SchemaKind::Reward:
      return "reward";
    case SchemaKind::Checkpoint:
      return "checkpoint";
    case SchemaKind::Report:
      return "report";
  }
  return "dataset";
}

json to_json(const AnswerValue& v) {
  switch (v.kind()) {
    case AnswerValue::Kind::Numeric:
      return json{{"kind", "numeric"}, {"literal", v.literal()}};
    case AnswerValue::Kind::Choice:
      return json{{"kind", "choice"}, {"label", v.label()}};
    case AnswerValue::Kind::ChoiceSet:
      return json{{"kind", "choice_set"}, {"labels", v.labels()}};
    case AnswerValue::Kind::Unparsed:
      return json{{"kind", "unparsed"}, {"raw", v.raw()}};
  }
  return json{{"kind", "unparsed"}, {"raw", ""}};
}

AnswerValue answer_value_from_json(const json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "numeric")
    return AnswerValue::numeric(j.at("literal").get<std::string>());
  if (kind == "choice")
    return AnswerValue::choice(j.at("label").get<std::string>());
  if (kind == "choice_set")
    return AnswerValue::choice_set(
        j.at("labels").get<std::vector<std::string>>());
  if (kind == "unparsed")
    return AnswerValue::unparsed(j.at("raw").get<std::string>());
  throw IoError("unknown answer kind: " + kind);
}

json to_json(const SolverResponse& r) {
  return json{{"raw_text", r.raw_text},
              {"steps", r.steps},
              {"answer", to_json(r.answer)}};
}

SolverResponse solver_response_from_json(const json& j) {
  SolverResponse r;
  r.raw_text = j.at("raw_text").get<std::string>();
  r.steps = j.at("steps").get<std::vector<std::string>>();
  r.answer = answer_value_from_json(j.at("answer"));
  return r;
}

json to_json(const SubproblemPlan& p) {
  return json{{"subquestions", p.subquestions},
              {"source", std::string(plan_source_name(p.source))}};
}

SubproblemPlan subproblem_plan_from_json(const json& j) {
  SubproblemPlan p;
  p.subquestions = j.at("subquestions").get<std::vector<std::string>>();
  p.source = plan_source_from_name(j.at("source").get<std::string>());
  return p;
}

json to_json(const GoldRecord& r) {
  json j;
  j["v"] = kSchemaVersion;
  j["id"] = r.question.id;
  j["question"] = r.question.text;
  j["category"] = r.question.category;
  j["answer_kind"] = std::string(answer_kind_name(r.question.answer_kind));
  json choices = json::array();
  for (const auto& c : r.question.choices)
    choices.push_back(json::array({c.label, c.text}));
  j["choices"] = choices;
  j["gold_steps"] = r.gold_steps;
  j["gold_answer"] = to_json(r.gold_answer);
  if (r.gold_subquestions)
    j["gold_subquestions"] = r.gold_subquestions->subquestions;
  return j;
}

GoldRecord gold_record_from_json(const json& j) {
  GoldRecord r;
  r.question.id = j.at("id").get<std::string>();
  r.question.text = j.at("question").get<std::string>();
  r.question.category = j.at("category").get<std::string>();
  r.question.answer_kind =
      answer_kind_from_name(j.at("answer_kind").get<std::string>());
  if (j.contains("choices")) {
    for (const auto& c : j.at("choices")) {
      r.question.choices.push_back(
          {c.at(0).get<std::string>(), c.at(1).get<std::string>()});
    }
  }
  r.gold_steps = j.at("gold_steps").get<std::vector<std::string>>();
  r.gold_answer = answer_value_from_json(j.at("gold_answer"));
  if (j.contains("gold_subquestions") && !j["gold_subquestions"].is_null()) {
    SubproblemPlan plan;
    plan.subquestions =
        j.at("gold_subquestions").get<std::vector<std::string>>();
    plan.source = PlanSource::Gold;
    r.gold_subquestions = std::move(plan);
  }
  const auto violations = validate_gold_record(r);
  if (!violations.empty()) {
    std::string msg = "invalid gold record " + r.question.id + ":";
    for (const auto& v : violations) msg += " " + v + ";";
    throw IoError(msg);
  }
  return r;
}

json to_json(const EpisodeTranscript& t) {
  json j;
  j["v"] = kSchemaVersion;
  j["question_ref"] = t.question_ref;
  j["mode"] = std::string(pipeline_mode_name(t.mode));
  j["initial"] = to_json(t.initial);
  j["plan"] = to_json(t.plan);
  json subs = json::array();
  for (const auto& r : t.sub_answers) subs.push_back(to_json(r));
  j["sub_answers"] = subs;
  j["final"] = to_json(t.final);
  j["prompts"] = t.prompts;
  return j;
}

EpisodeTranscript transcript_from_json(const json& j) {
  EpisodeTranscript t;
  t.question_ref = j.at("question_ref").get<std::string>();
  t.mode = pipeline_mode_from_name(j.at("mode").get<std::string>());
  t.initial = solver_response_from_json(j.at("initial"));
  t.plan = subproblem_plan_from_json(j.at("plan"));
  for (const auto& r : j.at("sub_answers"))
    t.sub_answers.push_back(solver_response_from_json(r));
  t.final = solver_response_from_json(j.at("final"));
  t.prompts = j.at("prompts").get<std::vector<std::string>>();
  return t;
}

json to_json(const reward::RewardBreakdown& b) {
  json j;
  j["v"] = kSchemaVersion;
  if (b.question_ref) j["question_ref"] = *b.question_ref;
  j["r1"] = b.r1;
  j["r2"] = b.r2;
  j["r3"] = b.r3;
  j["r4"] = b.r4;
  j["r5"] = b.r5;
  j["total"] = b.total;
  json details;
  details["subquestion_entities"] = b.subquestion_entities;
  details["question_entities"] = b.question_entities;
  json terms = json::array();
  for (const auto& t : b.consistency_terms) {
    terms.push_back(json{{"subquestion", t.subquestion},
                         {"asked", t.asked_entity},
                         {"answered", t.answered_entity},
                         {"indicator", t.indicator},
                         {"cosine", t.cosine}});
  }
  details["consistency_terms"] = terms;
  details["model_ops"] = ops_to_json(b.model_ops);
  details["gold_ops"] = ops_to_json(b.gold_ops);
  details["ops_matched_in_order"] = b.ops_matched_in_order;
  details["gold_op_count"] = b.gold_op_count;
  json alignments = json::array();
  for (const auto& a : b.alignments) {
    alignments.push_back(json{{"index", a.index},
                              {"c1", a.c1},
                              {"c2", a.c2},
                              {"contribution", a.contribution}});
  }
  details["alignments"] = alignments;
  j["details"] = details;
  return j;
}

reward::RewardBreakdown reward_breakdown_from_json(const json& j) {
  reward::RewardBreakdown b;
  if (j.contains("question_ref"))
    b.question_ref = j.at("question_ref").get<std::string>();
  b.r1 = j.at("r1").get<double>();
  b.r2 = j.at("r2").get<double>();
  b.r3 = j.at("r3").get<double>();
  b.r4 = j.at("r4").get<double>();
  b.r5 = j.at("r5").get<double>();
  b.total = j.at("total").get<double>();
  const json& d = j.at("details");
  b.subquestion_entities = d.at("subquestion_entities").get<size_t>();
  b.question_entities = d.at("question_entities").get<size_t>();
  for (const auto& t : d.at("consistency_terms")) {
    reward::ConsistencyTerm term;
    term.subquestion = t.at("subquestion").get<std::string>();
    term.asked_entity = t.at("asked").get<std::string>();
    term.answered_entity = t.at("answered").get<std::string>();
    term.indicator = t.at("indicator").get<int>();
    term.cosine = t.at("cosine").get<double>();
    b.consistency_terms.push_back(std::move(term));
  }
  b.model_ops = ops_from_json(d.at("model_ops"));
  b.gold_ops = ops_from_json(d.at("gold_ops"));
  b.ops_matched_in_order = d.at("ops_matched_in_order").get<size_t>();
  b.gold_op_count = d.at("gold_op_count").get<size_t>();
  for (const auto& a : d.at("alignments")) {
    reward::StepAlignment align;
    align.index = a.at("index").get<size_t>();
    align.c1 = a.at("c1").get<double>();
    align.c2 = a.at("c2").get<double>();
    align.contribution = a.at("contribution").get<double>();
    b.alignments.push_back(align);
  }
  return b;
}

void write_text_file(const std::filesystem::path& path,
                     const std::string& content) {
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out << content;
    if (!out) throw IoError("write failed for " + path.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw IoError("cannot replace " + path.string() + ": " + ec.message());
  }
}

size_t write_jsonl_lines(const std::filesystem::path& path,
                         const std::vector<std::string>& lines) {
  std::string content;
  for (const auto& line : lines) {
    content += line;
    content += '\n';
  }
  write_text_file(path, content);
  return lines.size();
}

std::vector<json> read_jsonl_objects(const std::filesystem::path& path,
                                     SchemaKind expected_kind) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<json> objects;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded())
      throw IoError("line " + std::to_string(line_no) + ": malformed JSON in " +
                    path.string());
    check_version(j, expected_kind, line_no);
    objects.push_back(std::move(j));
  }
  return objects;
}

template <typename Record>
size_t write_jsonl(const std::filesystem::path& path,
                   const std::vector<Record>& records) {
  std::vector<std::string> lines;
  lines.reserve(records.size());
  for (const auto& r : records) lines.push_back(to_json(r).dump());
  return write_jsonl_lines(path, lines);
}

namespace {

template <typename Record>
Record record_from_json(const json& j);

template <>
GoldRecord record_from_json<GoldRecord>(const json& j) {
  return gold_record_from_json(j);
}
template <>
EpisodeTranscript record_from_json<EpisodeTranscript>(const json& j) {
  return transcript_from_json(j);
}
template <>
reward::RewardBreakdown record_from_json<reward::RewardBreakdown>(
    const json& j) {
  return reward_breakdown_from_json(j);
}

}  // namespace

template <typename Record>
std::vector<Record> read_jsonl(const std::filesystem::path& path,
                               SchemaKind expected_kind) {
  const auto objects = read_jsonl_objects(path, expected_kind);
  std::vector<Record> records;
  records.reserve(objects.size());
  size_t line_no = 0;
  for (const auto& j : objects) {
    ++line_no;
    try {
      records.push_back(record_from_json<Record>(j));
    } catch (const SchemaVersionError&) {
      throw;
    } catch (const std::exception& e) {
      throw IoError("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return records;
}

template size_t write_jsonl<GoldRecord>(const std::filesystem::path&,
                                        const std::vector<GoldRecord>&);
template size_t write_jsonl<EpisodeTranscript>(
    const std::filesystem::path&, const std::vector<EpisodeTranscript>&);
template size_t write_jsonl<reward::RewardBreakdown>(
    const std::filesystem::path&, const std::vector<reward::RewardBreakdown>&);

template std::vector<GoldRecord> read_jsonl<GoldRecord>(
    const std::filesystem::path&, SchemaKind);
template std::vector<EpisodeTranscript> read_jsonl<EpisodeTranscript>(
    const std::filesystem::path&, SchemaKind);
template std::vector<reward::RewardBreakdown>
read_jsonl<reward::RewardBreakdown>(const std::filesystem::path&, SchemaKind);

void save_checkpoint(const std::filesystem::path& path,
                     const rl::PpoState& state) {
  json j;
  j["v"] = kSchemaVersion;
  j["kind"] = std::string(schema_kind_name(SchemaKind::Checkpoint));
  j["vocab"] = state.policy.vocab;
  j["eos_index"] = state.policy.eos_index;
  j["feature_dim"] = state.policy.feature_dim;
  j["params"] = state.policy.params;
  j["value_head"] = state.policy.value_head;
  j["beta"] = state.beta;
  j["iteration"] = state.iteration;
  j["rng"] = state.rng_state;
  write_text_file(path, j.dump(2) + "\n");
}

rl::PpoState load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded()) throw IoError("malformed checkpoint: " + path.string());
  check_version(j, SchemaKind::Checkpoint, 1);
  rl::PpoState state;
  state.policy.vocab = j.at("vocab").get<std::vector<std::string>>();
  state.policy.eos_index = j.at("eos_index").get<size_t>();
  state.policy.feature_dim = j.at("feature_dim").get<size_t>();
  state.policy.params = j.at("params").get<std::vector<double>>();
  state.policy.value_head = j.at("value_head").get<std::vector<double>>();
  state.beta = j.at("beta").get<double>();
  state.iteration = j.at("iteration").get<int>();
  state.rng_state = j.at("rng").get<std::string>();
  return state;
}

}  // namespace daslam::io
