#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <random>

#include "daslam/eval_harness.hpp"
#include "daslam/persistence.hpp"
#include "fixtures.hpp"

using namespace daslam;
using namespace daslam::eval;

namespace {

const std::string kDataDir = DASLAM_TEST_DATA_DIR;

bool regen_goldens() { return std::getenv("DASLAM_REGEN_GOLDEN") != nullptr; }

// Numeric items answered by single-line replay scripts; `correct` of them
// match their gold answer.
std::vector<GoldRecord> replay_dataset(size_t n, size_t correct,
                                       const std::string& category) {
  std::vector<GoldRecord> records;
  for (size_t i = 0; i < n; ++i) {
    GoldRecord r;
    r.question.id = category + "-" + std::to_string(i);
    r.question.text = "What is " + std::to_string(i) + " plus " +
                      std::to_string(i) + "?";
    r.question.category = category;
    r.question.answer_kind = AnswerKind::Numeric;
    r.gold_steps = {"double it"};
    r.gold_answer = AnswerValue::numeric(std::to_string(2 * i));
    records.push_back(std::move(r));
  }
  (void)correct;
  return records;
}

ClientSource scripted_answers(size_t correct) {
  return [correct](const GoldRecord& record) -> ClientPair {
    const size_t index = static_cast<size_t>(
        std::stoul(record.question.id.substr(record.question.id.find('-') + 1)));
    const std::string gold = record.gold_answer.literal();
    const std::string reply =
        index < correct ? "Answer: " + gold : "Answer: 999999";
    ClientPair pair;
    pair.solver = std::make_shared<pipeline::ReplayClient>(
        std::vector<std::string>{reply});
    return pair;
  };
}

}  // namespace

TEST_CASE("score_item") {
  CHECK(score_item(AnswerValue::choice("B"), AnswerValue::choice("B")));
  CHECK_FALSE(score_item(AnswerValue::unparsed("anything"),
                         AnswerValue::numeric("1")));
  CHECK(score_item(AnswerValue::numeric("240"), AnswerValue::numeric("240")));
  // Symmetric.
  CHECK(score_item(AnswerValue::numeric("0.5"), AnswerValue::numeric("1/2")));
  CHECK(score_item(AnswerValue::numeric("1/2"), AnswerValue::numeric("0.5")));
}

TEST_CASE("run_eval") {
  pipeline::PipelineConfig cfg;
  cfg.mode = PipelineMode::CotOnly;

  SUBCASE("four items with three correct") {
    const auto dataset = replay_dataset(4, 3, "ALG");
    const auto result = run_eval(dataset, cfg, scripted_answers(3));
    REQUIRE(result.per_category.count("ALG") == 1);
    CHECK(result.per_category.at("ALG").n == 4);
    CHECK(result.per_category.at("ALG").correct == 3);
    CHECK(result.per_category.at("ALG").accuracy_percent() ==
          doctest::Approx(75.0));
  }

  SUBCASE("empty dataset rejected") {
    CHECK_THROWS_WITH_AS(run_eval({}, cfg, scripted_answers(0)),
                         doctest::Contains("empty dataset"),
                         std::invalid_argument);
  }

  SUBCASE("pipeline failures count as incorrect and the run continues") {
    const auto dataset = replay_dataset(3, 3, "NT");
    ClientSource clients = [](const GoldRecord& record) -> ClientPair {
      ClientPair pair;
      if (record.question.id == "NT-1") {
        pair.solver = std::make_shared<pipeline::ReplayClient>(
            std::vector<std::string>{});  // exhausted immediately
      } else {
        pair.solver = std::make_shared<pipeline::ReplayClient>(
            std::vector<std::string>{"Answer: " +
                                     record.gold_answer.literal()});
      }
      return pair;
    };
    const auto result = run_eval(dataset, cfg, clients);
    CHECK(result.per_category.at("NT").n == 3);
    CHECK(result.per_category.at("NT").correct == 2);
    REQUIRE(result.per_item.size() == 3);
    CHECK(result.per_item[1].error.has_value());
    CHECK_FALSE(result.per_item[0].error.has_value());
  }

  SUBCASE("paired runs align item ids one to one") {
    const auto dataset = replay_dataset(4, 2, "AQuA");
    const auto a = run_eval(dataset, cfg, scripted_answers(2));
    const auto b = run_eval(dataset, cfg, scripted_answers(4));
    REQUIRE(a.per_item.size() == b.per_item.size());
    for (size_t i = 0; i < a.per_item.size(); ++i)
      CHECK(a.per_item[i].id == b.per_item[i].id);
  }

  SUBCASE("dataset order does not change category accuracy") {
    auto dataset = replay_dataset(6, 4, "Geom");
    const auto before = run_eval(dataset, cfg, scripted_answers(4));
    std::mt19937_64 rng(3);
    std::shuffle(dataset.begin(), dataset.end(), rng);
    const auto after = run_eval(dataset, cfg, scripted_answers(4));
    CHECK(before.per_category.at("Geom").accuracy_percent() ==
          after.per_category.at("Geom").accuracy_percent());
  }

  SUBCASE("aggregation conserves the dataset size") {
    auto dataset = replay_dataset(5, 5, "PnC");
    auto more = replay_dataset(3, 3, "Calc");
    dataset.insert(dataset.end(), more.begin(), more.end());
    const auto result = run_eval(dataset, cfg, scripted_answers(99));
    size_t total = 0;
    for (const auto& [cat, stats] : result.per_category) total += stats.n;
    CHECK(total == dataset.size());
  }

  SUBCASE("parallel evaluation matches sequential") {
    const auto dataset = replay_dataset(12, 7, "ALG");
    const auto seq = run_eval(dataset, cfg, scripted_answers(7));
    std::vector<EpisodeTranscript> transcripts;
    const auto par =
        run_eval(dataset, cfg, scripted_answers(7), &transcripts, 4);
    CHECK(par.per_category.at("ALG").correct ==
          seq.per_category.at("ALG").correct);
    CHECK(transcripts.size() == dataset.size());
    for (size_t i = 0; i < dataset.size(); ++i)
      CHECK(transcripts[i].question_ref == dataset[i].question.id);
  }

  SUBCASE("transcripts are collected in dataset order") {
    const auto dataset = replay_dataset(4, 4, "NT");
    std::vector<EpisodeTranscript> transcripts;
    run_eval(dataset, cfg, scripted_answers(4), &transcripts);
    REQUIRE(transcripts.size() == 4);
    for (size_t i = 0; i < 4; ++i)
      CHECK(transcripts[i].question_ref == dataset[i].question.id);
  }
}

TEST_CASE("render_report") {
  pipeline::PipelineConfig cot;
  cot.mode = PipelineMode::CotOnly;

  SUBCASE("single cell") {
    const auto dataset = replay_dataset(2, 1, "ALG");
    const auto result = run_eval(dataset, cot, scripted_answers(1));
    const auto report = render_report({result});
    CHECK(report.csv == "category,cot_only\nALG,50.0\n");
    CHECK(report.table.find("50.0") != std::string::npos);
  }

  SUBCASE("columns follow the fixed mode order") {
    const auto dataset = replay_dataset(2, 2, "NT");
    auto r1 = run_eval(dataset, cot, scripted_answers(2));
    auto r2 = r1;
    r2.mode = PipelineMode::Daslam;
    for (auto& item : r2.per_item) item.mode = PipelineMode::Daslam;
    // Pass results out of order; the report reorders them.
    const auto report = render_report({r2, r1});
    CHECK(report.csv.rfind("category,cot_only,daslam\n", 0) == 0);
  }

  SUBCASE("mismatched datasets rejected") {
    const auto a = run_eval(replay_dataset(2, 1, "A"), cot, scripted_answers(1));
    const auto b = run_eval(replay_dataset(3, 1, "B"), cot, scripted_answers(1));
    CHECK_THROWS_WITH_AS(render_report({a, b}),
                         doctest::Contains("different datasets"),
                         std::invalid_argument);
  }

  SUBCASE("golden report") {
    auto dataset = replay_dataset(4, 2, "ALG");
    auto more = replay_dataset(2, 1, "NT");
    dataset.insert(dataset.end(), more.begin(), more.end());
    const auto result = run_eval(dataset, cot, scripted_answers(2));
    const auto report = render_report({result});

    const std::string golden_csv = kDataDir + "/golden_eval_report.csv";
    const std::string golden_txt = kDataDir + "/golden_eval_report.txt";
    if (regen_goldens()) {
      io::write_text_file(golden_csv, report.csv);
      io::write_text_file(golden_txt, report.table);
    }
    auto read_file = [](const std::string& path) {
      std::ifstream in(path, std::ios::binary);
      REQUIRE_MESSAGE(in.good(), "missing golden: " << path);
      return std::string(std::istreambuf_iterator<char>(in), {});
    };
    CHECK(report.csv == read_file(golden_csv));
    CHECK(report.table == read_file(golden_txt));
  }
}
