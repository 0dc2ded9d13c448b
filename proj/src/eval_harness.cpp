#include "daslam/eval_harness.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <set>
#include <stdexcept>
#include <thread>

#include "daslam/reward.hpp"

namespace daslam::eval {
namespace {

std::string format_accuracy(double percent) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.1f", percent);
  return buf;
}

const PipelineMode kModeOrder[] = {PipelineMode::CotOnly,
                                   PipelineMode::DaslamNF,
                                   PipelineMode::Daslam};

}  // namespace

bool score_item(const AnswerValue& predicted, const AnswerValue& gold) {
  return reward::final_correctness(predicted, gold) == 1;
}

EvalResult run_eval(const std::vector<GoldRecord>& dataset,
                    const pipeline::PipelineConfig& cfg,
                    const ClientSource& clients,
                    std::vector<EpisodeTranscript>* transcripts,
                    int parallelism) {
  if (dataset.empty()) throw std::invalid_argument("empty dataset");

  EvalResult result;
  result.mode = cfg.mode;
  result.per_item.resize(dataset.size());
  std::vector<EpisodeTranscript> collected(dataset.size());

  auto evaluate_item = [&](size_t index) {
    const GoldRecord& record = dataset[index];
    PerItemResult item;
    item.id = record.question.id;
    item.mode = cfg.mode;
    item.gold = record.gold_answer;
    try {
      ClientPair pair = clients(record);
      EpisodeTranscript t = pipeline::run_episode(
          cfg, *pair.solver, pair.decomposer.get(), record.question,
          &record.gold_answer);
      item.predicted = t.final.answer;
      item.correct = score_item(item.predicted, item.gold);
      collected[index] = std::move(t);
    } catch (const pipeline::PipelineError& e) {
      item.predicted = AnswerValue::unparsed("");
      item.correct = false;
      item.error = e.what();
      collected[index] = e.partial;
    }
    result.per_item[index] = std::move(item);
  };

  if (parallelism <= 1) {
    for (size_t i = 0; i < dataset.size(); ++i) evaluate_item(i);
  } else {
    std::atomic<size_t> next{0};
    auto worker = [&] {
      for (;;) {
        const size_t i = next.fetch_add(1);
        if (i >= dataset.size()) return;
        evaluate_item(i);
      }
    };
    std::vector<std::thread> threads;
    const size_t n = std::min<size_t>(parallelism, dataset.size());
    threads.reserve(n);
    for (size_t i = 0; i < n; ++i) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
  }

  // Single-threaded reduction in dataset order.
  for (size_t i = 0; i < dataset.size(); ++i) {
    auto& stats = result.per_category[dataset[i].question.category];
    ++stats.n;
    if (result.per_item[i].correct) ++stats.correct;
  }
  if (transcripts) {
    for (auto& t : collected) transcripts->push_back(std::move(t));
  }
  return result;
}

Report render_report(const std::vector<EvalResult>& results) {
  if (results.empty()) throw std::invalid_argument("no results to render");

  // All results must be over the same items.
  std::vector<std::string> reference_ids;
  for (const auto& item : results.front().per_item)
    reference_ids.push_back(item.id);
  std::sort(reference_ids.begin(), reference_ids.end());
  for (const auto& r : results) {
    std::vector<std::string> ids;
    for (const auto& item : r.per_item) ids.push_back(item.id);
    std::sort(ids.begin(), ids.end());
    if (ids != reference_ids)
      throw std::invalid_argument("results cover different datasets");
  }

  std::vector<const EvalResult*> ordered;
  for (PipelineMode mode : kModeOrder) {
    for (const auto& r : results) {
      if (r.mode == mode) ordered.push_back(&r);
    }
  }

  std::set<std::string> categories;
  for (const auto& r : results) {
    for (const auto& [cat, stats] : r.per_category) categories.insert(cat);
  }

  size_t cat_width = 8;
  for (const auto& c : categories) cat_width = std::max(cat_width, c.size());

  std::string table;
  std::string csv = "category";
  table += "category" + std::string(cat_width - 8, ' ');
  for (const auto* r : ordered) {
    const std::string name(pipeline_mode_name(r->mode));
    csv += "," + name;
    table += "  " + std::string(name.size() < 9 ? 9 - name.size() : 0, ' ') +
             name;
  }
  table += "\n";
  csv += "\n";

  for (const auto& cat : categories) {
    table += cat + std::string(cat_width - cat.size(), ' ');
    csv += cat;
    for (const auto* r : ordered) {
      auto it = r->per_category.find(cat);
      const std::string cell =
          it == r->per_category.end()
              ? std::string("-")
              : format_accuracy(it->second.accuracy_percent());
      const size_t width = std::max<size_t>(
          9, std::string(pipeline_mode_name(r->mode)).size());
      table += "  " + std::string(width > cell.size() ? width - cell.size() : 0,
                                  ' ') +
               cell;
      csv += "," + (it == r->per_category.end() ? std::string() : cell);
    }
    table += "\n";
    csv += "\n";
  }
  return {table, csv};
}

}  // namespace daslam::eval
