// Acceptance suite: one pass/fail line per criterion, nonzero exit when any
// criterion fails. Run via `ctest -R acceptance` or directly.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "daslam/eval_harness.hpp"
#include "daslam/orchestrator.hpp"
#include "daslam/persistence.hpp"
#include "daslam/reward.hpp"
#include "daslam/rl_trainer.hpp"
#include "daslam/text_analysis.hpp"
#include "fixtures.hpp"

using namespace daslam;

namespace {

const std::string kDataDir = DASLAM_TEST_DATA_DIR;

struct Check {
  std::string name;
  double budget_seconds;
  std::function<std::string()> body;  // returns detail text, throws on failure
};

struct Failure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void require(bool condition, const std::string& message) {
  if (!condition) throw Failure(message);
}

void require_close(double actual, double expected, double tol,
                   const std::string& label) {
  if (std::abs(actual - expected) > tol) {
    std::ostringstream msg;
    msg.precision(17);
    msg << label << ": got " << actual << ", expected " << expected
        << " (tol " << tol << ")";
    throw Failure(msg.str());
  }
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), "missing file: " + path);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

// --- criterion bodies -------------------------------------------------------

std::string reward_oracle_appendix_b() {
  const auto lexicon = testfix::painter_lexicon();

  // R1 from the painter entity sets.
  const auto eq = text::extract_entities(testfix::painter_question(), lexicon);
  std::string concat;
  for (const auto& sq : testfix::painter_subquestions()) concat += sq + " ";
  const auto eq_prime = text::extract_entities(concat, lexicon);
  require(eq.size() == 9, "question entity count != 9");
  require(eq_prime.size() == 5, "subquestion entity count != 5");
  const double r1 = reward::entity_coverage(eq_prime, eq);
  require_close(r1, 5.0 / 9.0, 1e-9, "R1");

  // R2 from the worked subquestion/answer pair with its given cosine.
  testfix::MapProvider provider;
  provider.set_anchor(testfix::painter_subquestions()[0]);
  provider.set_cosine_against_anchor(testfix::painter_first_answer(),
                                     0.70457435);
  const auto response = text::parse_solver_response(
      testfix::painter_first_answer(), AnswerKind::Numeric, {});
  const double r2 = reward::consistency(
      {{testfix::painter_subquestions()[0], response}}, provider, lexicon);
  require_close(r2, 1.70457435, 1e-9, "R2");

  // R3 from the given operation sequences.
  using text::Op;
  const text::OpSequence model = {Op::Sub, Op::Sub, Op::Add, Op::Sub, Op::Add};
  const text::OpSequence gold = {Op::Sub, Op::Sub, Op::Div, Op::Add};
  const auto match = reward::order_of_operations(model, gold);
  require(match.matched == 3, "R3 match count != 3");
  require_close(match.value, 0.75, 1e-9, "R3");

  // R4 from the five given cosine pairs.
  testfix::MapProvider step_provider;
  std::vector<std::string> gold_steps(5), final_steps(5), baseline(3);
  for (size_t j = 0; j < 5; ++j) {
    gold_steps[j] = "gold " + std::to_string(j);
    final_steps[j] = "final " + std::to_string(j);
    step_provider.set_anchor(gold_steps[j]);
    step_provider.set_cosine_against_anchor(final_steps[j], testfix::kC1[j]);
  }
  for (size_t j = 0; j < 3; ++j) {
    baseline[j] = "base " + std::to_string(j);
    step_provider.set_cosine_against_anchor(baseline[j], testfix::kC2[j]);
  }
  const auto [r4, alignments] =
      reward::cot_proximity(final_steps, baseline, gold_steps, step_provider);
  require_close(r4, 0.46187719, 1e-9, "R4");

  // R5 from the given wrong final answer.
  const int r5 = reward::final_correctness(AnswerValue::numeric("-1/12"),
                                           AnswerValue::numeric("1/18"));
  require(r5 == 0, "R5 != 0");

  std::ostringstream detail;
  detail.precision(10);
  detail << "R1=" << r1 << " R2=" << r2 << " R3=" << match.value
         << " R4=" << r4 << " R5=" << r5;
  return detail.str();
}

std::string r3_lcs_oracle() {
  std::mt19937_64 rng(2024);
  const text::Op alphabet[] = {text::Op::Add, text::Op::Sub, text::Op::Mul,
                               text::Op::Div, text::Op::Pow, text::Op::Root};
  for (int trial = 0; trial < 1000; ++trial) {
    text::OpSequence a(rng() % 9), b(rng() % 9);
    for (auto& op : a) op = alphabet[rng() % 6];
    for (auto& op : b) op = alphabet[rng() % 6];
    const size_t fast = reward::lcs_length(a, b);
    const size_t slow = testfix::lcs_brute_force(a, b);
    if (fast != slow) {
      throw Failure("trial " + std::to_string(trial) + ": lcs " +
                    std::to_string(fast) + " != oracle " +
                    std::to_string(slow));
    }
  }
  return "1000 random pairs, exact match";
}

std::string gae_oracle() {
  std::mt19937_64 rng(4096);
  auto rand01 = [&] { return static_cast<double>(rng() % 100001) / 100000.0; };
  double worst = 0.0;
  for (int trial = 0; trial < 500; ++trial) {
    rl::Trajectory traj;
    const size_t T = 1 + rng() % 10;
    for (size_t t = 0; t < T; ++t) {
      traj.states.push_back({1.0});
      traj.actions.push_back(0);
      traj.logprobs_policy.push_back(-1.0);
      traj.logprobs_ref.push_back(-1.0);
      traj.values.push_back(rand01() * 4.0 - 2.0);
      traj.rewards.push_back(rand01() * 4.0 - 2.0);
    }
    const double gamma = rand01();
    const double lambda = rand01();
    const auto fast = rl::gae_advantages(traj, gamma, lambda);

    // Literal double-indexed sum with V(s_T) = 0.
    for (size_t t = 0; t < T; ++t) {
      double acc = 0.0;
      double weight = 1.0;
      for (size_t i = 0; t + i < T; ++i) {
        const double v_next = (t + i + 1 < T) ? traj.values[t + i + 1] : 0.0;
        acc += weight *
               (traj.rewards[t + i] + gamma * v_next - traj.values[t + i]);
        weight *= gamma * lambda;
      }
      const double rel = std::abs(fast[t] - acc) /
                         std::max(1.0, std::abs(acc));
      worst = std::max(worst, rel);
      if (rel > 1e-10) {
        throw Failure("trial " + std::to_string(trial) + " step " +
                      std::to_string(t) + ": relative error " +
                      std::to_string(rel));
      }
    }
  }
  std::ostringstream detail;
  detail << "500 trajectories, worst rel err " << worst;
  return detail.str();
}

std::string gradient_checks() {
  std::mt19937_64 rng(777);
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    // Small random vocab and fresh policies each trial.
    std::vector<std::string> vocab = {"<eos>"};
    const size_t extra = 2 + rng() % 3;
    for (size_t v = 0; v < extra; ++v)
      vocab.push_back("w" + std::to_string(v));
    rl::ToyPolicy policy = rl::ToyPolicy::init(vocab, rng());
    rl::ToyPolicy ref = rl::ToyPolicy::init(vocab, rng());

    // One synthetic record for the alignment objective.
    GoldRecord record;
    record.question.id = "g";
    record.question.text = vocab[1] + " " + vocab.back();
    record.question.category = "SYN";
    record.question.answer_kind = AnswerKind::Numeric;
    record.gold_steps = {vocab[1]};
    record.gold_answer = AnswerValue::numeric("1");
    SubproblemPlan plan;
    plan.subquestions = {vocab[1] + " " + vocab.back()};
    plan.source = PlanSource::Gold;
    record.gold_subquestions = plan;
    const std::vector<GoldRecord> gold = {record};

    const double h = 1e-6;
    {
      const auto analytic = rl::sft_nll_gradient(policy, gold);
      for (size_t i = 0; i < policy.params.size(); ++i) {
        rl::ToyPolicy plus = policy, minus = policy;
        plus.params[i] += h;
        minus.params[i] -= h;
        const double numeric =
            (rl::sft_nll(plus, gold) - rl::sft_nll(minus, gold)) / (2 * h);
        const double rel =
            std::abs(analytic[i] - numeric) /
            std::max({std::abs(analytic[i]), std::abs(numeric), 1e-8});
        worst = std::max(worst, rel);
        if (rel > 1e-4)
          throw Failure("sft gradient trial " + std::to_string(trial) +
                        " param " + std::to_string(i) + ": rel err " +
                        std::to_string(rel));
      }
    }
    {
      rl::SyntheticSequenceEnv env(vocab[1] + " " + vocab.back(), {1});
      std::mt19937_64 roll_rng(trial);
      std::vector<rl::Trajectory> batch;
      std::vector<std::vector<double>> advantages;
      for (int e = 0; e < 2; ++e) {
        batch.push_back(rl::rollout(policy, ref, env, roll_rng, 4));
        advantages.push_back(rl::gae_advantages(batch.back(), 1.0, 0.95));
      }
      const double beta = 0.07;
      const auto grad =
          rl::ppo_objective_gradient(batch, advantages, policy, ref, beta);
      for (size_t i = 0; i < policy.params.size(); ++i) {
        rl::ToyPolicy plus = policy, minus = policy;
        plus.params[i] += h;
        minus.params[i] -= h;
        const double up =
            rl::ppo_objective(batch, advantages, plus, ref, beta).objective;
        const double down =
            rl::ppo_objective(batch, advantages, minus, ref, beta).objective;
        const double numeric = (up - down) / (2 * h);
        const double rel =
            std::abs(grad.d_params[i] - numeric) /
            std::max({std::abs(grad.d_params[i]), std::abs(numeric), 1e-8});
        worst = std::max(worst, rel);
        if (rel > 1e-4)
          throw Failure("objective gradient trial " + std::to_string(trial) +
                        " param " + std::to_string(i) + ": rel err " +
                        std::to_string(rel));
      }
    }
  }
  std::ostringstream detail;
  detail << "50 policies, worst rel err " << worst;
  return detail.str();
}

std::string ppo_learning() {
  const std::vector<std::string> vocab = {"<eos>", "how",    "many",
                                          "workers", "are",  "needed",
                                          "?"};
  rl::SyntheticSequenceEnv env("how many workers are needed ?", {1, 2});

  rl::PpoConfig cfg;  // batch 8, accumulation 8, kl coef 0.01, target 4
  cfg.iterations = 200;
  cfg.seed = 0;
  cfg.learning_rate = 1.0;
  cfg.value_learning_rate = 0.02;
  cfg.max_episode_len = 2;

  rl::PpoState state;
  state.policy = rl::ToyPolicy::init(vocab, 123);
  state.beta = cfg.kl_coef_init;
  const rl::ToyPolicy ref = state.policy;

  const auto report = rl::train_ppo(state, ref, env, cfg);
  require(report.ppo.size() == 200, "expected 200 iterations");

  const double first = report.ppo.front().mean_reward;
  const double last = report.ppo.back().mean_reward;
  const double optimum = env.known_optimum();
  const double needed = first + 0.5 * (optimum - first);
  require(last >= needed, "final mean reward " + std::to_string(last) +
                              " below required " + std::to_string(needed));

  double max_kl = 0.0;
  for (size_t i = 50; i < report.ppo.size(); ++i)
    max_kl = std::max(max_kl, report.ppo[i].mean_kl);
  require(max_kl <= 5.0 * cfg.kl_target,
          "mean KL " + std::to_string(max_kl) + " exceeded 5x target");

  std::ostringstream detail;
  detail.precision(4);
  detail << "reward " << first << " -> " << last << " (optimum " << optimum
         << "), max KL after iter 50 = " << max_kl;
  return detail.str();
}

std::string pipeline_golden() {
  pipeline::PipelineConfig cfg;
  cfg.mode = PipelineMode::Daslam;
  pipeline::ReplayClient solver(testfix::golden_solver_script());
  pipeline::ReplayClient decomposer(testfix::golden_decomposer_script());
  const auto t = pipeline::run_episode(cfg, solver, &decomposer,
                                       testfix::golden_question());

  const size_t n = t.plan.subquestions.size();
  require(n >= 1, "no subquestions");
  require(solver.calls_made() == 2 + n,
          "solver calls " + std::to_string(solver.calls_made()) + " != 2+n");
  require(decomposer.calls_made() == 1, "decomposer calls != 1");

  const auto tmp = std::filesystem::temp_directory_path() /
                   "daslam_acceptance_transcript.jsonl";
  io::write_jsonl<EpisodeTranscript>(tmp, {t});
  const std::string produced = read_file(tmp.string());
  std::filesystem::remove(tmp);
  const std::string golden = read_file(kDataDir + "/golden_transcript.jsonl");
  require(produced == golden, "transcript differs from the committed golden");
  return "byte-identical transcript, 2+" + std::to_string(n) +
         " solver calls, 1 decomposer call";
}

std::string mode_contrast() {
  const Question q = testfix::golden_question();
  pipeline::PipelineConfig daslam_cfg;
  daslam_cfg.mode = PipelineMode::Daslam;
  pipeline::PipelineConfig nf_cfg;
  nf_cfg.mode = PipelineMode::DaslamNF;

  pipeline::ReplayClient s1(testfix::golden_solver_script());
  pipeline::ReplayClient d1(testfix::golden_decomposer_script());
  pipeline::ReplayClient s2(testfix::golden_solver_script());
  pipeline::ReplayClient d2(testfix::golden_decomposer_script());

  const auto with = pipeline::run_episode(daslam_cfg, s1, &d1, q);
  const auto without = pipeline::run_episode(nf_cfg, s2, &d2, q);

  const std::string& feedback_prompt = with.prompts.at(1);
  const std::string& nf_prompt = without.prompts.at(1);
  const std::string block = pipeline::initial_response_block(with.initial);

  const size_t pos = feedback_prompt.find(block);
  require(pos != std::string::npos,
          "initial-response block not found in the feedback prompt");
  std::string stripped = feedback_prompt;
  stripped.erase(pos, block.size());
  require(stripped == nf_prompt,
          "prompts differ by more than the initial-response block");
  require(nf_prompt.find(with.initial.steps.front()) == std::string::npos,
          "no-feedback prompt leaks the initial response");
  return "decomposer prompts differ exactly by the initial-response block";
}

std::string eval_arithmetic() {
  const auto dataset = io::read_jsonl<GoldRecord>(
      kDataDir + "/eval20_dataset.jsonl", io::SchemaKind::Dataset);
  require(dataset.size() == 20, "expected 20 items");

  std::map<std::string, std::vector<std::string>> scripts;
  for (const auto& j : io::read_jsonl_objects(kDataDir + "/eval20_replay.jsonl",
                                              io::SchemaKind::Dataset)) {
    scripts[j.at("id").get<std::string>()] =
        j.at("solver").get<std::vector<std::string>>();
  }

  pipeline::PipelineConfig cfg;
  cfg.mode = PipelineMode::CotOnly;
  const auto result = eval::run_eval(
      dataset, cfg,
      [&](const GoldRecord& record) -> eval::ClientPair {
        eval::ClientPair pair;
        pair.solver = std::make_shared<pipeline::ReplayClient>(
            scripts.at(record.question.id));
        return pair;
      });

  const auto& stats = result.per_category.at("AQuA");
  require(stats.n == 20, "category size != 20");
  require(stats.correct == 13, "correct count " +
                                   std::to_string(stats.correct) + " != 13");
  require_close(stats.accuracy_percent(), 65.0, 1e-12, "accuracy");

  const auto report = eval::render_report({result});
  require(report.csv.find("AQuA,65.0") != std::string::npos,
          "rendered accuracy is not 65.0");
  return "13/20 correct, reported 65.0";
}

std::string non_reproducibility() {
  std::puts(
      "  note: headline benchmark accuracies from the source evaluation "
      "(e.g. AQuA 54.5 vs 41.6 chain-of-thought) required proprietary "
      "175B-class solver APIs plus 13B-parameter fine-tuning and are NOT "
      "reproduced here; this suite validates the mechanics on deterministic "
      "fixtures instead.");
  if (std::getenv("DASLAM_LIVE_SMOKE") == nullptr) {
    return "statement printed; live smoke test disabled (set "
           "DASLAM_LIVE_SMOKE=1 and DASLAM_SOLVER_ENDPOINT to enable)";
  }
  const char* endpoint = std::getenv("DASLAM_SOLVER_ENDPOINT");
  require(endpoint != nullptr,
          "DASLAM_LIVE_SMOKE set but DASLAM_SOLVER_ENDPOINT missing");

  pipeline::HttpClientConfig http;
  http.endpoint = endpoint;
  http.model_name = "solver";
  pipeline::HttpCompletionClient solver(http);
  pipeline::PipelineConfig cfg;
  cfg.mode = PipelineMode::CotOnly;

  const auto dataset = io::read_jsonl<GoldRecord>(
      kDataDir + "/eval20_dataset.jsonl", io::SchemaKind::Dataset);
  size_t items = 0;
  for (const auto& record : dataset) {
    if (items == 5) break;
    const auto t = pipeline::run_episode(cfg, solver, nullptr, record.question);
    require(t.question_ref == record.question.id, "transcript id mismatch");
    require(t.prompts.size() == 1, "transcript prompt count mismatch");
    require(!t.final.raw_text.empty() || t.final.steps.empty(),
            "inconsistent final response");
    ++items;
  }
  return "live smoke: " + std::to_string(items) + " transcripts well-formed";
}

}  // namespace

int main() {
  const std::vector<Check> checks = {
      {"reward_oracle_appendix_b", 1.0, reward_oracle_appendix_b},
      {"r3_lcs_brute_force_equivalence", 10.0, r3_lcs_oracle},
      {"gae_double_sum_equivalence", 5.0, gae_oracle},
      {"gradient_finite_difference_checks", 30.0, gradient_checks},
      {"ppo_learning_on_synthetic_env", 120.0, ppo_learning},
      {"pipeline_golden_transcript", 1.0, pipeline_golden},
      {"mode_contrast_decomposer_prompts", 1.0, mode_contrast},
      {"eval_accuracy_arithmetic", 5.0, eval_arithmetic},
      {"non_reproducibility_statement", 30.0, non_reproducibility},
  };

  int failures = 0;
  for (const auto& check : checks) {
    const auto start = std::chrono::steady_clock::now();
    std::string detail;
    std::string error;
    try {
      detail = check.body();
    } catch (const std::exception& e) {
      error = e.what();
    }
    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
            .count();
    if (error.empty() && elapsed > check.budget_seconds)
      error = "exceeded the " + std::to_string(check.budget_seconds) +
              " s budget";
    if (error.empty()) {
      std::printf("[PASS] %s (%.3f s) %s\n", check.name.c_str(), elapsed,
                  detail.empty() ? "" : ("- " + detail).c_str());
    } else {
      std::printf("[FAIL] %s (%.3f s) - %s\n", check.name.c_str(), elapsed,
                  error.c_str());
      ++failures;
    }
  }
  if (failures > 0) {
    std::printf("%d criterion(s) failed\n", failures);
    return 1;
  }
  std::printf("all %zu criteria passed\n", checks.size());
  return 0;
}
