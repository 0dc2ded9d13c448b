#include "daslam/rl_trainer.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>
#include <stdexcept>

namespace daslam::rl {
namespace {

// Portable draws: identical streams for a given seed on every platform,
// unlike the std distribution objects.
double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

std::vector<std::string> whitespace_tokens(const std::string& s) {
  std::istringstream in(s);
  std::vector<std::string> tokens;
  std::string tok;
  while (in >> tok) tokens.push_back(tok);
  return tokens;
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

std::vector<double> returns_from_rewards(const Trajectory& traj,
                                         double gamma) {
  std::vector<double> out(traj.length(), 0.0);
  double g = 0.0;
  for (size_t t = traj.length(); t-- > 0;) {
    g = traj.rewards[t] + gamma * g;
    out[t] = g;
  }
  return out;
}

struct SftSequence {
  std::vector<double> bow;
  std::vector<size_t> actions;  // subquestion tokens then end-of-sequence
};

std::vector<SftSequence> encode_sft(const ToyPolicy& policy,
                                    const std::vector<GoldRecord>& gold) {
  std::vector<SftSequence> sequences;
  for (const auto& record : gold) {
    if (!record.gold_subquestions) continue;
    SftSequence seq;
    std::string context = record.question.text;
    for (const auto& step : record.gold_steps) context += "\n" + step;
    seq.bow = policy.context_bow(context);
    for (const auto& sq : record.gold_subquestions->subquestions) {
      for (const auto& tok : whitespace_tokens(sq))
        seq.actions.push_back(policy.token_index(tok));
    }
    seq.actions.push_back(policy.eos_index);
    sequences.push_back(std::move(seq));
  }
  return sequences;
}

// Sum of -log p over a sequence plus the per-step gradient contribution
// (p - onehot(a)) outer f, accumulated into grad when non-null.
double sequence_nll(const ToyPolicy& policy, const SftSequence& seq,
                    std::vector<double>* grad) {
  double nll = 0.0;
  long prev = -1;
  for (size_t action : seq.actions) {
    const auto f = policy.features(seq.bow, prev);
    const auto p = policy.distribution(f);
    nll -= std::log(std::max(p[action], 1e-300));
    if (grad) {
      for (size_t v = 0; v < policy.vocab_size(); ++v) {
        double coeff = p[v] - (v == action ? 1.0 : 0.0);
        if (coeff == 0.0) continue;
        double* row = grad->data() + v * policy.feature_dim;
        for (size_t k = 0; k < policy.feature_dim; ++k)
          row[k] += coeff * f[k];
      }
    }
    prev = static_cast<long>(action);
  }
  return nll;
}

}  // namespace

ToyPolicy ToyPolicy::init(std::vector<std::string> vocab, uint64_t seed) {
  if (vocab.empty()) throw std::invalid_argument("vocab empty");
  ToyPolicy p;
  p.vocab = std::move(vocab);
  auto eos = std::find(p.vocab.begin(), p.vocab.end(), kEos);
  if (eos == p.vocab.end())
    throw std::invalid_argument("vocab missing end-of-sequence symbol");
  p.eos_index = static_cast<size_t>(eos - p.vocab.begin());
  p.feature_dim = 2 * p.vocab.size() + 1;
  std::mt19937_64 rng(seed);
  p.params.resize(p.vocab.size() * p.feature_dim);
  for (double& w : p.params) w = (uniform01(rng) - 0.5) * 0.02;
  p.value_head.resize(p.feature_dim);
  for (double& w : p.value_head) w = (uniform01(rng) - 0.5) * 0.02;
  return p;
}

size_t ToyPolicy::token_index(const std::string& token) const {
  auto it = std::find(vocab.begin(), vocab.end(), token);
  if (it == vocab.end())
    throw std::invalid_argument("token not in vocab: " + token);
  return static_cast<size_t>(it - vocab.begin());
}

std::vector<double> ToyPolicy::context_bow(const std::string& context) const {
  std::vector<double> bow(vocab.size(), 0.0);
  for (const auto& tok : whitespace_tokens(context)) {
    auto it = std::find(vocab.begin(), vocab.end(), tok);
    if (it != vocab.end()) bow[static_cast<size_t>(it - vocab.begin())] += 1.0;
  }
  return bow;
}

std::vector<double> ToyPolicy::features(const std::vector<double>& bow,
                                        long prev_action) const {
  std::vector<double> f(feature_dim, 0.0);
  std::copy(bow.begin(), bow.end(), f.begin());
  if (prev_action >= 0)
    f[vocab.size() + static_cast<size_t>(prev_action)] = 1.0;
  f[feature_dim - 1] = 1.0;  // bias
  return f;
}

std::vector<double> ToyPolicy::logits(const std::vector<double>& f) const {
  std::vector<double> out(vocab.size(), 0.0);
  for (size_t v = 0; v < vocab.size(); ++v) {
    const double* row = params.data() + v * feature_dim;
    double s = 0.0;
    for (size_t k = 0; k < feature_dim; ++k) s += row[k] * f[k];
    out[v] = s;
  }
  return out;
}

std::vector<double> ToyPolicy::distribution(const std::vector<double>& f) const {
  auto z = logits(f);
  double zmax = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (double& x : z) {
    x = std::exp(x - zmax);
    sum += x;
  }
  for (double& x : z) x /= sum;
  return z;
}

double ToyPolicy::log_prob(const std::vector<double>& f, size_t action) const {
  auto z = logits(f);
  double zmax = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (double x : z) sum += std::exp(x - zmax);
  return z[action] - zmax - std::log(sum);
}

double ToyPolicy::value(const std::vector<double>& f) const {
  return dot(value_head, f);
}

std::vector<std::string> build_vocab(const std::vector<GoldRecord>& records) {
  std::set<std::string> tokens;
  for (const auto& record : records) {
    for (const auto& tok : whitespace_tokens(record.question.text))
      tokens.insert(tok);
    if (record.gold_subquestions) {
      for (const auto& sq : record.gold_subquestions->subquestions)
        for (const auto& tok : whitespace_tokens(sq)) tokens.insert(tok);
    }
  }
  std::vector<std::string> vocab;
  vocab.push_back(ToyPolicy::kEos);
  vocab.insert(vocab.end(), tokens.begin(), tokens.end());
  return vocab;
}

Trajectory assign_terminal_reward(Trajectory traj,
                                  const reward::RewardBreakdown& breakdown) {
  if (traj.length() == 0)
    throw std::logic_error("assign_terminal_reward: empty trajectory");
  for (double r : traj.rewards) {
    if (r != 0.0)
      throw std::logic_error("assign_terminal_reward: reward already assigned");
  }
  if (traj.terminal_reward != 0.0)
    throw std::logic_error("assign_terminal_reward: reward already assigned");
  traj.rewards.assign(traj.length(), 0.0);
  traj.rewards[traj.length() - 1] = breakdown.total;
  traj.terminal_reward = breakdown.total;
  return traj;
}

std::vector<double> gae_advantages(const Trajectory& traj, double gamma,
                                   double lambda) {
  const size_t T = traj.length();
  std::vector<double> advantages(T, 0.0);
  double carry = 0.0;
  for (size_t t = T; t-- > 0;) {
    const double v_next = (t + 1 < T) ? traj.values[t + 1] : 0.0;  // V(s_T)=0
    const double delta = traj.rewards[t] + gamma * v_next - traj.values[t];
    carry = delta + gamma * lambda * carry;
    advantages[t] = carry;
  }
  return advantages;
}

namespace {

struct ObjectiveAccumulator {
  double term_sum = 0.0;
  double kl_sum = 0.0;
  size_t steps = 0;
};

void accumulate_step(const ToyPolicy& policy, const ToyPolicy& ref,
                     const std::vector<double>& state, size_t action,
                     double ref_logprob, double advantage, double beta,
                     bool clip_ratio, double clip_epsilon,
                     ObjectiveAccumulator& acc, std::vector<double>* grad) {
  const double lp = policy.log_prob(state, action);
  if (std::isinf(ref_logprob) && !std::isinf(lp))
    throw std::domain_error("support mismatch");
  const double ratio = std::exp(lp - ref_logprob);
  if (!std::isfinite(ratio)) throw std::domain_error("support mismatch");

  double term = ratio * advantage;
  bool grad_through_ratio = true;
  if (clip_ratio) {
    const double clipped =
        std::clamp(ratio, 1.0 - clip_epsilon, 1.0 + clip_epsilon);
    const double clipped_term = clipped * advantage;
    if (clipped_term < term) {
      term = clipped_term;
      // Gradient flows through the clipped ratio only inside the bounds.
      grad_through_ratio =
          ratio > 1.0 - clip_epsilon && ratio < 1.0 + clip_epsilon;
    }
  }
  acc.term_sum += term;

  const auto p = policy.distribution(state);
  const auto q = ref.distribution(state);
  double kl = 0.0;
  for (size_t v = 0; v < p.size(); ++v) {
    if (q[v] > 0.0) kl += q[v] * (std::log(q[v]) - std::log(p[v]));
  }
  acc.kl_sum += std::max(kl, 0.0);
  ++acc.steps;

  if (grad) {
    // d(ratio * adv)/dW = adv * ratio * (onehot(a) - p) f^T
    // d(KL)/dW = (p - q) f^T
    for (size_t v = 0; v < policy.vocab_size(); ++v) {
      double coeff = 0.0;
      if (grad_through_ratio)
        coeff += advantage * ratio * ((v == action ? 1.0 : 0.0) - p[v]);
      coeff -= beta * (p[v] - q[v]);
      if (coeff == 0.0) continue;
      double* row = grad->data() + v * policy.feature_dim;
      for (size_t k = 0; k < policy.feature_dim; ++k)
        row[k] += coeff * state[k];
    }
  }
}

PpoGradient ppo_evaluate(const std::vector<Trajectory>& batch,
                         const std::vector<std::vector<double>>& advantages,
                         const ToyPolicy& policy, const ToyPolicy& ref,
                         double beta, bool clip_ratio, double clip_epsilon,
                         bool with_gradient) {
  if (batch.size() != advantages.size())
    throw std::invalid_argument("advantage count does not match batch");
  PpoGradient out;
  if (with_gradient) out.d_params.assign(policy.params.size(), 0.0);
  ObjectiveAccumulator acc;
  for (size_t e = 0; e < batch.size(); ++e) {
    const Trajectory& traj = batch[e];
    if (traj.logprobs_ref.size() != traj.length() ||
        traj.logprobs_policy.size() != traj.length())
      throw std::invalid_argument("trajectory missing logprobs");
    for (size_t t = 0; t < traj.length(); ++t) {
      accumulate_step(policy, ref, traj.states[t], traj.actions[t],
                      traj.logprobs_ref[t], advantages[e][t], beta, clip_ratio,
                      clip_epsilon, acc,
                      with_gradient ? &out.d_params : nullptr);
    }
  }
  if (acc.steps == 0) return out;
  const double n = static_cast<double>(acc.steps);
  out.value.objective = acc.term_sum / n - beta * (acc.kl_sum / n);
  out.value.mean_kl = acc.kl_sum / n;
  if (with_gradient) {
    for (double& g : out.d_params) g /= n;
  }
  return out;
}

}  // namespace

PpoObjective ppo_objective(const std::vector<Trajectory>& batch,
                           const std::vector<std::vector<double>>& advantages,
                           const ToyPolicy& policy, const ToyPolicy& ref,
                           double beta, bool clip_ratio, double clip_epsilon) {
  return ppo_evaluate(batch, advantages, policy, ref, beta, clip_ratio,
                      clip_epsilon, /*with_gradient=*/false)
      .value;
}

PpoGradient ppo_objective_gradient(
    const std::vector<Trajectory>& batch,
    const std::vector<std::vector<double>>& advantages,
    const ToyPolicy& policy, const ToyPolicy& ref, double beta,
    bool clip_ratio, double clip_epsilon) {
  return ppo_evaluate(batch, advantages, policy, ref, beta, clip_ratio,
                      clip_epsilon, /*with_gradient=*/true);
}

double sft_nll(const ToyPolicy& policy, const std::vector<GoldRecord>& gold) {
  const auto sequences = encode_sft(policy, gold);
  if (sequences.empty()) throw std::invalid_argument("no training data");
  double total = 0.0;
  for (const auto& seq : sequences) total += sequence_nll(policy, seq, nullptr);
  return total / static_cast<double>(sequences.size());
}

std::vector<double> sft_nll_gradient(const ToyPolicy& policy,
                                     const std::vector<GoldRecord>& gold) {
  const auto sequences = encode_sft(policy, gold);
  if (sequences.empty()) throw std::invalid_argument("no training data");
  std::vector<double> grad(policy.params.size(), 0.0);
  for (const auto& seq : sequences) sequence_nll(policy, seq, &grad);
  for (double& g : grad) g /= static_cast<double>(sequences.size());
  return grad;
}

SftResult sft_fit(ToyPolicy policy, const std::vector<GoldRecord>& gold,
                  int epochs, double lr, uint64_t /*seed*/) {
  // Full-batch descent; the update is deterministic, so the seed only pins
  // the signature shared with the stochastic trainer.
  const auto sequences = encode_sft(policy, gold);
  if (sequences.empty()) throw std::invalid_argument("no training data");

  SftResult result;
  for (int epoch = 0; epoch < epochs; ++epoch) {
    std::vector<double> grad(policy.params.size(), 0.0);
    for (const auto& seq : sequences) sequence_nll(policy, seq, &grad);
    const double scale = lr / static_cast<double>(sequences.size());
    for (size_t i = 0; i < policy.params.size(); ++i)
      policy.params[i] -= scale * grad[i];

    double nll = 0.0;
    for (const auto& seq : sequences) nll += sequence_nll(policy, seq, nullptr);
    result.epoch_nll.push_back(nll / static_cast<double>(sequences.size()));
  }
  result.policy = std::move(policy);
  return result;
}

SyntheticSequenceEnv::SyntheticSequenceEnv(std::string context,
                                           std::vector<size_t> target)
    : context_(std::move(context)), target_(std::move(target)) {
  if (target_.empty())
    throw std::invalid_argument("synthetic env target empty");
}

double SyntheticSequenceEnv::terminal_reward(
    const std::vector<size_t>& actions) {
  const size_t longest = std::max(target_.size(), actions.size());
  size_t matches = 0;
  for (size_t i = 0; i < std::min(target_.size(), actions.size()); ++i) {
    if (actions[i] == target_[i]) ++matches;
  }
  return static_cast<double>(matches) / static_cast<double>(longest);
}

DecompositionEnv::DecompositionEnv(
    const ToyPolicy& policy, GoldRecord gold, SolverResponse scripted_initial,
    SolverResponse scripted_sub_answer, SolverResponse scripted_final,
    std::shared_ptr<embed::EmbeddingProvider> provider,
    std::shared_ptr<text::NounDetector> detector)
    : vocab_(policy.vocab),
      gold_(std::move(gold)),
      initial_(std::move(scripted_initial)),
      sub_answer_(std::move(scripted_sub_answer)),
      final_(std::move(scripted_final)),
      provider_(std::move(provider)),
      detector_(std::move(detector)) {
  context_ = gold_.question.text + "\n" + initial_.raw_text;
}

double DecompositionEnv::terminal_reward(const std::vector<size_t>& actions) {
  // Decode tokens into subquestions; '?' tokens terminate one subquestion.
  std::vector<std::string> subquestions;
  std::string current;
  for (size_t a : actions) {
    const std::string& tok = vocab_.at(a);
    if (!current.empty()) current += " ";
    current += tok;
    if (!tok.empty() && tok.back() == '?') {
      subquestions.push_back(current);
      current.clear();
    }
  }
  if (subquestions.empty()) return 0.0;

  EpisodeTranscript t;
  t.question_ref = gold_.question.id;
  t.mode = PipelineMode::Daslam;
  t.initial = initial_;
  t.plan.subquestions = subquestions;
  t.plan.source = PlanSource::WithFeedback;
  t.sub_answers.assign(subquestions.size(), sub_answer_);
  t.final = final_;
  return reward::total_reward(t, gold_, *provider_, *detector_).total;
}

Trajectory rollout(const ToyPolicy& policy, const ToyPolicy& ref,
                   EpisodeEnvironment& env, std::mt19937_64& rng,
                   int max_len) {
  Trajectory traj;
  const auto bow = policy.context_bow(env.context());
  long prev = -1;
  for (int step = 0; step < max_len; ++step) {
    auto f = policy.features(bow, prev);
    const auto dist = policy.distribution(f);
    const double u = uniform01(rng);
    double cumulative = 0.0;
    size_t action = dist.size() - 1;
    for (size_t v = 0; v < dist.size(); ++v) {
      cumulative += dist[v];
      if (u < cumulative) {
        action = v;
        break;
      }
    }
    traj.logprobs_policy.push_back(std::log(std::max(dist[action], 1e-300)));
    traj.logprobs_ref.push_back(ref.log_prob(f, action));
    traj.values.push_back(policy.value(f));
    traj.actions.push_back(action);
    traj.states.push_back(std::move(f));
    if (action == policy.eos_index) break;
    prev = static_cast<long>(action);
  }
  traj.rewards.assign(traj.length(), 0.0);

  std::vector<size_t> generated = traj.actions;
  if (!generated.empty() && generated.back() == policy.eos_index)
    generated.pop_back();
  traj.terminal_reward = env.terminal_reward(generated);
  traj.rewards[traj.length() - 1] = traj.terminal_reward;
  return traj;
}

std::pair<double, double> value_regression_step(
    ToyPolicy& policy, const std::vector<Trajectory>& batch, double gamma,
    double lr) {
  size_t steps = 0;
  std::vector<double> grad(policy.feature_dim, 0.0);
  double mse_before = 0.0;
  for (const auto& traj : batch) {
    const auto returns = returns_from_rewards(traj, gamma);
    for (size_t t = 0; t < traj.length(); ++t) {
      const double err = policy.value(traj.states[t]) - returns[t];
      mse_before += err * err;
      for (size_t k = 0; k < policy.feature_dim; ++k)
        grad[k] += 2.0 * err * traj.states[t][k];
      ++steps;
    }
  }
  if (steps == 0) return {0.0, 0.0};
  mse_before /= static_cast<double>(steps);
  for (size_t k = 0; k < policy.feature_dim; ++k)
    policy.value_head[k] -= lr * grad[k] / static_cast<double>(steps);

  double mse_after = 0.0;
  for (const auto& traj : batch) {
    const auto returns = returns_from_rewards(traj, gamma);
    for (size_t t = 0; t < traj.length(); ++t) {
      const double err = policy.value(traj.states[t]) - returns[t];
      mse_after += err * err;
    }
  }
  mse_after /= static_cast<double>(steps);
  return {mse_before, mse_after};
}

double adapt_kl_coef(double beta, double mean_kl, double target) {
  const double factor =
      std::clamp(1.0 + 0.1 * (mean_kl / target - 1.0), 0.5, 2.0);
  return beta * factor;
}

std::string TrainReport::to_csv() const {
  std::string csv = "iteration,mean_reward,mean_kl,beta,nll\n";
  for (size_t i = 0; i < sft_nll.size(); ++i) {
    csv += std::to_string(i + 1) + ",,,," + format_double(sft_nll[i]) + "\n";
  }
  for (const auto& row : ppo) {
    csv += std::to_string(row.iteration) + "," +
           format_double(row.mean_reward) + "," + format_double(row.mean_kl) +
           "," + format_double(row.beta) + ",\n";
  }
  return csv;
}

TrainReport train_ppo(PpoState& state, const ToyPolicy& ref,
                      EpisodeEnvironment& env, const PpoConfig& cfg) {
  if (cfg.gamma < 0.0 || cfg.gamma > 1.0 || cfg.lambda < 0.0 ||
      cfg.lambda > 1.0)
    throw std::invalid_argument("gamma and lambda must lie in [0, 1]");
  if (cfg.kl_coef_init <= 0.0)
    throw std::invalid_argument("kl_coef_init must be positive");
  if (cfg.batch_size <= 0 || cfg.grad_accum <= 0 || cfg.max_episode_len <= 0)
    throw std::invalid_argument("batch sizes and episode length must be positive");

  TrainReport report;
  if (cfg.iterations <= 0) return report;

  std::mt19937_64 rng(cfg.seed);
  if (!state.rng_state.empty()) {
    std::istringstream in(state.rng_state);
    in >> rng;
  }

  for (int iter = 0; iter < cfg.iterations; ++iter) {
    std::vector<Trajectory> all_episodes;
    std::vector<std::vector<double>> all_advantages;
    for (int e = 0; e < cfg.grad_accum * cfg.batch_size; ++e) {
      Trajectory traj =
          rollout(state.policy, ref, env, rng, cfg.max_episode_len);
      all_advantages.push_back(gae_advantages(traj, cfg.gamma, cfg.lambda));
      all_episodes.push_back(std::move(traj));
    }

    if (cfg.normalize_advantages) {
      double mean = 0.0, count = 0.0;
      for (const auto& adv : all_advantages)
        for (double a : adv) {
          mean += a;
          ++count;
        }
      mean /= count;
      double var = 0.0;
      for (const auto& adv : all_advantages)
        for (double a : adv) var += (a - mean) * (a - mean);
      const double stddev = std::sqrt(var / count) + 1e-8;
      for (auto& adv : all_advantages)
        for (double& a : adv) a = (a - mean) / stddev;
    }

    std::vector<double> grad_total(state.policy.params.size(), 0.0);
    double kl_sum = 0.0;
    for (int group = 0; group < cfg.grad_accum; ++group) {
      const size_t begin = static_cast<size_t>(group * cfg.batch_size);
      std::vector<Trajectory> batch(
          all_episodes.begin() + begin,
          all_episodes.begin() + begin + cfg.batch_size);
      std::vector<std::vector<double>> advantages(
          all_advantages.begin() + begin,
          all_advantages.begin() + begin + cfg.batch_size);
      const auto grad =
          ppo_objective_gradient(batch, advantages, state.policy, ref,
                                 state.beta, cfg.clip_ratio, cfg.clip_epsilon);
      for (size_t i = 0; i < grad_total.size(); ++i)
        grad_total[i] += grad.d_params[i];
      kl_sum += grad.value.mean_kl;
    }

    const double groups = static_cast<double>(cfg.grad_accum);
    // Ascent on the objective; one step per accumulated batch.
    for (size_t i = 0; i < state.policy.params.size(); ++i)
      state.policy.params[i] += cfg.learning_rate * grad_total[i] / groups;

    value_regression_step(state.policy, all_episodes, cfg.gamma,
                          cfg.value_learning_rate);

    double reward_sum = 0.0;
    for (const auto& traj : all_episodes) reward_sum += traj.terminal_reward;

    IterationStats stats;
    stats.iteration = ++state.iteration;
    stats.mean_reward = reward_sum / static_cast<double>(all_episodes.size());
    stats.mean_kl = kl_sum / groups;
    stats.beta = state.beta;
    report.ppo.push_back(stats);

    state.beta = adapt_kl_coef(state.beta, stats.mean_kl, cfg.kl_target);
  }

  std::ostringstream out;
  out << rng;
  state.rng_state = out.str();
  return report;
}

}  // namespace daslam::rl
