#pragma once
// Desk-scale two-stage trainer for the decomposer policy: maximum-likelihood
// alignment to gold subquestion sequences, then KL-penalized policy-gradient
// optimization with generalized advantage estimation.

#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "daslam/core.hpp"
#include "daslam/embeddings.hpp"
#include "daslam/reward.hpp"

namespace daslam::rl {

/// Softmax policy over a small symbol vocabulary. Features are the
/// bag-of-words of the conditioning context concatenated with a one-hot of
/// the previous action plus a bias term, so each state folds in the token
/// generated one step earlier.
struct ToyPolicy {
  std::vector<std::string> vocab;  // contains the end-of-sequence symbol
  size_t eos_index = 0;
  size_t feature_dim = 0;          // 2 * |vocab| + 1
  std::vector<double> params;      // |vocab| x feature_dim, row-major logits
  std::vector<double> value_head;  // feature_dim

  static constexpr const char* kEos = "<eos>";

  // Random small init; vocab must be non-empty and contain kEos.
  static ToyPolicy init(std::vector<std::string> vocab, uint64_t seed);

  size_t vocab_size() const { return vocab.size(); }
  // Throws std::invalid_argument naming the token when absent.
  size_t token_index(const std::string& token) const;

  // Bag-of-words counts of the whitespace tokens of `context` over vocab.
  std::vector<double> context_bow(const std::string& context) const;
  // prev_action < 0 means start of sequence (no one-hot contribution).
  std::vector<double> features(const std::vector<double>& bow,
                               long prev_action) const;

  std::vector<double> logits(const std::vector<double>& f) const;
  std::vector<double> distribution(const std::vector<double>& f) const;
  double log_prob(const std::vector<double>& f, size_t action) const;
  double value(const std::vector<double>& f) const;
};

// Sorted unique whitespace tokens of every gold subquestion and question
// text, plus the end-of-sequence symbol.
std::vector<std::string> build_vocab(const std::vector<GoldRecord>& records);

/// Token-level record of one generation episode.
struct Trajectory {
  std::vector<std::vector<double>> states;  // feature vectors s_0..s_{T-1}
  std::vector<size_t> actions;
  std::vector<double> logprobs_policy;
  std::vector<double> logprobs_ref;
  std::vector<double> values;   // V(s_t) at collection time
  std::vector<double> rewards;  // zero everywhere except the final step
  double terminal_reward = 0.0;

  size_t length() const { return actions.size(); }
};

struct PpoConfig {
  double gamma = 1.0;
  double lambda = 0.95;
  double kl_coef_init = 0.01;
  double kl_target = 4.0;
  int batch_size = 8;
  int grad_accum = 8;
  double learning_rate = 0.05;
  double value_learning_rate = 1e-3;
  int iterations = 200;
  uint64_t seed = 0;
  int max_episode_len = 16;
  bool clip_ratio = false;  // unclipped objective by default
  double clip_epsilon = 0.2;
  // Whiten advantages across each accumulated batch before the update.
  bool normalize_advantages = true;
};

// Places breakdown.total at the final step. Throws std::logic_error if the
// trajectory already carries a reward.
Trajectory assign_terminal_reward(Trajectory traj,
                                  const reward::RewardBreakdown& breakdown);

// Advantage estimates via backward recursion over TD residuals with
// V(s_T) = 0; equal to the exponentially weighted forward sum.
std::vector<double> gae_advantages(const Trajectory& traj, double gamma,
                                   double lambda);

struct PpoObjective {
  double objective = 0.0;
  double mean_kl = 0.0;
};

// Mean over steps of ratio * advantage minus beta times the mean full-vocab
// KL(ref || policy). The ratio is the current policy probability of the
// recorded action over the stored reference probability. A zero-probability
// reference under a supported action is a "support mismatch" error.
PpoObjective ppo_objective(const std::vector<Trajectory>& batch,
                           const std::vector<std::vector<double>>& advantages,
                           const ToyPolicy& policy, const ToyPolicy& ref,
                           double beta, bool clip_ratio = false,
                           double clip_epsilon = 0.2);

// Same objective plus its analytic gradient with respect to policy params.
struct PpoGradient {
  PpoObjective value;
  std::vector<double> d_params;
};
PpoGradient ppo_objective_gradient(
    const std::vector<Trajectory>& batch,
    const std::vector<std::vector<double>>& advantages,
    const ToyPolicy& policy, const ToyPolicy& ref, double beta,
    bool clip_ratio = false, double clip_epsilon = 0.2);

// Mean negative log-likelihood of the gold action sequences (each record's
// subquestion tokens followed by end-of-sequence, conditioned on the
// question text and gold steps).
double sft_nll(const ToyPolicy& policy, const std::vector<GoldRecord>& gold);
std::vector<double> sft_nll_gradient(const ToyPolicy& policy,
                                     const std::vector<GoldRecord>& gold);

struct SftResult {
  ToyPolicy policy;
  std::vector<double> epoch_nll;  // NLL after each epoch's update
};

// Full-batch gradient descent on the NLL. Errors: "no training data" on an
// empty set; unknown tokens are named in the error.
SftResult sft_fit(ToyPolicy policy, const std::vector<GoldRecord>& gold,
                  int epochs, double lr, uint64_t seed);

/// Environment producing terminal rewards for generated token sequences.
class EpisodeEnvironment {
 public:
  virtual ~EpisodeEnvironment() = default;
  virtual const std::string& context() const = 0;
  // actions exclude the end-of-sequence token.
  virtual double terminal_reward(const std::vector<size_t>& actions) = 0;
};

// Rewards positional agreement with one fixed action sequence; the optimum
// (exactly the target) scores 1.
class SyntheticSequenceEnv : public EpisodeEnvironment {
 public:
  SyntheticSequenceEnv(std::string context, std::vector<size_t> target);
  const std::string& context() const override { return context_; }
  double terminal_reward(const std::vector<size_t>& actions) override;
  double known_optimum() const { return 1.0; }
  const std::vector<size_t>& target() const { return target_; }

 private:
  std::string context_;
  std::vector<size_t> target_;
};

// Scores generated subquestion plans with the full reward stack against a
// gold record, answering subquestions from a fixed scripted response.
class DecompositionEnv : public EpisodeEnvironment {
 public:
  DecompositionEnv(const ToyPolicy& policy, GoldRecord gold,
                   SolverResponse scripted_initial,
                   SolverResponse scripted_sub_answer,
                   SolverResponse scripted_final,
                   std::shared_ptr<embed::EmbeddingProvider> provider,
                   std::shared_ptr<text::NounDetector> detector);
  const std::string& context() const override { return context_; }
  double terminal_reward(const std::vector<size_t>& actions) override;

 private:
  std::vector<std::string> vocab_;
  std::string context_;
  GoldRecord gold_;
  SolverResponse initial_;
  SolverResponse sub_answer_;
  SolverResponse final_;
  std::shared_ptr<embed::EmbeddingProvider> provider_;
  std::shared_ptr<text::NounDetector> detector_;
};

// Samples one episode: tokens are drawn from the policy until the
// end-of-sequence symbol or max_len, then the environment's terminal reward
// is assigned to the last step.
Trajectory rollout(const ToyPolicy& policy, const ToyPolicy& ref,
                   EpisodeEnvironment& env, std::mt19937_64& rng,
                   int max_len);

// One gradient-descent step of the value head toward empirical returns on
// the given batch. Returns mean squared error before and after the step.
std::pair<double, double> value_regression_step(
    ToyPolicy& policy, const std::vector<Trajectory>& batch, double gamma,
    double lr);

// Proportional controller for the KL coefficient: moves beta toward keeping
// the observed KL at the target, clamped to a factor of 2 per update.
double adapt_kl_coef(double beta, double mean_kl, double target);

struct IterationStats {
  int iteration = 0;
  double mean_reward = 0.0;
  double mean_kl = 0.0;
  double beta = 0.0;
};

struct TrainReport {
  std::vector<double> sft_nll;          // per-epoch, when SFT ran
  std::vector<IterationStats> ppo;      // per-iteration, when PPO ran
  // CSV with columns iteration,mean_reward,mean_kl,beta,nll; SFT epochs
  // fill only nll, policy-optimization rows leave it empty.
  std::string to_csv() const;
};

/// Mutable optimization state; checkpointable and resumable. Resuming from
/// a saved state continues bit-identically with an uninterrupted run.
struct PpoState {
  ToyPolicy policy;
  double beta = 0.01;
  int iteration = 0;
  std::string rng_state;  // serialized mt19937_64; empty means seed fresh
};

// Runs cfg.iterations rollout/update cycles, mutating state in place.
TrainReport train_ppo(PpoState& state, const ToyPolicy& ref,
                      EpisodeEnvironment& env, const PpoConfig& cfg);

}  // namespace daslam::rl
