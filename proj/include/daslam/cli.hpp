#pragma once
// Operator entry point: resolves configuration from defaults, config file,
// environment, and flags, then dispatches to the subcommands.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "daslam/core.hpp"
#include "daslam/orchestrator.hpp"
#include "daslam/rl_trainer.hpp"

namespace daslam::cli {

// Exit codes: 0 success, 1 fatal configuration or input error, 2 partial
// per-item failures.
constexpr int kExitOk = 0;
constexpr int kExitFatal = 1;
constexpr int kExitPartial = 2;

struct CliConfig {
  std::string mode = "daslam";
  std::string dataset;
  std::string templates;  // empty means the builtin template set
  std::string solver_endpoint;
  std::string decomposer_endpoint;
  std::string replay;
  std::string out = "out";
  uint64_t seed = 0;
  int parallel = 1;
  std::string stage = "both";  // train: sft | ppo | both
  std::string lexicon;  // noun lexicon file; stopword heuristic when empty
  int max_subquestions = 8;

  // Generation defaults.
  double temperature = 0.95;
  double top_p = 0.18;
  int max_tokens = 2048;

  // Trainer knobs.
  int sft_epochs = 60;
  double sft_lr = 0.01;
  int iterations = 200;
  int batch_size = 8;
  int grad_accum = 8;
  double kl_coef = 0.01;
  double kl_target = 4.0;
  double learning_rate = 0.05;
};

pipeline::PipelineConfig make_pipeline_config(const CliConfig& cfg);
rl::PpoConfig make_ppo_config(const CliConfig& cfg);

// Writes the fully resolved configuration into the output directory.
void echo_resolved_config(const CliConfig& cfg, const std::string& subcommand);

int cmd_run(const CliConfig& cfg);
int cmd_reward(const CliConfig& cfg, const std::string& transcripts_path,
               const std::string& gold_path);
int cmd_train(const CliConfig& cfg);
int cmd_eval(const CliConfig& cfg, const std::vector<std::string>& modes);

// Builds the CLI11 application and runs it.
int run_main(int argc, char** argv);

}  // namespace daslam::cli
