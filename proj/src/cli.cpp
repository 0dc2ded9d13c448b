#include "daslam/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>

#include "CLI11.hpp"

#include "daslam/embeddings.hpp"
#include "daslam/eval_harness.hpp"
#include "daslam/persistence.hpp"
#include "daslam/reward.hpp"
#include "daslam/text_analysis.hpp"

namespace daslam::cli {
namespace {

namespace fs = std::filesystem;

struct ReplayScripts {
  std::vector<std::string> solver;
  std::vector<std::string> decomposer;
};

std::map<std::string, ReplayScripts> load_replay_file(const fs::path& path) {
  std::map<std::string, ReplayScripts> scripts;
  for (const auto& j : io::read_jsonl_objects(path, io::SchemaKind::Dataset)) {
    ReplayScripts s;
    if (j.contains("solver"))
      s.solver = j.at("solver").get<std::vector<std::string>>();
    if (j.contains("decomposer"))
      s.decomposer = j.at("decomposer").get<std::vector<std::string>>();
    scripts[j.at("id").get<std::string>()] = std::move(s);
  }
  return scripts;
}

pipeline::TemplateSet load_templates(const CliConfig& cfg) {
  if (cfg.templates.empty()) return pipeline::TemplateSet::builtin();
  return pipeline::TemplateSet::load(cfg.templates);
}

std::shared_ptr<text::NounDetector> make_detector(const std::string& lexicon) {
  if (lexicon.empty())
    return std::make_shared<text::StopwordComplementDetector>();
  return std::make_shared<text::LexiconDetector>(
      text::load_token_list(lexicon));
}

// Builds the per-item client source for a dataset run: replay scripts when
// configured, shared HTTP clients otherwise.
eval::ClientSource make_client_source(
    const CliConfig& cfg,
    const std::shared_ptr<std::map<std::string, ReplayScripts>>& replay) {
  if (replay) {
    return [replay](const GoldRecord& record) -> eval::ClientPair {
      auto it = replay->find(record.question.id);
      if (it == replay->end())
        throw pipeline::PipelineError(
            pipeline::Stage::InitialCot,
            "no replay script for item " + record.question.id);
      eval::ClientPair pair;
      pair.solver = std::make_shared<pipeline::ReplayClient>(it->second.solver);
      pair.decomposer =
          std::make_shared<pipeline::ReplayClient>(it->second.decomposer);
      return pair;
    };
  }
  auto solver = std::make_shared<pipeline::HttpCompletionClient>(
      pipeline::HttpClientConfig{cfg.solver_endpoint, "solver"});
  std::shared_ptr<pipeline::CompletionClient> decomposer;
  if (!cfg.decomposer_endpoint.empty())
    decomposer = std::make_shared<pipeline::HttpCompletionClient>(
        pipeline::HttpClientConfig{cfg.decomposer_endpoint, "decomposer",
                                   "/v1/completions", "DECOMPOSER_API_KEY"});
  return [solver, decomposer](const GoldRecord&) -> eval::ClientPair {
    return {solver, decomposer};
  };
}

std::string format_mean(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

int fatal(const std::string& message) {
  std::cerr << "error: " << message << "\n";
  return kExitFatal;
}

std::string trim_ws(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

// Key-value config file mirroring the flag names ("mode=daslam"). Applied
// onto the defaults before environment variables and flags, which keeps the
// precedence order defaults < config < environment < flags.
void apply_config_file(const std::string& path, CliConfig& cfg) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  std::map<std::string, std::function<void(const std::string&)>> setters = {
      {"mode", [&](const std::string& v) { cfg.mode = v; }},
      {"dataset", [&](const std::string& v) { cfg.dataset = v; }},
      {"templates", [&](const std::string& v) { cfg.templates = v; }},
      {"solver-endpoint",
       [&](const std::string& v) { cfg.solver_endpoint = v; }},
      {"decomposer-endpoint",
       [&](const std::string& v) { cfg.decomposer_endpoint = v; }},
      {"replay", [&](const std::string& v) { cfg.replay = v; }},
      {"out", [&](const std::string& v) { cfg.out = v; }},
      {"seed", [&](const std::string& v) { cfg.seed = std::stoull(v); }},
      {"parallel", [&](const std::string& v) { cfg.parallel = std::stoi(v); }},
      {"stage", [&](const std::string& v) { cfg.stage = v; }},
      {"lexicon", [&](const std::string& v) { cfg.lexicon = v; }},
      {"max-subquestions",
       [&](const std::string& v) { cfg.max_subquestions = std::stoi(v); }},
      {"temperature",
       [&](const std::string& v) { cfg.temperature = std::stod(v); }},
      {"top-p", [&](const std::string& v) { cfg.top_p = std::stod(v); }},
      {"max-tokens",
       [&](const std::string& v) { cfg.max_tokens = std::stoi(v); }},
      {"sft-epochs",
       [&](const std::string& v) { cfg.sft_epochs = std::stoi(v); }},
      {"sft-lr", [&](const std::string& v) { cfg.sft_lr = std::stod(v); }},
      {"iterations",
       [&](const std::string& v) { cfg.iterations = std::stoi(v); }},
      {"batch-size",
       [&](const std::string& v) { cfg.batch_size = std::stoi(v); }},
      {"grad-accum",
       [&](const std::string& v) { cfg.grad_accum = std::stoi(v); }},
      {"kl-coef", [&](const std::string& v) { cfg.kl_coef = std::stod(v); }},
      {"kl-target",
       [&](const std::string& v) { cfg.kl_target = std::stod(v); }},
      {"learning-rate",
       [&](const std::string& v) { cfg.learning_rate = std::stod(v); }},
  };
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim_ws(line);
    if (line.empty()) continue;
    const size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error(path + " line " + std::to_string(line_no) +
                               ": expected key=value");
    const std::string key = trim_ws(line.substr(0, eq));
    const std::string value = trim_ws(line.substr(eq + 1));
    auto it = setters.find(key);
    if (it == setters.end())
      throw std::runtime_error(path + " line " + std::to_string(line_no) +
                               ": unknown config key '" + key + "'");
    it->second(value);
  }
}

// --config must be resolved before the defaults feed the parser.
std::string find_config_path(int argc, char** argv) {
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--config" && i + 1 < argc) return argv[i + 1];
    if (arg.rfind("--config=", 0) == 0) return arg.substr(9);
  }
  if (const char* env = std::getenv("DASLAM_CONFIG")) return env;
  return {};
}

}  // namespace

pipeline::PipelineConfig make_pipeline_config(const CliConfig& cfg) {
  pipeline::PipelineConfig pc;
  pc.mode = pipeline_mode_from_name(cfg.mode);
  pc.max_subquestions = cfg.max_subquestions;
  pc.templates = load_templates(cfg);
  pc.generation.temperature = cfg.temperature;
  pc.generation.top_p = cfg.top_p;
  pc.generation.max_tokens = cfg.max_tokens;
  return pc;
}

rl::PpoConfig make_ppo_config(const CliConfig& cfg) {
  rl::PpoConfig pc;
  pc.kl_coef_init = cfg.kl_coef;
  pc.kl_target = cfg.kl_target;
  pc.batch_size = cfg.batch_size;
  pc.grad_accum = cfg.grad_accum;
  pc.learning_rate = cfg.learning_rate;
  pc.iterations = cfg.iterations;
  pc.seed = cfg.seed;
  return pc;
}

void echo_resolved_config(const CliConfig& cfg, const std::string& subcommand) {
  std::string out;
  out += "subcommand=" + subcommand + "\n";
  out += "mode=" + cfg.mode + "\n";
  out += "dataset=" + cfg.dataset + "\n";
  out += "templates=" + cfg.templates + "\n";
  out += "solver_endpoint=" + cfg.solver_endpoint + "\n";
  out += "decomposer_endpoint=" + cfg.decomposer_endpoint + "\n";
  out += "replay=" + cfg.replay + "\n";
  out += "out=" + cfg.out + "\n";
  out += "seed=" + std::to_string(cfg.seed) + "\n";
  out += "parallel=" + std::to_string(cfg.parallel) + "\n";
  out += "stage=" + cfg.stage + "\n";
  out += "max_subquestions=" + std::to_string(cfg.max_subquestions) + "\n";
  out += "temperature=" + format_mean(cfg.temperature) + "\n";
  out += "top_p=" + format_mean(cfg.top_p) + "\n";
  out += "max_tokens=" + std::to_string(cfg.max_tokens) + "\n";
  out += "sft_epochs=" + std::to_string(cfg.sft_epochs) + "\n";
  out += "sft_lr=" + format_mean(cfg.sft_lr) + "\n";
  out += "iterations=" + std::to_string(cfg.iterations) + "\n";
  out += "batch_size=" + std::to_string(cfg.batch_size) + "\n";
  out += "grad_accum=" + std::to_string(cfg.grad_accum) + "\n";
  out += "kl_coef=" + format_mean(cfg.kl_coef) + "\n";
  out += "kl_target=" + format_mean(cfg.kl_target) + "\n";
  out += "learning_rate=" + format_mean(cfg.learning_rate) + "\n";
  io::write_text_file(fs::path(cfg.out) / (subcommand + "_config.txt"), out);
}

int cmd_run(const CliConfig& cfg) {
  std::vector<GoldRecord> dataset;
  pipeline::PipelineConfig pc;
  std::shared_ptr<std::map<std::string, ReplayScripts>> replay;
  try {
    dataset = io::read_jsonl<GoldRecord>(cfg.dataset, io::SchemaKind::Dataset);
    pc = make_pipeline_config(cfg);
    if (!cfg.replay.empty())
      replay = std::make_shared<std::map<std::string, ReplayScripts>>(
          load_replay_file(cfg.replay));
    else if (cfg.solver_endpoint.empty())
      return fatal("no solver configured: pass --replay or --solver-endpoint");
    fs::create_directories(cfg.out);
    echo_resolved_config(cfg, "run");
  } catch (const std::exception& e) {
    return fatal(e.what());
  }
  if (dataset.empty()) return fatal("empty dataset: " + cfg.dataset);

  // The eval runner already handles per-item isolation and the parallelism
  // bound; a run is an eval whose scores are ignored.
  std::vector<EpisodeTranscript> transcripts;
  size_t failures = 0;
  try {
    const auto result =
        eval::run_eval(dataset, pc, make_client_source(cfg, replay),
                       &transcripts, cfg.parallel);
    std::vector<EpisodeTranscript> completed;
    for (size_t i = 0; i < result.per_item.size(); ++i) {
      if (result.per_item[i].error) {
        ++failures;
        std::cerr << "item " << result.per_item[i].id
                  << " failed: " << *result.per_item[i].error << "\n";
      } else {
        completed.push_back(std::move(transcripts[i]));
      }
    }
    io::write_jsonl(fs::path(cfg.out) / "transcripts.jsonl", completed);
    std::cout << "wrote " << completed.size() << " transcripts (" << failures
              << " failures)\n";
  } catch (const std::exception& e) {
    return fatal(e.what());
  }
  return failures == 0 ? kExitOk : kExitPartial;
}

int cmd_reward(const CliConfig& cfg, const std::string& transcripts_path,
               const std::string& gold_path) {
  std::vector<EpisodeTranscript> transcripts;
  std::vector<GoldRecord> gold;
  try {
    transcripts = io::read_jsonl<EpisodeTranscript>(transcripts_path,
                                                    io::SchemaKind::Transcript);
    gold = io::read_jsonl<GoldRecord>(gold_path, io::SchemaKind::Dataset);
  } catch (const std::exception& e) {
    return fatal(e.what());
  }
  if (transcripts.empty()) return fatal("no episodes");

  std::map<std::string, const GoldRecord*> by_id;
  for (const auto& r : gold) by_id[r.question.id] = &r;
  std::vector<std::string> missing;
  for (const auto& t : transcripts) {
    if (by_id.find(t.question_ref) == by_id.end())
      missing.push_back(t.question_ref);
  }
  if (!missing.empty()) {
    std::string msg = "transcript ids missing from gold file:";
    for (const auto& id : missing) msg += " " + id;
    return fatal(msg);
  }

  embed::HashedBagOfWordsProvider provider(256, cfg.seed);
  auto detector = make_detector(cfg.lexicon);

  std::vector<reward::RewardBreakdown> breakdowns;
  try {
    for (const auto& t : transcripts)
      breakdowns.push_back(reward::total_reward(t, *by_id.at(t.question_ref),
                                                provider, *detector));
    fs::create_directories(cfg.out);
    echo_resolved_config(cfg, "reward");
    io::write_jsonl(fs::path(cfg.out) / "rewards.jsonl", breakdowns);
  } catch (const std::exception& e) {
    return fatal(e.what());
  }

  double r1 = 0, r2 = 0, r3 = 0, r4 = 0, r5 = 0, total = 0;
  for (const auto& b : breakdowns) {
    r1 += b.r1;
    r2 += b.r2;
    r3 += b.r3;
    r4 += b.r4;
    r5 += b.r5;
    total += b.total;
  }
  const double n = static_cast<double>(breakdowns.size());
  std::cout << "episodes: " << breakdowns.size() << "\n"
            << "mean r1: " << format_mean(r1 / n) << "\n"
            << "mean r2: " << format_mean(r2 / n) << "\n"
            << "mean r3: " << format_mean(r3 / n) << "\n"
            << "mean r4: " << format_mean(r4 / n) << "\n"
            << "mean r5: " << format_mean(r5 / n) << "\n"
            << "mean total: " << format_mean(total / n) << "\n";
  return kExitOk;
}

int cmd_train(const CliConfig& cfg) {
  std::vector<GoldRecord> dataset;
  try {
    dataset = io::read_jsonl<GoldRecord>(cfg.dataset, io::SchemaKind::Dataset);
  } catch (const std::exception& e) {
    return fatal(e.what());
  }
  if (cfg.stage != "sft" && cfg.stage != "ppo" && cfg.stage != "both")
    return fatal("unknown stage '" + cfg.stage + "' (allowed: sft, ppo, both)");

  try {
    fs::create_directories(cfg.out);
    echo_resolved_config(cfg, "train");

    rl::ToyPolicy policy = rl::ToyPolicy::init(rl::build_vocab(dataset),
                                               cfg.seed);
    rl::TrainReport report;

    if (cfg.stage == "sft" || cfg.stage == "both") {
      auto sft = rl::sft_fit(std::move(policy), dataset, cfg.sft_epochs,
                             cfg.sft_lr, cfg.seed);
      policy = std::move(sft.policy);
      report.sft_nll = std::move(sft.epoch_nll);
    }

    rl::PpoState state;
    state.policy = policy;
    state.beta = cfg.kl_coef;

    if (cfg.stage == "ppo" || cfg.stage == "both") {
      const GoldRecord* anchor = nullptr;
      for (const auto& r : dataset) {
        if (r.gold_subquestions) {
          anchor = &r;
          break;
        }
      }
      if (!anchor) return fatal("no training data");

      // Scripted solver responses derived from the gold record keep the
      // environment self-contained: the final matches gold, the initial is a
      // truncated attempt.
      std::string steps_text;
      for (const auto& s : anchor->gold_steps) steps_text += s + "\n";
      SolverResponse initial = text::parse_solver_response(
          anchor->gold_steps.empty() ? "" : anchor->gold_steps.front(),
          anchor->question.answer_kind, anchor->question.choices);
      SolverResponse final_resp = text::parse_solver_response(
          steps_text + "Answer: " + anchor->gold_answer.display(),
          anchor->question.answer_kind, anchor->question.choices);

      rl::DecompositionEnv env(
          state.policy, *anchor, initial, final_resp, final_resp,
          std::make_shared<embed::HashedBagOfWordsProvider>(256, cfg.seed),
          make_detector(cfg.lexicon));
      const rl::ToyPolicy ref = state.policy;
      rl::TrainReport ppo_report =
          rl::train_ppo(state, ref, env, make_ppo_config(cfg));
      report.ppo = std::move(ppo_report.ppo);
    }

    io::save_checkpoint(fs::path(cfg.out) / "checkpoint.json", state);
    io::write_text_file(fs::path(cfg.out) / "report.csv", report.to_csv());
  } catch (const std::exception& e) {
    return fatal(e.what());
  }
  std::cout << "training complete; report written to " << cfg.out << "\n";
  return kExitOk;
}

int cmd_eval(const CliConfig& cfg, const std::vector<std::string>& modes) {
  std::vector<GoldRecord> dataset;
  std::shared_ptr<std::map<std::string, ReplayScripts>> replay;
  pipeline::TemplateSet templates;
  try {
    dataset = io::read_jsonl<GoldRecord>(cfg.dataset, io::SchemaKind::Dataset);
    templates = load_templates(cfg);
    if (!cfg.replay.empty())
      replay = std::make_shared<std::map<std::string, ReplayScripts>>(
          load_replay_file(cfg.replay));
    else if (cfg.solver_endpoint.empty())
      return fatal("no solver configured: pass --replay or --solver-endpoint");
    fs::create_directories(cfg.out);
    echo_resolved_config(cfg, "eval");
  } catch (const std::exception& e) {
    return fatal(e.what());
  }

  std::vector<eval::EvalResult> results;
  try {
    for (const auto& mode_name : modes) {
      CliConfig mode_cfg = cfg;
      mode_cfg.mode = mode_name;
      pipeline::PipelineConfig pc = make_pipeline_config(mode_cfg);
      pc.templates = templates;
      std::vector<EpisodeTranscript> transcripts;
      results.push_back(eval::run_eval(dataset, pc,
                                       make_client_source(cfg, replay),
                                       &transcripts, cfg.parallel));
      io::write_jsonl(
          fs::path(cfg.out) / ("transcripts_" + mode_name + ".jsonl"),
          transcripts);
    }
    const auto report = eval::render_report(results);
    io::write_text_file(fs::path(cfg.out) / "report.txt", report.table);
    io::write_text_file(fs::path(cfg.out) / "report.csv", report.csv);
    std::cout << report.table;
  } catch (const std::exception& e) {
    return fatal(e.what());
  }
  return kExitOk;
}

int run_main(int argc, char** argv) {
  CLI::App app{"Decomposer-solver coordination pipeline"};
  app.set_help_all_flag("--help-all", "Print help for all subcommands");
  app.require_subcommand(0, 1);

  CliConfig cfg;
  const std::string config_path = find_config_path(argc, argv);
  if (!config_path.empty()) {
    try {
      apply_config_file(config_path, cfg);
    } catch (const std::exception& e) {
      return fatal(e.what());
    }
  }
  std::string config_flag;
  app.add_option("--config", config_flag,
                 "Key-value config file mirroring flag names");

  std::vector<std::string> eval_modes;
  std::string transcripts_path;
  std::string gold_path;

  auto add_common = [&](CLI::App* sub) {
    sub->fallthrough();  // lets --config appear after the subcommand
    sub->add_option("--out", cfg.out, "Output directory")
        ->capture_default_str()
        ->envname("DASLAM_OUT");
    sub->add_option("--seed", cfg.seed, "Random seed")
        ->capture_default_str()
        ->envname("DASLAM_SEED");
  };

  auto add_pipeline = [&](CLI::App* sub) {
    sub->add_option("--dataset", cfg.dataset, "Dataset JSONL path")
        ->envname("DASLAM_DATASET");
    sub->add_option("--templates", cfg.templates,
                    "Prompt template file (builtin when omitted)")
        ->envname("DASLAM_TEMPLATES");
    sub->add_option("--replay", cfg.replay, "Replay scripts JSONL path")
        ->envname("DASLAM_REPLAY");
    sub->add_option("--solver-endpoint", cfg.solver_endpoint,
                    "Solver completion endpoint, http://host:port")
        ->envname("DASLAM_SOLVER_ENDPOINT");
    sub->add_option("--decomposer-endpoint", cfg.decomposer_endpoint,
                    "Decomposer completion endpoint, http://host:port")
        ->envname("DASLAM_DECOMPOSER_ENDPOINT");
    sub->add_option("--parallel", cfg.parallel,
                    "Concurrent items (replay clients only)")
        ->capture_default_str()
        ->envname("DASLAM_PARALLEL");
    sub->add_option("--max-subquestions", cfg.max_subquestions,
                    "Upper bound on decomposition size")
        ->capture_default_str()
        ->envname("DASLAM_MAX_SUBQUESTIONS");
    sub->add_option("--temperature", cfg.temperature, "Sampling temperature")
        ->capture_default_str();
    sub->add_option("--top-p", cfg.top_p, "Nucleus sampling probability mass")
        ->capture_default_str();
    sub->add_option("--max-tokens", cfg.max_tokens, "Completion length bound")
        ->capture_default_str();
  };

  CLI::App* run = app.add_subcommand("run", "Run decomposition episodes");
  run->add_option("--mode", cfg.mode, "Pipeline mode")
      ->check(CLI::IsMember({"cot_only", "daslam_nf", "daslam"}))
      ->capture_default_str()
      ->envname("DASLAM_MODE");
  add_pipeline(run);
  add_common(run);

  CLI::App* rew = app.add_subcommand("reward", "Score transcripts");
  rew->add_option("--transcripts", transcripts_path, "Transcript JSONL path")
      ->required();
  rew->add_option("--gold", gold_path, "Gold dataset JSONL path")->required();
  rew->add_option("--lexicon", cfg.lexicon,
                  "Noun lexicon file (stopword heuristic when omitted)");
  add_common(rew);

  CLI::App* train = app.add_subcommand("train", "Train the decomposer policy");
  train->add_option("--stage", cfg.stage, "Training stage")
      ->check(CLI::IsMember({"sft", "ppo", "both"}))
      ->capture_default_str()
      ->envname("DASLAM_STAGE");
  train->add_option("--dataset", cfg.dataset, "Gold dataset JSONL path")
      ->envname("DASLAM_DATASET");
  train->add_option("--replay", cfg.replay, "Replay scripts JSONL path");
  train->add_option("--lexicon", cfg.lexicon, "Noun lexicon file");
  train->add_option("--sft-epochs", cfg.sft_epochs, "Alignment epochs")
      ->capture_default_str();
  train->add_option("--sft-lr", cfg.sft_lr, "Alignment learning rate")
      ->capture_default_str();
  train->add_option("--iterations", cfg.iterations, "Policy iterations")
      ->capture_default_str();
  train->add_option("--batch-size", cfg.batch_size, "Episodes per batch")
      ->capture_default_str();
  train->add_option("--grad-accum", cfg.grad_accum,
                    "Gradient accumulation steps")
      ->capture_default_str();
  train->add_option("--kl-coef", cfg.kl_coef, "Initial KL coefficient")
      ->capture_default_str();
  train->add_option("--kl-target", cfg.kl_target, "KL target")
      ->capture_default_str();
  train->add_option("--learning-rate", cfg.learning_rate,
                    "Policy learning rate")
      ->capture_default_str();
  add_common(train);

  CLI::App* ev = app.add_subcommand("eval", "Evaluate accuracy per mode");
  ev->add_option("--mode", eval_modes, "Pipeline mode (repeatable)")
      ->check(CLI::IsMember({"cot_only", "daslam_nf", "daslam"}))
      ->envname("DASLAM_MODE");
  add_pipeline(ev);
  add_common(ev);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitFatal;
  }

  if (run->parsed()) return cmd_run(cfg);
  if (rew->parsed()) return cmd_reward(cfg, transcripts_path, gold_path);
  if (train->parsed()) return cmd_train(cfg);
  if (ev->parsed()) {
    if (eval_modes.empty()) eval_modes.push_back(cfg.mode);
    return cmd_eval(cfg, eval_modes);
  }
  std::cout << app.help();
  return kExitOk;
}

}  // namespace daslam::cli
