// Copyright 2026 The ratelab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Command-line front end: train, eval, compare, ablate, tune-baselines.

#include <cstdint>
#include <exception>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ratelab/ratelab.hpp"

namespace {

using namespace ratelab;

struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::optional<std::int64_t> steps;
  std::optional<int> workers;
  bool deterministic_eval = false;
  std::vector<std::string> set;
};

void AddCommon(CLI::App* app, CommonFlags& f) {
  app->add_option("--config", f.config, "Experiment config file");
  app->add_option("--seed", f.seed, "Run a single seed instead of the config's list");
  app->add_option("--out", f.out, "Output directory");
  app->add_option("--steps", f.steps, "Training steps");
  app->add_option("--workers", f.workers, "Actor-critic workers");
  app->add_flag("--deterministic-eval", f.deterministic_eval, "Evaluate with the deterministic fusion rule");
  app->add_option("--set", f.set, "Override a config key: key=value (repeatable)");
}

ExperimentConfig Resolve(const CommonFlags& f) {
  ExperimentConfig cfg = f.config.empty() ? ExperimentConfig{} : LoadConfig(f.config);
  for (const auto& kv : f.set) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
    SetConfigValue(cfg, detail::Trim(kv.substr(0, eq)), detail::Trim(kv.substr(eq + 1)));
  }
  if (f.seed) cfg.seeds = {*f.seed};
  if (!f.out.empty()) cfg.output_dir = f.out;
  if (f.steps) cfg.training_steps = *f.steps;
  if (f.workers) cfg.a3c.workers = *f.workers;
  if (f.deterministic_eval) cfg.deterministic_eval = true;
  cfg.Validate();
  std::filesystem::create_directories(cfg.output_dir);
  return cfg;
}

std::string SeedDir(const ExperimentConfig& cfg, std::uint64_t seed) {
  return cfg.output_dir + "/seed_" + std::to_string(seed);
}

void WriteTrainOutputs(const ExperimentConfig& cfg, std::uint64_t seed, const TrainResult& r) {
  const std::string dir = SeedDir(cfg, seed);
  std::filesystem::create_directories(dir);
  auto conv = OpenOutput(dir + "/convergence.csv");
  WriteConvergenceCsv(conv, r.log);
  auto losses = OpenOutput(dir + "/losses.csv");
  WriteLossesCsv(losses, r.log);
  auto sched = OpenOutput(dir + "/schedule.csv");
  WriteScheduleCsv(sched, r.log, 10);
  auto timing = OpenOutput(dir + "/timing.csv");
  WriteTimingCsv(timing, r.log);
  auto plot = OpenOutput(dir + "/convergence_plot.csv");
  WritePlotCsv(plot, ConvergencePlot(r.log));
  const double alpha = r.log.alpha_trace.empty() ? r.agent->FinalAlpha() : r.log.alpha_trace.back();
  const double eps = r.log.epsilon_trace.empty() ? r.agent->EpsilonAt(0) : r.log.epsilon_trace.back();
  SaveAgent(*r.agent, dir, {r.steps, alpha, eps, seed});
  auto dump = OpenOutput(dir + "/config.txt");
  dump << DumpConfig(cfg);
}

int RunTrain(const CommonFlags& f) {
  const ExperimentConfig cfg = Resolve(f);
  for (std::uint64_t seed : cfg.seeds) {
    const TrainResult r = Train(cfg, seed, SeedDir(cfg, seed));
    WriteTrainOutputs(cfg, seed, r);
    std::cout << "seed " << seed << ": " << r.log.episodes.size() << " episodes, " << r.log.wall_seconds << " s -> "
              << SeedDir(cfg, seed) << "\n";
  }
  return 0;
}

int RunEval(const CommonFlags& f, const std::string& policy, const std::string& checkpoint) {
  const ExperimentConfig cfg = Resolve(f);
  for (std::uint64_t seed : cfg.seeds) {
    std::vector<TraceRow> trace;
    EvalReport report;
    if (IsBaseline(policy)) {
      auto c = MakeBaseline(policy, cfg, cfg.baselines);
      report = Evaluate(*c, cfg, seed, &trace);
    } else if (policy == "hybrid" || policy == "simple_dqn") {
      const std::string dir = checkpoint.empty() ? SeedDir(cfg, seed) : checkpoint;
      ExperimentConfig pc = cfg;
      if (policy == "simple_dqn") pc.ablation.no_a3c = true;
      const auto agent = LoadAgent(pc, dir, seed);
      if (policy == "simple_dqn") {
        SimpleDqnController c(agent->dqn().qnet(), NormalizationFor(pc), pc.env.bounds, pc.ablation.no_temporal);
        report = Evaluate(c, pc, seed, &trace);
      } else {
        report = EvaluateAgent(*agent, pc, seed, &trace);
      }
    } else {
      throw ConfigError("unknown policy '" + policy + "'");
    }
    const std::string dir = SeedDir(cfg, seed);
    std::filesystem::create_directories(dir);
    auto rep = OpenOutput(dir + "/report_" + policy + ".csv");
    WriteReportCsv(rep, policy, seed, report);
    auto tr = OpenOutput(dir + "/trace_" + policy + ".csv");
    WriteTraceCsv(tr, trace);
    std::cout << policy << " seed " << seed << ": throughput " << report.throughput << " req/s, p99 "
              << report.latency_p99 << " ms, sla " << report.sla_compliance << "\n";
  }
  return 0;
}

const std::vector<TrafficKind> kAllPatterns = {TrafficKind::kPeriodic, TrafficKind::kBurst, TrafficKind::kMixed};

int RunTune(const CommonFlags& f) {
  const ExperimentConfig cfg = Resolve(f);
  const TuningResult t = TuneBaselines(cfg, kAllPatterns);
  auto os = OpenOutput(cfg.output_dir + "/tuning.csv");
  WriteTuningCsv(os, t);
  for (const auto& [kind, cc] : t.best) {
    std::cout << ToString(kind) << ": fixed_threshold " << cc.fixed_threshold << "\n";
  }
  return 0;
}

int RunCompare(const CommonFlags& f, const std::vector<std::string>& policies, bool tune) {
  const ExperimentConfig cfg = Resolve(f);
  std::map<TrafficKind, ControllerConfig> tuned;
  if (tune) {
    const TuningResult t = TuneBaselines(cfg, kAllPatterns);
    tuned = t.best;
    auto os = OpenOutput(cfg.output_dir + "/tuning.csv");
    WriteTuningCsv(os, t);
  }
  AgentCache cache([](const ExperimentConfig& c, std::uint64_t seed, const TrainResult& r) {
    std::cout << "trained " << ToString(c.pattern.kind) << (c.ablation.no_a3c ? " (dqn only)" : "") << " seed "
              << seed << " in " << r.log.wall_seconds << " s\n";
  });
  const CompareTable table = Compare(cfg, policies, kAllPatterns, tuned, cache);
  auto rows = OpenOutput(cfg.output_dir + "/compare.csv");
  WriteCompareCsv(rows, table);
  auto summary = OpenOutput(cfg.output_dir + "/compare_summary.csv");
  WriteCompareSummaryCsv(summary, table);
  auto plot = OpenOutput(cfg.output_dir + "/compare_plot.csv");
  WritePlotCsv(plot, ComparePlot(table));
  WriteCompareSummaryCsv(std::cout, table);
  return 0;
}

int RunAblate(const CommonFlags& f) {
  const ExperimentConfig cfg = Resolve(f);
  AgentCache cache;
  const AblationTable table = Ablate(cfg, cache);
  auto os = OpenOutput(cfg.output_dir + "/ablation.csv");
  WriteAblationCsv(os, table);
  auto plot = OpenOutput(cfg.output_dir + "/ablation_plot.csv");
  WritePlotCsv(plot, AblationPlot(table));
  WriteAblationCsv(std::cout, table);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adaptive rate limiting with a hybrid DQN / actor-critic agent"};
  app.require_subcommand(1);

  CommonFlags train_f, eval_f, compare_f, ablate_f, tune_f;
  std::string policy = "hybrid", checkpoint;
  std::vector<std::string> policies = {"hybrid", "simple_dqn", "fixed", "cpu", "aimd", "pid"};
  bool no_tune = false;

  auto* train = app.add_subcommand("train", "Train the hybrid agent and write checkpoints and logs");
  AddCommon(train, train_f);
  auto* eval = app.add_subcommand("eval", "Evaluate a trained agent or a baseline");
  AddCommon(eval, eval_f);
  eval->add_option("--policy", policy, "hybrid, simple_dqn, fixed, fixed_untuned, cpu, aimd or pid");
  eval->add_option("--checkpoint", checkpoint, "Checkpoint directory (default <out>/seed_<seed>)");
  auto* compare = app.add_subcommand("compare", "Compare policies across traffic patterns");
  AddCommon(compare, compare_f);
  compare->add_option("--policies", policies, "Policies to compare")->delimiter(',');
  compare->add_flag("--no-tune", no_tune, "Use the config's baseline parameters as they are");
  auto* ablate = app.add_subcommand("ablate", "Train and score the ablation variants");
  AddCommon(ablate, ablate_f);
  auto* tune = app.add_subcommand("tune-baselines", "Grid-search baseline parameters per traffic pattern");
  AddCommon(tune, tune_f);

  CLI11_PARSE(app, argc, argv);
  try {
    if (*train) return RunTrain(train_f);
    if (*eval) return RunEval(eval_f, policy, checkpoint);
    if (*compare) return RunCompare(compare_f, policies, !no_tune);
    if (*ablate) return RunAblate(ablate_f);
    if (*tune) return RunTune(tune_f);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
