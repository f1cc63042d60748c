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

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "ratelab/ratelab.hpp"

namespace ratelab {
namespace {

ExperimentConfig TinyConfig() {
  ExperimentConfig cfg;
  cfg.dqn.hidden = {16, 16};
  cfg.dqn.batch = 16;
  cfg.a3c.trunk = {16};
  cfg.a3c.workers = 1;
  cfg.training_steps = 1200;
  cfg.episode_horizon = 300;
  cfg.eval_duration = 300;
  return cfg;
}

TrafficPattern ConstantRate(double rate) {
  TrafficPattern p;
  p.kind = TrafficKind::kBurst;
  p.base_rate = rate;
  p.burst_mean_interval = std::numeric_limits<double>::infinity();
  return p;
}

// Config parsing.

TEST(Config, ParsesKnownKeysAndComments) {
  const auto cfg = ParseConfigString(
      "# desk run\n"
      "training_steps = 5000   # short\n"
      "dqn.hidden = 32, 32\n"
      "pattern.kind = periodic\n"
      "seeds = 3,4\n"
      "\n"
      "ablation.no_replay = true\n");
  EXPECT_EQ(cfg.training_steps, 5000);
  EXPECT_EQ(cfg.dqn.hidden, (std::vector<int>{32, 32}));
  EXPECT_EQ(cfg.pattern.kind, TrafficKind::kPeriodic);
  EXPECT_EQ(cfg.seeds, (std::vector<std::uint64_t>{3, 4}));
  EXPECT_TRUE(cfg.ablation.no_replay);
}

TEST(Config, RejectsUnknownKeysAndBadValues) {
  EXPECT_THROW(ParseConfigString("trainig_steps = 5\n"), ConfigError);
  EXPECT_THROW(ParseConfigString("training_steps = five\n"), ConfigError);
  EXPECT_THROW(ParseConfigString("pattern.kind = sawtooth\n"), ConfigError);
  EXPECT_THROW(ParseConfigString("no equals sign\n"), ConfigError);
  ExperimentConfig bad;
  bad.training_steps = 100;
  EXPECT_THROW(bad.Validate(), ConfigError);
  bad = {};
  bad.seeds.clear();
  EXPECT_THROW(bad.Validate(), ConfigError);
}

TEST(Config, DumpRoundTrips) {
  ExperimentConfig cfg;
  cfg.env.capacity_variation = 0.2;
  cfg.dqn.lr = 3.3e-4;
  cfg.a3c.trunk = {64, 32};
  cfg.fusion_mode = FusionMode::kBlend;
  cfg.seeds = {1, 2, 3};
  cfg.deterministic_eval = true;
  const std::string text = DumpConfig(cfg);
  const ExperimentConfig back = ParseConfigString(text);
  EXPECT_EQ(DumpConfig(back), text);
  EXPECT_EQ(back.dqn.lr, 3.3e-4);
  EXPECT_EQ(back.fusion_mode, FusionMode::kBlend);
}

TEST(Config, ValueInitDefaultsToReturnScale) {
  ExperimentConfig cfg;
  cfg.episode_horizon = 500;
  double geometric = 0.0;  // sum_{k<500} 0.99^k
  for (int k = 0; k < 500; ++k) geometric += std::pow(0.99, k);
  EXPECT_NEAR(cfg.ValueInit(), 0.45 * geometric, 1e-9);

  cfg.environment = EnvKind::kBandit;
  cfg.bandit_rewards = {0.2, 0.8, 0.5};
  EXPECT_NEAR(cfg.ValueInit(), 0.5, 1e-12);

  SetConfigValue(cfg, "value_init", "7.25");
  EXPECT_EQ(cfg.ValueInit(), 7.25);
  EXPECT_EQ(ParseConfigString(DumpConfig(cfg)).ValueInit(), 7.25);
  SetConfigValue(cfg, "value_init", "auto");
  EXPECT_FALSE(cfg.value_init.has_value());
}

TEST(Config, ShippedConfigsLoadAndValidate) {
  for (const auto& entry : std::filesystem::directory_iterator(RATELAB_CONFIG_DIR)) {
    if (entry.path().extension() != ".cfg") continue;
    EXPECT_NO_THROW(LoadConfig(entry.path().string()).Validate()) << entry.path();
  }
}

// Percentiles.

TEST(Percentile, NearestRankExamples) {
  std::vector<double> v(100);
  std::iota(v.begin(), v.end(), 1.0);
  EXPECT_EQ(Percentile(v, 0.99), 99.0);
  EXPECT_EQ(Percentile(v, 0.50), 50.0);
  EXPECT_EQ(Percentile(v, 1.0), 100.0);
  EXPECT_EQ(Percentile(v, 0.0), 1.0);
  EXPECT_EQ(Percentile(std::vector<double>(100, 7.5), 0.9), 7.5);
  EXPECT_THROW(Percentile({}, 0.5), DomainError);
}

TEST(Percentile, MatchesSortedRankOracle) {
  Rng rng = MakeRng(1, {});
  for (int trial = 0; trial < 200; ++trial) {
    const auto n = 1 + static_cast<std::size_t>(UniformIndex(rng, 300));
    std::vector<double> v(n);
    for (auto& x : v) x = 1000.0 * Uniform01(rng);
    std::vector<double> sorted = v;
    std::sort(sorted.begin(), sorted.end());
    const double p = Uniform01(rng);
    // Smallest element with at least p*n elements at or below it.
    std::size_t k = 0;
    while (static_cast<double>(k + 1) < p * static_cast<double>(n) - 1e-9) ++k;
    EXPECT_EQ(Percentile(v, p), sorted[k]);
  }
}

TEST(WeightedPercentile, UnitWeightsMatchPlain) {
  Rng rng = MakeRng(2, {});
  std::vector<double> plain;
  std::vector<LatencySample> weighted;
  for (int i = 0; i < 157; ++i) {
    plain.push_back(500.0 * Uniform01(rng));
    weighted.push_back({plain.back(), 1.0});
  }
  for (double p : {0.01, 0.5, 0.9, 0.99, 1.0}) EXPECT_EQ(WeightedPercentile(weighted, p), Percentile(plain, p));
}

TEST(WeightedPercentile, WeightsActAsMultiplicity) {
  const std::vector<LatencySample> s = {{10.0, 98.0}, {400.0, 1.0}, {900.0, 1.0}};
  EXPECT_EQ(WeightedPercentile(s, 0.50), 10.0);
  EXPECT_EQ(WeightedPercentile(s, 0.98), 10.0);
  EXPECT_EQ(WeightedPercentile(s, 0.99), 400.0);
  EXPECT_EQ(WeightedPercentile(s, 1.0), 900.0);
  EXPECT_EQ(WeightedPercentile({{400.0, 3.0}, {400.0, 5.0}}, 0.99), 400.0);
  EXPECT_THROW(WeightedPercentile({}, 0.5), DomainError);
}

// Evaluation.

TEST(Evaluate, LightTrafficUnderHalfCapacityIsFullyAvailable) {
  ExperimentConfig cfg;
  cfg.pattern.kind = TrafficKind::kPeriodic;
  cfg.pattern.base_rate = 1000.0;
  cfg.eval_duration = 400;
  ControllerConfig cc;
  cc.fixed_threshold = cfg.env.service_capacity / 2;
  auto c = MakeBaseline("fixed", cfg, cc);
  std::vector<TraceRow> trace;
  const EvalReport r = Evaluate(*c, cfg, 3, &trace);
  EXPECT_DOUBLE_EQ(r.availability, 1.0);
  std::int64_t rejected = 0;
  double peak = 0.0;
  for (const auto& t : trace) {
    rejected += t.rejected;
    peak = std::max(peak, t.offered_rate);
  }
  ASSERT_LT(peak, cc.fixed_threshold);
  EXPECT_EQ(rejected, 0);
  EXPECT_FALSE(r.degenerate);
}

TEST(Evaluate, AllServedNearBaseLatencyMeetsSla) {
  ExperimentConfig cfg;
  cfg.env.base_latency_ms = 400.0;
  cfg.env.latency_spread = 0.0;
  cfg.pattern = ConstantRate(10.0);
  cfg.eval_duration = 100;
  auto c = MakeBaseline("fixed", cfg, {});
  const EvalReport r = Evaluate(*c, cfg, 4);
  EXPECT_EQ(r.sla_compliance, 1.0);
  // Utilization is ~0.1%, so queueing adds well under a millisecond.
  EXPECT_NEAR(r.latency_p99, 400.0, 1.0);
  EXPECT_LE(r.latency_p50, r.latency_p90);
  EXPECT_LE(r.latency_p90, r.latency_p99);
}

TEST(Evaluate, TenfoldOverloadLeavesTenPercentAvailable) {
  ExperimentConfig cfg;
  cfg.pattern = ConstantRate(10.0 * cfg.env.service_capacity);
  cfg.pattern.noise_std = 0.0;
  cfg.baselines.fixed_threshold = cfg.env.bounds.max;
  cfg.eval_duration = 1000;
  auto c = MakeBaseline("fixed", cfg, cfg.baselines);
  const EvalReport r = Evaluate(*c, cfg, 5);
  // mu / (10 mu); the queue's initial fill is worth 50000 / (1000 * 10 * 120000).
  EXPECT_NEAR(r.availability, 0.1, 0.005);
  EXPECT_NEAR(r.throughput, cfg.env.service_capacity, 0.01 * cfg.env.service_capacity);
  EXPECT_FALSE(r.error_constraint_ok);
}

TEST(Evaluate, ReportInvariantsAcrossControllersAndPatterns) {
  ExperimentConfig cfg;
  cfg.env.capacity_variation = 0.2;
  cfg.eval_duration = 300;
  for (TrafficKind kind : {TrafficKind::kPeriodic, TrafficKind::kBurst, TrafficKind::kMixed}) {
    for (const char* name : {"fixed", "cpu", "aimd", "pid"}) {
      for (std::uint64_t seed : {1, 2}) {
        auto c = MakeBaseline(name, WithPattern(cfg, kind), cfg.baselines);
        const EvalReport r = Evaluate(*c, WithPattern(cfg, kind), seed);
        EXPECT_LE(r.latency_p50, r.latency_p90);
        EXPECT_LE(r.latency_p90, r.latency_p99);
        for (double f : {r.availability, r.sla_compliance, r.latency_over_max_fraction, r.resource_over_fraction,
                         r.mean_cpu, r.mean_mem, r.threshold_out_of_range_fraction}) {
          EXPECT_GE(f, 0.0);
          EXPECT_LE(f, 1.0);
        }
        EXPECT_EQ(r.threshold_out_of_range_fraction, 0.0);
        EXPECT_NEAR(r.composite, r.mean_reward * cfg.episode_horizon, 1e-9);
      }
    }
  }
}

TEST(Evaluate, ZeroTrafficIsFlaggedDegenerate) {
  ExperimentConfig cfg;
  cfg.pattern = ConstantRate(1e-9);
  cfg.pattern.noise_std = 0.0;
  cfg.eval_duration = 20;
  auto c = MakeBaseline("fixed", cfg, {});
  const EvalReport r = Evaluate(*c, cfg, 6);
  EXPECT_TRUE(r.degenerate);
  EXPECT_EQ(r.availability, 1.0);
}

TEST(Evaluate, SameSeedSameReport) {
  ExperimentConfig cfg;
  cfg.env.capacity_variation = 0.2;
  cfg.eval_duration = 200;
  auto a = MakeBaseline("aimd", cfg, {});
  auto b = MakeBaseline("aimd", cfg, {});
  std::ostringstream ra, rb;
  WriteReportCsv(ra, "aimd", 9, Evaluate(*a, cfg, 9));
  WriteReportCsv(rb, "aimd", 9, Evaluate(*b, cfg, 9));
  EXPECT_EQ(ra.str(), rb.str());
}

// Comparison.

TEST(Compare, SelfComparisonHasZeroDeltas) {
  ExperimentConfig cfg;
  cfg.eval_duration = 100;
  cfg.seeds = {1};
  AgentCache cache;
  const auto t = Compare(cfg, {"fixed", "fixed"}, {TrafficKind::kMixed}, {}, cache);
  ASSERT_EQ(t.rows.size(), 2u);
  ASSERT_EQ(t.means.size(), 2u);
  EXPECT_EQ(t.rows[0].report.throughput, t.rows[1].report.throughput);
  for (const auto& m : t.means) {
    EXPECT_EQ(m.throughput_delta_pct, 0.0);
    EXPECT_EQ(m.p99_delta_pct, 0.0);
    EXPECT_EQ(m.sla_delta_pct, 0.0);
  }
  EXPECT_EQ(cache.size(), 0u);
}

TEST(Compare, DeltasAgreeWithAbsoluteColumnsAndShape) {
  ExperimentConfig cfg;
  cfg.env.capacity_variation = 0.2;
  cfg.eval_duration = 200;
  cfg.seeds = {1, 2};
  AgentCache cache;
  const std::vector<std::string> policies = {"fixed", "cpu", "aimd", "pid"};
  const std::vector<TrafficKind> patterns = {TrafficKind::kPeriodic, TrafficKind::kBurst};
  const auto t = Compare(cfg, policies, patterns, {}, cache);
  EXPECT_EQ(t.rows.size(), policies.size() * patterns.size() * cfg.seeds.size());
  ASSERT_EQ(t.means.size(), policies.size() * patterns.size());
  for (const auto& m : t.means) {
    const auto ref = std::find_if(t.means.begin(), t.means.end(),
                                  [&](const CompareMean& x) { return x.pattern == m.pattern && x.policy == "fixed"; });
    ASSERT_NE(ref, t.means.end());
    EXPECT_NEAR(m.throughput_delta_pct, 100.0 * (m.throughput - ref->throughput) / ref->throughput, 1e-9);
    EXPECT_NEAR(m.p99_delta_pct, 100.0 * (m.latency_p99 - ref->latency_p99) / ref->latency_p99, 1e-9);
    EXPECT_NEAR(m.sla_delta_pct, 100.0 * (m.sla_compliance - ref->sla_compliance) / ref->sla_compliance, 1e-9);
    double thr = 0.0;
    int n = 0;
    for (const auto& r : t.rows) {
      if (r.pattern == m.pattern && r.policy == m.policy) {
        thr += r.report.throughput;
        ++n;
      }
    }
    EXPECT_EQ(n, 2);
    EXPECT_NEAR(m.throughput, thr / n, 1e-9);
  }
}

TEST(Compare, SingleSeedSinglePatternGivesOneRowPerPolicy) {
  ExperimentConfig cfg;
  cfg.eval_duration = 50;
  AgentCache cache;
  const auto t = Compare(cfg, {"fixed", "aimd", "pid"}, {TrafficKind::kBurst}, {}, cache);
  ASSERT_EQ(t.rows.size(), 3u);
  EXPECT_EQ(t.rows[0].policy, "fixed");
  EXPECT_EQ(t.rows[1].policy, "aimd");
  EXPECT_EQ(t.rows[2].policy, "pid");
}

TEST(PercentDelta, Examples) {
  EXPECT_NEAR(PercentDelta(130.9, 100.0), 30.9, 1e-12);
  EXPECT_NEAR(PercentDelta(61.8, 100.0), -38.2, 1e-12);
  EXPECT_EQ(PercentDelta(0.0, 0.0), 0.0);
}

TEST(Tuning, PicksTheBestScoringCandidate) {
  ExperimentConfig cfg;
  cfg.eval_duration = 60;
  cfg.seeds = {1};
  const auto t = TuneBaselines(cfg, {TrafficKind::kMixed}, {"fixed", "aimd"});
  for (const std::string controller : {"fixed", "aimd"}) {
    double best = -std::numeric_limits<double>::infinity();
    int flagged = 0;
    for (const auto& r : t.rows) {
      if (r.controller != controller) continue;
      best = std::max(best, r.score);
    }
    for (const auto& r : t.rows) {
      if (r.controller == controller && r.best) {
        ++flagged;
        EXPECT_EQ(r.score, best);
      }
    }
    EXPECT_EQ(flagged, 1) << controller;
  }
  ASSERT_EQ(t.best.count(TrafficKind::kMixed), 1u);
  // The chosen fixed threshold re-scores to the best row's score on the tuning seeds.
  ExperimentConfig check = cfg;
  auto c = MakeBaseline("fixed", check, t.best.at(TrafficKind::kMixed));
  double best_fixed = 0.0;
  for (const auto& r : t.rows) {
    if (r.controller == "fixed" && r.best) best_fixed = r.score;
  }
  EXPECT_NEAR(Evaluate(*c, check, 1 + kTuningSeedOffset).composite, best_fixed, 1e-9);
}

// Ablation.

TEST(Ablation, PercentOfFullExamples) {
  EXPECT_DOUBLE_EQ(PercentOfFull(200.0, 200.0), 100.0);
  EXPECT_DOUBLE_EQ(PercentOfFull(180.0, 200.0), 90.0);
  EXPECT_DOUBLE_EQ(PercentOfFull(-110.0, -100.0), 90.0);
  EXPECT_DOUBLE_EQ(PercentOfFull(-90.0, -100.0), 110.0);
  EXPECT_DOUBLE_EQ(PercentOfFull(0.0, 0.0), 100.0);
}

TEST(Ablation, FullAgainstFullIsOneHundredPercent) {
  ExperimentConfig cfg = TinyConfig();
  cfg.seeds = {1, 2};
  AgentCache cache;
  const auto t = Ablate(cfg, cache, {{"full", {}}, {"full_again", {}}});
  EXPECT_EQ(cache.size(), 2u);  // both variants share the cached runs
  ASSERT_EQ(t.summary.size(), 2u);
  for (const auto& s : t.summary) EXPECT_DOUBLE_EQ(s.percent_of_full, 100.0);
  for (const auto& r : t.rows) EXPECT_DOUBLE_EQ(r.percent_of_full, 100.0);
}

TEST(Ablation, FlagsReachTheAgent) {
  ExperimentConfig cfg = TinyConfig();
  cfg.ablation.no_a3c = true;
  EXPECT_FALSE(cfg.Options().use_a3c);
  cfg.ablation = {};
  cfg.ablation.no_replay = true;
  EXPECT_FALSE(cfg.Options().use_replay);
  cfg.ablation = {};
  cfg.ablation.no_target_net = true;
  EXPECT_FALSE(cfg.Options().use_target_net);
  const HybridOptions plain = ExperimentConfig{}.Options();
  EXPECT_TRUE(plain.use_replay && plain.use_target_net && plain.use_a3c);

  cfg.ablation = {};
  cfg.ablation.no_temporal = true;
  RateLimitEnv env(cfg.env, cfg.pattern, cfg.reward, true);
  for (int i = 0; i < 50; ++i) {
    const auto s = env.StepThreshold(cfg.env.service_capacity);
    EXPECT_EQ(s.rl.observation[7], 0.0);
    EXPECT_EQ(s.rl.observation[8], 0.0);
  }
}

// Training.

TEST(Train, ZeroStepsGivesEmptyLogAndUntrainedAgent) {
  ExperimentConfig cfg = TinyConfig();
  cfg.training_steps = 0;
  const TrainResult r = Train(cfg, 1);
  EXPECT_TRUE(r.log.episodes.empty());
  EXPECT_TRUE(r.log.updates.empty());
  EXPECT_EQ(r.steps, 0);
  Rng init = MakeRng(1, {HybridAgent::kInitStream});
  Mlp fresh = Mlp::HeInit({9, 16, 16, 7}, init);
  fresh.params().layers.back().bias.setConstant(cfg.ValueInit());
  EXPECT_TRUE(r.agent->dqn().qnet().params() == fresh.params());
}

TEST(Train, LogShapeAndSchedules) {
  ExperimentConfig cfg = TinyConfig();
  const TrainResult r = Train(cfg, 2);
  EXPECT_EQ(r.steps, cfg.training_steps);
  ASSERT_EQ(r.log.episodes.size(), 4u);
  std::int64_t covered = 0;
  for (std::size_t i = 0; i < r.log.episodes.size(); ++i) {
    const auto& e = r.log.episodes[i];
    EXPECT_EQ(e.episode, static_cast<std::int64_t>(i));
    covered += e.length;
    EXPECT_EQ(e.end_step, covered);
    EXPECT_TRUE(std::isfinite(e.cum_reward));
  }
  EXPECT_EQ(covered, cfg.training_steps);
  ASSERT_EQ(r.log.epsilon_trace.size(), static_cast<std::size_t>(cfg.training_steps));
  for (std::size_t t = 0; t < r.log.epsilon_trace.size(); ++t) {
    EXPECT_DOUBLE_EQ(r.log.epsilon_trace[t], Epsilon(static_cast<std::int64_t>(t), cfg.dqn));
    EXPECT_DOUBLE_EQ(r.log.alpha_trace[t], Alpha(static_cast<std::int64_t>(t), cfg.EffectiveFusion()));
  }
}

TEST(Train, SingleWorkerRunsAreBitReproducible) {
  ExperimentConfig cfg = TinyConfig();
  std::ostringstream a, b, ra, rb;
  const TrainResult x = Train(cfg, 3);
  const TrainResult y = Train(cfg, 3);
  WriteConvergenceCsv(a, x.log);
  WriteConvergenceCsv(b, y.log);
  EXPECT_EQ(a.str(), b.str());
  WriteReportCsv(ra, "hybrid", 3, EvaluateAgent(*x.agent, cfg, 3));
  WriteReportCsv(rb, "hybrid", 3, EvaluateAgent(*y.agent, cfg, 3));
  EXPECT_EQ(ra.str(), rb.str());
  EXPECT_TRUE(x.agent->dqn().qnet().params() == y.agent->dqn().qnet().params());
}

TEST(Train, ParallelWorkersStayFiniteAndContribute) {
  ExperimentConfig cfg = TinyConfig();
  cfg.a3c.workers = 3;
  const TrainResult r = Train(cfg, 4);
  EXPECT_GT(r.log.background_updates, 0);
  EXPECT_TRUE(r.agent->store().Snapshot().params().AllFinite());
}

TEST(Train, BanditConverges) {
  ExperimentConfig cfg = TinyConfig();
  cfg.environment = EnvKind::kBandit;
  cfg.bandit_rewards = {0.2, 0.0, 0.1, 1.0, 0.3, 0.5, 0.4};
  cfg.dqn.lr = 1e-3;
  cfg.dqn.decay_steps = 1000;
  cfg.a3c.lr = 1e-3;
  cfg.training_steps = 3000;
  cfg.episode_horizon = 1;
  const TrainResult r = Train(cfg, 5);
  const Vector s = BanditEnv(cfg.bandit_rewards).Reset();
  Rng rng = MakeRng(0, {});
  EXPECT_EQ(r.agent->Decide(s, r.agent->FinalAlpha(), EvalMode::kDeterministic, rng), 3);
  EXPECT_EQ(Argmax(r.agent->dqn().qnet().Forward(s)), 3);
}

TEST(Train, CheckpointsRoundTrip) {
  ExperimentConfig cfg = TinyConfig();
  const TrainResult r = Train(cfg, 6);
  const auto dir = (std::filesystem::temp_directory_path() / "ratelab_harness_ckpt").string();
  SaveAgent(*r.agent, dir, {r.steps, 0.7, 0.05, 6});
  for (const char* f : {"dqn_main.ckpt", "dqn_target.ckpt", "a3c_global.ckpt", "manifest.txt"}) {
    EXPECT_TRUE(std::filesystem::exists(dir + "/" + f)) << f;
  }
  const auto loaded = LoadAgent(cfg, dir, 6);
  EXPECT_TRUE(loaded->dqn().qnet().params() == r.agent->dqn().qnet().params());
  EXPECT_TRUE(loaded->dqn().target().params() == r.agent->dqn().target().params());
  EXPECT_TRUE(loaded->store().Snapshot().params() == r.agent->store().Snapshot().params());
  std::ostringstream a, b;
  WriteReportCsv(a, "hybrid", 6, EvaluateAgent(*r.agent, cfg, 6));
  WriteReportCsv(b, "hybrid", 6, EvaluateAgent(*loaded, cfg, 6));
  EXPECT_EQ(a.str(), b.str());
  std::filesystem::remove_all(dir);
  EXPECT_THROW(LoadAgent(cfg, dir, 6), CheckpointError);
}

TEST(Train, DecisionLatencyUnderFiveMilliseconds) {
  ExperimentConfig cfg;
  cfg.training_steps = 0;
  const TrainResult r = Train(cfg, 7);
  EXPECT_LT(MeasureDecisionLatencyMs(*r.agent, cfg), 5.0);
}

// CSV output.

TEST(Csv, HeadersAndRowCounts) {
  ExperimentConfig cfg = TinyConfig();
  const TrainResult r = Train(cfg, 8);
  std::ostringstream conv, sched, report, trace;
  WriteConvergenceCsv(conv, r.log);
  WriteScheduleCsv(sched, r.log, 100);
  auto c = MakeBaseline("aimd", cfg, {});
  std::vector<TraceRow> rows;
  WriteReportCsv(report, "aimd", 8, Evaluate(*c, cfg, 8, &rows));
  WriteTraceCsv(trace, rows);
  auto lines = [](const std::string& s) { return std::count(s.begin(), s.end(), '\n'); };
  EXPECT_EQ(conv.str().substr(0, conv.str().find('\n')),
            "episode,end_step,length,cum_reward,epsilon,alpha,mean_dqn_loss,mean_a3c_loss,terminal");
  EXPECT_EQ(lines(conv.str()), 1 + static_cast<long>(r.log.episodes.size()));
  EXPECT_EQ(lines(sched.str()), 1 + 12);
  EXPECT_EQ(lines(report.str()), 2);
  EXPECT_EQ(lines(trace.str()), 1 + cfg.eval_duration);
  // Header and data rows have the same number of cells.
  const std::string rep = report.str();
  const auto nl = rep.find('\n');
  EXPECT_EQ(std::count(rep.begin(), rep.begin() + nl, ','), std::count(rep.begin() + nl + 1, rep.end(), ','));
}

TEST(Csv, DoublesRoundTrip) {
  ConvergenceLog log;
  EpisodeRecord e;
  e.cum_reward = 0.1 + 0.2;
  log.episodes.push_back(e);
  std::ostringstream os;
  WriteConvergenceCsv(os, log);
  std::istringstream in(os.str());
  std::string header, row;
  std::getline(in, header);
  std::getline(in, row);
  std::vector<std::string> cells;
  std::stringstream rs(row);
  for (std::string cell; std::getline(rs, cell, ',');) cells.push_back(cell);
  ASSERT_GE(cells.size(), 4u);
  EXPECT_EQ(std::stod(cells[3]), 0.1 + 0.2);
}

}  // namespace
}  // namespace ratelab
