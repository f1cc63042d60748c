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

// Experiment configuration and its text format.
//
// One `key = value` per line, `#` starts a comment. Keys are the dotted
// field names of ExperimentConfig (`env.service_capacity`, `dqn.lr`,
// `ablation.no_replay`, ...); lists are comma separated. Unknown keys and
// malformed values are errors.

#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <limits>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

#include "ratelab/agents.hpp"
#include "ratelab/baselines.hpp"
#include "ratelab/env_sim.hpp"
#include "ratelab/hybrid.hpp"
#include "ratelab/metrics.hpp"
#include "ratelab/reward.hpp"

namespace ratelab {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct AblationFlags {
  bool no_replay = false;
  bool no_target_net = false;
  bool no_a3c = false;
  bool no_temporal = false;

  friend bool operator==(const AblationFlags&, const AblationFlags&) = default;
};

enum class EnvKind { kRateLimit, kBandit };

struct ExperimentConfig {
  EnvKind environment = EnvKind::kRateLimit;
  std::vector<double> bandit_rewards = {0.0, 1.0};
  EnvConfig env;
  TrafficPattern pattern;
  RewardConfig reward;
  DqnConfig dqn;
  A3cConfig a3c;
  FusionSchedule fusion;  // total_steps <= 0 follows training_steps
  FusionMode fusion_mode = FusionMode::kProbabilistic;
  ControllerConfig baselines;
  EvalConstraints constraints;
  std::int64_t training_steps = 20000;
  std::int64_t episode_horizon = 500;
  std::int64_t eval_duration = 1500;
  std::vector<std::uint64_t> seeds = {1};
  std::string output_dir = "out";
  AblationFlags ablation;
  bool deterministic_eval = false;
  std::optional<double> value_init;  // empty: ReturnScale()

  /// Discounted return of a mid-range reward held for one episode. Value
  /// outputs start here instead of at zero; with gamma = 0.99 the true
  /// values sit near 50 and Adam would need most of a desk-scale run to
  /// climb there from zero.
  double ReturnScale() const {
    if (environment == EnvKind::kBandit) {  // every pull is terminal
      const auto [lo, hi] = std::minmax_element(bandit_rewards.begin(), bandit_rewards.end());
      return 0.5 * (*lo + *hi);
    }
    const double mid = 0.5 * (reward.w1 + reward.w2);
    return mid * (1.0 - std::pow(dqn.gamma, static_cast<double>(episode_horizon))) / (1.0 - dqn.gamma);
  }

  double ValueInit() const { return value_init.value_or(ReturnScale()); }

  FusionSchedule EffectiveFusion() const {
    FusionSchedule f = fusion;
    if (f.total_steps <= 0) f.total_steps = std::max<std::int64_t>(1, training_steps);
    return f;
  }

  HybridOptions Options() const {
    HybridOptions o;
    o.use_replay = !ablation.no_replay;
    o.use_target_net = !ablation.no_target_net;
    o.use_a3c = !ablation.no_a3c;
    o.fusion_mode = fusion_mode;
    return o;
  }

  void Validate() const {
    env.Validate();
    pattern.Validate();
    reward.Validate();
    dqn.Validate();
    a3c.Validate();
    EffectiveFusion().Validate();
    baselines.Validate();
    constraints.Validate();
    if (training_steps < 0) throw ConfigError("training_steps must be non-negative");
    if (episode_horizon < 1) throw ConfigError("episode_horizon must be >= 1");
    if (training_steps > 0 && training_steps < episode_horizon) {
      throw ConfigError("training_steps must be at least episode_horizon");
    }
    if (eval_duration < 1) throw ConfigError("eval_duration must be >= 1");
    if (seeds.empty()) throw ConfigError("at least one seed is required");
    if (environment == EnvKind::kBandit && bandit_rewards.size() < 2) throw ConfigError("bandit needs two arms");
  }
};

namespace detail {

inline std::string Trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

inline double ParseDouble(const std::string& v) {
  if (v == "inf") return std::numeric_limits<double>::infinity();
  std::size_t pos = 0;
  double d = 0.0;
  try {
    d = std::stod(v, &pos);
  } catch (const std::exception&) {
    throw ConfigError("not a number: '" + v + "'");
  }
  if (pos != v.size()) throw ConfigError("not a number: '" + v + "'");
  return d;
}

template <typename Int>
Int ParseInt(const std::string& v) {
  Int out{};
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) throw ConfigError("not an integer: '" + v + "'");
  return out;
}

inline bool ParseBool(const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("not a boolean: '" + v + "'");
}

inline std::vector<std::string> SplitList(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = Trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

template <typename T>
std::string Format(const T& v) {
  if constexpr (std::is_same_v<T, bool>) {
    return v ? "true" : "false";
  } else if constexpr (std::is_floating_point_v<T>) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
  } else {
    return std::to_string(v);
  }
}

template <typename T>
std::string FormatList(const std::vector<T>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + Format(v[i]);
  return out;
}

struct Field {
  std::string key;
  std::function<void(ExperimentConfig&, const std::string&)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

template <typename T, typename Member>
Field Scalar(std::string key, Member member) {
  return {std::move(key),
          [member](ExperimentConfig& c, const std::string& v) {
            T& slot = member(c);
            if constexpr (std::is_same_v<T, bool>) {
              slot = ParseBool(v);
            } else if constexpr (std::is_floating_point_v<T>) {
              slot = ParseDouble(v);
            } else {
              slot = ParseInt<T>(v);
            }
          },
          [member](const ExperimentConfig& c) { return Format(member(const_cast<ExperimentConfig&>(c))); }};
}

inline std::vector<Field> ConfigFields() {
  using C = ExperimentConfig;
#define RL_D(key, expr) Scalar<double>(key, [](C& c) -> double& { return expr; })
#define RL_I(key, expr) Scalar<std::int64_t>(key, [](C& c) -> std::int64_t& { return expr; })
#define RL_B(key, expr) Scalar<bool>(key, [](C& c) -> bool& { return expr; })
  std::vector<Field> f = {
      {"environment",
       [](C& c, const std::string& v) {
         if (v == "ratelimit") c.environment = EnvKind::kRateLimit;
         else if (v == "bandit") c.environment = EnvKind::kBandit;
         else throw ConfigError("environment must be ratelimit or bandit");
       },
       [](const C& c) { return std::string(c.environment == EnvKind::kBandit ? "bandit" : "ratelimit"); }},
      {"bandit.rewards",
       [](C& c, const std::string& v) {
         c.bandit_rewards.clear();
         for (const auto& s : SplitList(v)) c.bandit_rewards.push_back(ParseDouble(s));
       },
       [](const C& c) { return FormatList(c.bandit_rewards); }},
      RL_D("env.service_capacity", c.env.service_capacity),
      RL_D("env.queue_capacity", c.env.queue_capacity),
      RL_D("env.base_latency_ms", c.env.base_latency_ms),
      RL_D("env.step_duration", c.env.step_duration),
      RL_D("env.time_compression", c.env.time_compression),
      Scalar<std::uint64_t>("env.seed", [](C& c) -> std::uint64_t& { return c.env.seed; }),
      RL_D("env.theta_min", c.env.bounds.min),
      RL_D("env.theta_max", c.env.bounds.max),
      RL_D("env.min_change_interval", c.env.min_change_interval),
      RL_D("env.capacity_variation", c.env.capacity_variation),
      RL_D("env.capacity_correlation_time", c.env.capacity_correlation_time),
      RL_D("env.latency_spread", c.env.latency_spread),
      Scalar<int>("env.latency_samples", [](C& c) -> int& { return c.env.latency_samples; }),
      RL_D("env.cpu_noise", c.env.cpu_noise),
      RL_D("env.smoothing_beta", c.env.smoothing_beta),
      {"pattern.kind", [](C& c, const std::string& v) { c.pattern.kind = ParseTrafficKind(v); },
       [](const C& c) { return std::string(ToString(c.pattern.kind)); }},
      RL_D("pattern.base_rate", c.pattern.base_rate),
      RL_D("pattern.peak_to_valley", c.pattern.peak_to_valley),
      RL_D("pattern.burst_min_duration", c.pattern.burst_min_duration),
      RL_D("pattern.burst_max_duration", c.pattern.burst_max_duration),
      RL_D("pattern.burst_magnitude", c.pattern.burst_magnitude),
      RL_D("pattern.burst_mean_interval", c.pattern.burst_mean_interval),
      RL_D("pattern.noise_std", c.pattern.noise_std),
      RL_D("pattern.day_length", c.pattern.day_length),
      RL_D("reward.w1", c.reward.w1),
      RL_D("reward.w2", c.reward.w2),
      RL_D("reward.w3", c.reward.w3),
      RL_D("reward.latency_target_ms", c.reward.latency_target_ms),
      RL_D("reward.latency_decay", c.reward.latency_decay),
      RL_D("reward.gamma", c.reward.gamma),
      RL_D("dqn.lr", c.dqn.lr),
      Scalar<int>("dqn.batch", [](C& c) -> int& { return c.dqn.batch; }),
      RL_I("dqn.target_sync_every", c.dqn.target_sync_every),
      RL_D("dqn.eps_start", c.dqn.eps_start),
      RL_D("dqn.eps_min", c.dqn.eps_min),
      RL_I("dqn.decay_steps", c.dqn.decay_steps),
      RL_D("dqn.gamma", c.dqn.gamma),
      {"dqn.hidden",
       [](C& c, const std::string& v) {
         c.dqn.hidden.clear();
         for (const auto& s : SplitList(v)) c.dqn.hidden.push_back(ParseInt<int>(s));
       },
       [](const C& c) { return FormatList(c.dqn.hidden); }},
      Scalar<std::size_t>("dqn.replay_capacity", [](C& c) -> std::size_t& { return c.dqn.replay_capacity; }),
      RL_D("dqn.huber_kappa", c.dqn.huber_kappa),
      RL_D("dqn.grad_clip", c.dqn.grad_clip),
      RL_D("a3c.lr", c.a3c.lr),
      Scalar<int>("a3c.workers", [](C& c) -> int& { return c.a3c.workers; }),
      Scalar<int>("a3c.n_step", [](C& c) -> int& { return c.a3c.n_step; }),
      RL_D("a3c.value_coef", c.a3c.value_coef),
      RL_D("a3c.entropy_coef", c.a3c.entropy_coef),
      RL_D("a3c.gamma", c.a3c.gamma),
      {"a3c.trunk",
       [](C& c, const std::string& v) {
         c.a3c.trunk.clear();
         for (const auto& s : SplitList(v)) c.a3c.trunk.push_back(ParseInt<int>(s));
       },
       [](const C& c) { return FormatList(c.a3c.trunk); }},
      RL_D("a3c.grad_clip", c.a3c.grad_clip),
      RL_D("fusion.alpha_start", c.fusion.alpha_start),
      RL_D("fusion.alpha_end", c.fusion.alpha_end),
      RL_I("fusion.total_steps", c.fusion.total_steps),
      {"fusion.mode",
       [](C& c, const std::string& v) {
         if (v == "probabilistic") c.fusion_mode = FusionMode::kProbabilistic;
         else if (v == "blend") c.fusion_mode = FusionMode::kBlend;
         else throw ConfigError("fusion.mode must be probabilistic or blend");
       },
       [](const C& c) { return std::string(c.fusion_mode == FusionMode::kBlend ? "blend" : "probabilistic"); }},
      RL_D("baselines.fixed_threshold", c.baselines.fixed_threshold),
      RL_D("baselines.cpu_gain", c.baselines.cpu_gain),
      RL_D("baselines.cpu_setpoint", c.baselines.cpu_setpoint),
      RL_D("baselines.aimd_increase", c.baselines.aimd_increase),
      RL_D("baselines.aimd_decrease", c.baselines.aimd_decrease),
      RL_D("baselines.aimd_error_threshold", c.baselines.aimd_error_threshold),
      RL_D("baselines.pid_kp", c.baselines.pid_kp),
      RL_D("baselines.pid_ki", c.baselines.pid_ki),
      RL_D("baselines.pid_kd", c.baselines.pid_kd),
      RL_D("baselines.pid_integral_limit", c.baselines.pid_integral_limit),
      RL_D("constraints.latency_max_ms", c.constraints.latency_max_ms),
      RL_D("constraints.latency_violation", c.constraints.latency_violation),
      RL_D("constraints.error_budget", c.constraints.error_budget),
      RL_D("constraints.resource_max", c.constraints.resource_max),
      RL_I("training_steps", c.training_steps),
      RL_I("episode_horizon", c.episode_horizon),
      RL_I("eval_duration", c.eval_duration),
      {"seeds",
       [](C& c, const std::string& v) {
         c.seeds.clear();
         for (const auto& s : SplitList(v)) c.seeds.push_back(ParseInt<std::uint64_t>(s));
       },
       [](const C& c) { return FormatList(c.seeds); }},
      {"output_dir", [](C& c, const std::string& v) { c.output_dir = v; }, [](const C& c) { return c.output_dir; }},
      RL_B("ablation.no_replay", c.ablation.no_replay),
      RL_B("ablation.no_target_net", c.ablation.no_target_net),
      RL_B("ablation.no_a3c", c.ablation.no_a3c),
      RL_B("ablation.no_temporal", c.ablation.no_temporal),
      RL_B("deterministic_eval", c.deterministic_eval),
      {"value_init",
       [](C& c, const std::string& v) {
         if (v == "auto") c.value_init.reset();
         else c.value_init = ParseDouble(v);
       },
       [](const C& c) { return c.value_init ? Format(*c.value_init) : std::string("auto"); }},
  };
#undef RL_D
#undef RL_I
#undef RL_B
  return f;
}

}  // namespace detail

/// Sets one dotted key; throws ConfigError for unknown keys or bad values.
inline void SetConfigValue(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
  for (const auto& f : detail::ConfigFields()) {
    if (f.key == key) {
      try {
        f.set(cfg, value);
      } catch (const ConfigError& e) {
        throw ConfigError(key + ": " + e.what());
      } catch (const std::invalid_argument& e) {
        throw ConfigError(key + ": " + e.what());
      }
      return;
    }
  }
  throw ConfigError("unknown config key '" + key + "'");
}

/// Parses config text on top of `base`.
inline ExperimentConfig ParseConfig(std::istream& in, ExperimentConfig base = {}) {
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string t = detail::Trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = detail::Trim(std::string_view(t).substr(0, eq));
    const std::string value = detail::Trim(std::string_view(t).substr(eq + 1));
    try {
      SetConfigValue(base, key, value);
    } catch (const ConfigError& e) {
      throw ConfigError("line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return base;
}

inline ExperimentConfig ParseConfigString(const std::string& text, ExperimentConfig base = {}) {
  std::istringstream in(text);
  return ParseConfig(in, std::move(base));
}

inline ExperimentConfig LoadConfig(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path);
  return ParseConfig(in);
}

/// Every field, one `key = value` per line, in a form ParseConfig reads back.
inline std::string DumpConfig(const ExperimentConfig& cfg) {
  std::string out;
  for (const auto& f : detail::ConfigFields()) out += f.key + " = " + f.get(cfg) + "\n";
  return out;
}

}  // namespace ratelab
