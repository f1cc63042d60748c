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

// CSV writers for every tabular output. Columns are documented in
// docs/output_schema.md. Doubles are written with 17 significant digits so
// files round-trip exactly; NaN is written as an empty cell.

#pragma once

#include <cmath>
#include <fstream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

#include "ratelab/evaluation.hpp"
#include "ratelab/training.hpp"

namespace ratelab {

namespace csv {

inline void Cell(std::ostream& os, double v) {
  if (!std::isnan(v)) os << v;
}
inline void Cell(std::ostream& os, const std::string& v) { os << v; }
inline void Cell(std::ostream& os, const char* v) { os << v; }
inline void Cell(std::ostream& os, std::string_view v) { os << v; }
inline void Cell(std::ostream& os, bool v) { os << (v ? 1 : 0); }
template <typename Int>
  requires std::is_integral_v<Int>
void Cell(std::ostream& os, Int v) {
  os << v;
}

template <typename T, typename... Rest>
void Row(std::ostream& os, const T& first, const Rest&... rest) {
  Cell(os, first);
  ((os << ',', Cell(os, rest)), ...);
  os << '\n';
}

inline void Setup(std::ostream& os) {
  os.precision(17);
}

}  // namespace csv

inline void WriteConvergenceCsv(std::ostream& os, const ConvergenceLog& log) {
  csv::Setup(os);
  os << "episode,end_step,length,cum_reward,epsilon,alpha,mean_dqn_loss,mean_a3c_loss,terminal\n";
  for (const auto& e : log.episodes) {
    csv::Row(os, e.episode, e.end_step, e.length, e.cum_reward, e.epsilon, e.alpha, e.mean_dqn_loss, e.mean_a3c_loss,
             e.terminal);
  }
}

inline void WriteLossesCsv(std::ostream& os, const ConvergenceLog& log) {
  csv::Setup(os);
  os << "step,dqn_loss,a3c_loss\n";
  for (const auto& u : log.updates) csv::Row(os, u.step, u.dqn_loss, u.a3c_loss);
}

/// Per-step exploration and fusion schedules, subsampled every `stride`.
inline void WriteScheduleCsv(std::ostream& os, const ConvergenceLog& log, std::size_t stride = 1) {
  csv::Setup(os);
  os << "step,epsilon,alpha\n";
  if (stride == 0) stride = 1;
  for (std::size_t i = 0; i < log.epsilon_trace.size(); i += stride) {
    csv::Row(os, i, log.epsilon_trace[i], log.alpha_trace[i]);
  }
}

/// Wall-clock timing kept apart from convergence.csv so that file stays
/// bit-reproducible.
inline void WriteTimingCsv(std::ostream& os, const ConvergenceLog& log) {
  csv::Setup(os);
  os << "episode,wall_seconds\n";
  for (std::size_t i = 0; i < log.episode_wall_seconds.size(); ++i) csv::Row(os, i, log.episode_wall_seconds[i]);
  csv::Row(os, "total", log.wall_seconds);
}

inline void WriteTraceCsv(std::ostream& os, const std::vector<TraceRow>& trace) {
  csv::Setup(os);
  os << "step,sim_time,offered_rate,capacity,proposed,threshold,offered,admitted,completed,rejected,errors,queue,"
        "cpu,mem,latency_ms,reward\n";
  for (const auto& t : trace) {
    csv::Row(os, t.step, t.sim_time, t.offered_rate, t.capacity, t.proposed, t.threshold, t.offered, t.admitted,
             t.completed, t.rejected, t.errors, t.queue, t.cpu, t.mem, t.latency_ms, t.reward);
  }
}

inline const char* kReportHeader =
    "throughput,latency_p50,latency_p90,latency_p99,availability,sla_compliance,mean_cpu,mean_mem,mean_threshold,"
    "mean_reward,composite,latency_over_max_fraction,mean_error_rate,resource_over_fraction,latency_ok,error_ok,"
    "resource_ok,steps,offered,completed,degenerate";

inline void ReportCells(std::ostream& os, const EvalReport& r) {
  csv::Row(os, r.throughput, r.latency_p50, r.latency_p90, r.latency_p99, r.availability, r.sla_compliance, r.mean_cpu,
           r.mean_mem, r.mean_threshold, r.mean_reward, r.composite, r.latency_over_max_fraction, r.mean_error_rate,
           r.resource_over_fraction, r.latency_constraint_ok, r.error_constraint_ok, r.resource_constraint_ok, r.steps,
           r.offered, r.completed, r.degenerate);
}

inline void WriteReportCsv(std::ostream& os, const std::string& policy, std::uint64_t seed, const EvalReport& r) {
  csv::Setup(os);
  os << "policy,seed," << kReportHeader << "\n" << policy << ',' << seed << ',';
  ReportCells(os, r);
}

inline void WriteCompareCsv(std::ostream& os, const CompareTable& t) {
  csv::Setup(os);
  os << "pattern,policy,seed," << kReportHeader << "\n";
  for (const auto& r : t.rows) {
    os << ToString(r.pattern) << ',' << r.policy << ',' << r.seed << ',';
    ReportCells(os, r.report);
  }
}

inline void WriteCompareSummaryCsv(std::ostream& os, const CompareTable& t) {
  csv::Setup(os);
  os << "pattern,policy,throughput,latency_p50,latency_p90,latency_p99,availability,sla_compliance,composite,"
        "throughput_delta_pct,p99_delta_pct,sla_delta_pct\n";
  for (const auto& m : t.means) {
    csv::Row(os, ToString(m.pattern), m.policy, m.throughput, m.latency_p50, m.latency_p90, m.latency_p99,
             m.availability, m.sla_compliance, m.composite, m.throughput_delta_pct, m.p99_delta_pct, m.sla_delta_pct);
  }
}

inline void WriteAblationCsv(std::ostream& os, const AblationTable& t) {
  csv::Setup(os);
  os << "variant,seed,composite,percent_of_full\n";
  for (const auto& r : t.rows) csv::Row(os, r.variant, r.seed, r.composite, r.percent_of_full);
  for (const auto& s : t.summary) csv::Row(os, s.variant, "mean", s.mean_composite, s.percent_of_full);
}

inline void WriteTuningCsv(std::ostream& os, const TuningResult& t) {
  csv::Setup(os);
  os << "pattern,controller,params,score,throughput,latency_p99,best\n";
  for (const auto& r : t.rows) {
    csv::Row(os, ToString(r.pattern), r.controller, r.params, r.score, r.throughput, r.latency_p99, r.best);
  }
}

/// Plot-ready (series, x, y) triples.
struct PlotPoint {
  std::string series;
  double x = 0.0;
  double y = 0.0;
};

inline std::vector<PlotPoint> ConvergencePlot(const ConvergenceLog& log, const std::string& series = "reward") {
  std::vector<PlotPoint> out;
  for (const auto& e : log.episodes) out.push_back({series, static_cast<double>(e.episode), e.cum_reward});
  return out;
}

inline std::vector<PlotPoint> ComparePlot(const CompareTable& t) {
  std::vector<PlotPoint> out;
  for (const auto& m : t.means) {
    const double x = static_cast<double>(m.pattern);
    out.push_back({m.policy + ":throughput", x, m.throughput});
    out.push_back({m.policy + ":p99", x, m.latency_p99});
  }
  return out;
}

inline std::vector<PlotPoint> AblationPlot(const AblationTable& t) {
  std::vector<PlotPoint> out;
  for (std::size_t i = 0; i < t.summary.size(); ++i) {
    out.push_back({t.summary[i].variant, static_cast<double>(i), t.summary[i].percent_of_full});
  }
  return out;
}

inline void WritePlotCsv(std::ostream& os, const std::vector<PlotPoint>& points) {
  csv::Setup(os);
  os << "series,x,y\n";
  for (const auto& p : points) csv::Row(os, p.series, p.x, p.y);
}

/// Opens `path` for writing or throws.
inline std::ofstream OpenOutput(const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path + " for writing");
  return os;
}

}  // namespace ratelab
