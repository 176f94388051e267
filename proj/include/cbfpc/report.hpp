#pragma once

// Artifact writers: trajectory CSV, event log, timing summary and the
// pass/fail evaluation of a scenario's [expect] block. All text output is
// deterministic given the same run data; wall-clock timings are the only
// physically nondeterministic values and are confined to the step_time_ms
// column and timing.json.

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "cbfpc/errors.hpp"
#include "cbfpc/plants.hpp"
#include "cbfpc/scenario.hpp"

namespace cbfpc {

inline std::string format_cell(double v) {
  if (std::isnan(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

inline std::string trajectory_csv(const ClosedLoopRun& run) {
  if (run.steps.empty()) throw ConfigurationError("cannot serialize an empty run");
  const auto& first = run.steps.front();
  const int nx = static_cast<int>(first.x.size());
  const int ny = static_cast<int>(first.y.size());
  const int nu = static_cast<int>(first.u.size());
  const int nh = static_cast<int>(first.h.size());

  std::ostringstream out;
  out << "t";
  for (int i = 0; i < nx; ++i) out << ",x_" << i;
  for (int i = 0; i < ny; ++i) out << ",y_" << i;
  for (int i = 0; i < nu; ++i) out << ",u_applied_" << i;
  for (int i = 0; i < nh; ++i) out << ",h_" << i;
  out << ",sigma_norm,h_N,c,backtracks,step_time_ms\n";

  for (const auto& rec : run.steps) {
    out << format_cell(rec.t);
    for (int i = 0; i < nx; ++i) out << ',' << format_cell(rec.x[i]);
    for (int i = 0; i < ny; ++i) out << ',' << format_cell(rec.y[i]);
    for (int i = 0; i < nu; ++i) out << ',' << format_cell(rec.u[i]);
    for (int i = 0; i < nh; ++i) out << ',' << format_cell(rec.h[static_cast<std::size_t>(i)]);
    out << ',' << format_cell(rec.sigma_norm);
    out << ',' << format_cell(rec.h_cert);
    out << ',' << format_cell(rec.c);
    out << ',' << rec.backtracks;
    out << ',' << format_cell(rec.step_time_ms);
    out << '\n';
  }
  return out.str();
}

inline std::string events_log(const std::vector<ClosedLoopRun>& runs) {
  std::ostringstream out;
  for (std::size_t r = 0; r < runs.size(); ++r)
    for (const auto& ev : runs[r].events)
      out << "run=" << r << " step=" << ev.step << " t=" << format_cell(ev.t)
          << " kind=" << ev.kind << " detail=" << ev.detail << "\n";
  return out.str();
}

struct TimingStats {
  long samples = 0;
  double mean_ms = 0.0;
  double max_ms = 0.0;
};

// Controller compute time per step, excluding the first `warmup` steps and
// the terminal sample (which performs no computation).
inline TimingStats timing_stats(const std::vector<ClosedLoopRun>& runs, int warmup) {
  TimingStats stats;
  double total = 0.0;
  for (const auto& run : runs) {
    if (run.steps.size() < 2) continue;
    for (std::size_t k = static_cast<std::size_t>(warmup); k + 1 < run.steps.size(); ++k) {
      const double ms = run.steps[k].step_time_ms;
      total += ms;
      stats.max_ms = std::max(stats.max_ms, ms);
      stats.samples += 1;
    }
  }
  if (stats.samples > 0) stats.mean_ms = total / static_cast<double>(stats.samples);
  return stats;
}

inline TimingStats timing_stats(const ClosedLoopRun& run, int warmup) {
  TimingStats stats;
  double total = 0.0;
  if (run.steps.size() < 2) return stats;
  for (std::size_t k = static_cast<std::size_t>(warmup); k + 1 < run.steps.size(); ++k) {
    const double ms = run.steps[k].step_time_ms;
    total += ms;
    stats.max_ms = std::max(stats.max_ms, ms);
    stats.samples += 1;
  }
  if (stats.samples > 0) stats.mean_ms = total / static_cast<double>(stats.samples);
  return stats;
}

inline std::string timing_json(const ScenarioConfig& cfg,
                               const std::vector<std::pair<std::string, TimingStats>>& entries) {
  nlohmann::json doc;
  doc["scenario"] = cfg.id;
  doc["seed"] = cfg.seed;
  doc["warmup_steps"] = cfg.timing_warmup;
  nlohmann::json ctrls = nlohmann::json::object();
  for (const auto& [name, stats] : entries) {
    ctrls[name] = {{"samples", stats.samples},
                   {"mean_ms", stats.mean_ms},
                   {"max_ms", stats.max_ms}};
  }
  doc["controllers"] = std::move(ctrls);
  return doc.dump(2) + "\n";
}

inline void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigurationError("cannot write " + path);
  out << content;
}

struct ExpectationReport {
  std::vector<std::string> failures;
  bool passed() const { return failures.empty(); }
};

inline ExpectationReport evaluate_expectations(const ScenarioConfig& cfg,
                                               const std::vector<ClosedLoopRun>& runs) {
  ExpectationReport report;
  auto flag = [&](const std::string& msg) { report.failures.push_back(msg); };
  const auto& ex = cfg.expect;

  for (std::size_t r = 0; r < runs.size(); ++r) {
    const auto& run = runs[r];
    const std::string tag = "run " + std::to_string(r) + ": ";
    if (run.steps.empty()) {
      flag(tag + "empty run");
      continue;
    }
    // Re-initializations are recoveries, not failed steps: the sample still
    // applied a freshly computed feasible input.
    if (ex.no_failed_steps && (run.held_steps > 0 || run.aborted))
      flag(tag + "filter reported failed steps");

    if (ex.min_h_positive) {
      double hmin = std::numeric_limits<double>::infinity();
      for (const auto& rec : run.steps)
        for (double h : rec.h) hmin = std::min(hmin, h);
      if (!(hmin > 0.0)) flag(tag + "safety value dropped to " + format_cell(hmin));
    }
    if (ex.angle_within_limit) {
      double worst = 0.0;
      for (const auto& rec : run.steps) worst = std::max(worst, std::abs(rec.x[1]));
      if (worst > cfg.angle_limit + 1e-12)
        flag(tag + "swing angle reached " + format_cell(worst) + " rad");
    }
    if (ex.within_saturation) {
      double t_bad = std::numeric_limits<double>::quiet_NaN();
      for (const auto& rec : run.steps)
        for (Eigen::Index i = 0; i < rec.u.size(); ++i)
          if ((rec.u[i] < cfg.u_min - 1e-9 || rec.u[i] > cfg.u_max + 1e-9) && std::isnan(t_bad))
            t_bad = rec.t;
      if (!std::isnan(t_bad)) flag(tag + "input left the saturation box at t=" + format_cell(t_bad));
    }
    if (ex.final_dist_max) {
      const auto& x_end = run.steps.back().x;
      const double dist = (Eigen::Vector2d(x_end[0], x_end[1]) - cfg.goal).norm();
      if (!(dist < *ex.final_dist_max))
        flag(tag + "final distance " + format_cell(dist) + " exceeds bound");
    }
  }
  return report;
}

} // namespace cbfpc
