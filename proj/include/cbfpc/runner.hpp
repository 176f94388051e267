#pragma once

// High-level scenario execution: run a config, compare controllers on it, or
// sweep a directory of configs as a pass/fail suite. Owns all file output.

#include <algorithm>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "cbfpc/errors.hpp"
#include "cbfpc/oracle.hpp"
#include "cbfpc/plants.hpp"
#include "cbfpc/report.hpp"
#include "cbfpc/scenario.hpp"
#include "cbfpc/svg.hpp"

namespace cbfpc {

struct ScenarioArtifacts {
  std::vector<ClosedLoopRun> runs;
  int exit_code = 0; // 0 clean, 2 when any step failed or a run aborted
  std::vector<std::string> files;
};

namespace rundetail {

inline void pad_range(double& lo, double& hi) {
  if (hi - lo < 1e-9) {
    lo -= 0.5;
    hi += 0.5;
  }
  const double pad = 0.05 * (hi - lo);
  lo -= pad;
  hi += pad;
}

inline std::vector<double> column_t(const ClosedLoopRun& run) {
  std::vector<double> t;
  t.reserve(run.steps.size());
  for (const auto& rec : run.steps) t.push_back(rec.t);
  return t;
}

inline std::vector<double> column_x(const ClosedLoopRun& run, int i) {
  std::vector<double> v;
  v.reserve(run.steps.size());
  for (const auto& rec : run.steps) v.push_back(rec.x[i]);
  return v;
}

inline std::vector<double> column_u(const ClosedLoopRun& run, int i) {
  std::vector<double> v;
  v.reserve(run.steps.size());
  for (const auto& rec : run.steps) v.push_back(rec.u[i]);
  return v;
}

inline const char* run_color(std::size_t i) {
  static const char* palette[] = {"#1f6fb4", "#c23b22", "#2c8a4b", "#8a2c7a", "#b48a1f",
                                  "#1fb4a8", "#5a5a5a", "#7a4b2c"};
  return palette[i % (sizeof(palette) / sizeof(palette[0]))];
}

} // namespace rundetail

// Trajectory/input plots mirroring the two scenario families.
inline std::vector<std::string> emit_plots(const ScenarioConfig& cfg,
                                           const std::vector<ClosedLoopRun>& runs,
                                           const std::string& out_dir) {
  namespace fs = std::filesystem;
  std::vector<std::string> files;
  if (runs.empty()) return files;

  if (cfg.plant == PlantKind::Integrator) {
    double x_lo = cfg.goal[0], x_hi = cfg.goal[0];
    double y_lo = cfg.goal[1], y_hi = cfg.goal[1];
    auto widen = [&](double x, double y) {
      x_lo = std::min(x_lo, x);
      x_hi = std::max(x_hi, x);
      y_lo = std::min(y_lo, y);
      y_hi = std::max(y_hi, y);
    };
    for (const auto& run : runs)
      for (const auto& rec : run.steps) widen(rec.x[0], rec.x[1]);
    for (const auto& o : cfg.obstacles) {
      widen(o.center[0] - o.radius, o.center[1] - o.radius);
      widen(o.center[0] + o.radius, o.center[1] + o.radius);
    }
    rundetail::pad_range(x_lo, x_hi);
    rundetail::pad_range(y_lo, y_hi);
    SvgPlot plot(x_lo, x_hi, y_lo, y_hi, cfg.id + ": position", "x_0 [m]", "x_1 [m]");
    for (const auto& o : cfg.obstacles)
      plot.disc(o.center[0], o.center[1], o.radius, "#f2c4c4", "#c23b22");
    for (std::size_t r = 0; r < runs.size(); ++r)
      plot.polyline(rundetail::column_x(runs[r], 0), rundetail::column_x(runs[r], 1),
                    rundetail::run_color(r));
    plot.marker(cfg.goal[0], cfg.goal[1], "#2c8a4b");
    for (const auto& run : runs)
      plot.marker(run.steps.front().x[0], run.steps.front().x[1], "#5a5a5a");
    const std::string path = (fs::path(out_dir) / "trajectory.svg").string();
    write_text_file(path, plot.render());
    files.push_back(path);

    const auto& run0 = runs.front();
    double u_lo = 0.0, u_hi = 0.0;
    for (const auto& rec : run0.steps)
      for (int i = 0; i < 2; ++i) {
        u_lo = std::min(u_lo, rec.u[i]);
        u_hi = std::max(u_hi, rec.u[i]);
      }
    rundetail::pad_range(u_lo, u_hi);
    SvgPlot uplot(0.0, cfg.horizon, u_lo, u_hi, cfg.id + ": filtered velocity", "t [s]",
                  "u [m/s]");
    uplot.polyline(rundetail::column_t(run0), rundetail::column_u(run0, 0), "#1f6fb4");
    uplot.polyline(rundetail::column_t(run0), rundetail::column_u(run0, 1), "#c23b22");
    uplot.legend({{"u_0", "#1f6fb4"}, {"u_1", "#c23b22"}});
    const std::string upath = (fs::path(out_dir) / "inputs.svg").string();
    write_text_file(upath, uplot.render());
    files.push_back(upath);
  } else {
    const auto& run0 = runs.front();
    double a_hi = cfg.angle_limit;
    for (const auto& rec : run0.steps) a_hi = std::max(a_hi, std::abs(rec.x[1]));
    double a_lo = -a_hi;
    rundetail::pad_range(a_lo, a_hi);
    SvgPlot aplot(0.0, cfg.horizon, a_lo, a_hi, cfg.id + ": swing angle", "t [s]",
                  "theta [rad]");
    aplot.hline(cfg.angle_limit, "#c23b22");
    aplot.hline(-cfg.angle_limit, "#c23b22");
    aplot.polyline(rundetail::column_t(run0), rundetail::column_x(run0, 1), "#1f6fb4");
    const std::string apath = (fs::path(out_dir) / "angle.svg").string();
    write_text_file(apath, aplot.render());
    files.push_back(apath);

    double u_lo = cfg.u_min, u_hi = cfg.u_max;
    for (const auto& rec : run0.steps) {
      u_lo = std::min(u_lo, rec.u[0]);
      u_hi = std::max(u_hi, rec.u[0]);
    }
    rundetail::pad_range(u_lo, u_hi);
    SvgPlot uplot(0.0, cfg.horizon, u_lo, u_hi, cfg.id + ": force input", "t [s]", "u [N]");
    uplot.hline(cfg.u_max, "#c23b22");
    uplot.hline(cfg.u_min, "#c23b22");
    uplot.polyline(rundetail::column_t(run0), rundetail::column_u(run0, 0), "#1f6fb4");
    const std::string upath = (fs::path(out_dir) / "inputs.svg").string();
    write_text_file(upath, uplot.render());
    files.push_back(upath);
  }
  return files;
}

// Execute every run of the scenario and write trajectory CSVs, events.log,
// timing.json and (optionally) plots into out_dir.
inline ScenarioArtifacts run_scenario(const ScenarioConfig& cfg, const std::string& out_dir,
                                      bool plots = true) {
  namespace fs = std::filesystem;
  validate_scenario(cfg);
  fs::create_directories(out_dir);

  ScenarioArtifacts art;
  const PcConfig pc = scenario_pc_config(cfg);
  for (int r = 0; r < cfg.run_count(); ++r) {
    const ControlScenario sc = build_control_scenario(cfg, r);
    art.runs.push_back(run_closed_loop(sc, cfg.controller, pc));
  }

  for (std::size_t r = 0; r < art.runs.size(); ++r) {
    const std::string name =
        art.runs.size() == 1 ? "trajectory.csv" : "trajectory_" + std::to_string(r) + ".csv";
    const std::string path = (fs::path(out_dir) / name).string();
    write_text_file(path, trajectory_csv(art.runs[r]));
    art.files.push_back(path);
  }
  const std::string events_path = (fs::path(out_dir) / "events.log").string();
  write_text_file(events_path, events_log(art.runs));
  art.files.push_back(events_path);
  const std::string timing_path = (fs::path(out_dir) / "timing.json").string();
  write_text_file(timing_path,
                  timing_json(cfg, {{controller_name(cfg.controller),
                                     timing_stats(art.runs, cfg.timing_warmup)}}));
  art.files.push_back(timing_path);
  if (plots) {
    auto plot_files = emit_plots(cfg, art.runs, out_dir);
    art.files.insert(art.files.end(), plot_files.begin(), plot_files.end());
  }

  for (const auto& run : art.runs)
    if (run.held_steps > 0 || run.aborted) art.exit_code = 2;
  return art;
}

// Run the scenario under both PC laws plus the oracle, then measure per-step
// tracking error of each PC run against the oracle solution evaluated at
// that run's own states (so plant divergence does not pollute the error).
inline ScenarioArtifacts compare_controllers(const ScenarioConfig& cfg,
                                             const std::string& out_dir) {
  namespace fs = std::filesystem;
  validate_scenario(cfg);
  fs::create_directories(out_dir);

  const ControlScenario sc = build_control_scenario(cfg, 0);
  ScenarioArtifacts art;
  const ControllerKind order[] = {ControllerKind::PcGradient, ControllerKind::PcNewton,
                                  ControllerKind::OracleQp};
  std::vector<std::pair<std::string, TimingStats>> timing;
  for (ControllerKind kind : order) {
    ScenarioConfig one = cfg;
    one.controller = kind;
    const PcConfig pc = scenario_pc_config(one);
    art.runs.push_back(run_closed_loop(sc, kind, pc));
    const std::string name = controller_name(kind);
    const std::string path = (fs::path(out_dir) / ("trajectory_" + name + ".csv")).string();
    write_text_file(path, trajectory_csv(art.runs.back()));
    art.files.push_back(path);
    timing.emplace_back(name, timing_stats(art.runs.back(), cfg.timing_warmup));
  }

  auto tracking_error = [&](const ClosedLoopRun& run) {
    std::vector<double> err;
    err.reserve(run.steps.size());
    for (std::size_t k = 0; k + 1 < run.steps.size(); ++k) {
      const auto& rec = run.steps[k];
      const QpSolution sol =
          solve_kkt_enumeration(sc.qp, rec.x, sc.theta.value_at(rec.t));
      err.push_back((rec.y - sol.y).norm());
    }
    return err;
  };
  const std::vector<double> err_grad = tracking_error(art.runs[0]);
  const std::vector<double> err_newton = tracking_error(art.runs[1]);

  std::ostringstream csv;
  csv << "t,err_gradient,err_newton\n";
  const std::size_t n = std::max(err_grad.size(), err_newton.size());
  for (std::size_t k = 0; k < n; ++k) {
    csv << format_cell(static_cast<double>(k) * cfg.dt);
    csv << ',' << (k < err_grad.size() ? format_cell(err_grad[k]) : "nan");
    csv << ',' << (k < err_newton.size() ? format_cell(err_newton[k]) : "nan");
    csv << '\n';
  }
  const std::string cmp_path = (fs::path(out_dir) / "compare.csv").string();
  write_text_file(cmp_path, csv.str());
  art.files.push_back(cmp_path);

  const std::string events_path = (fs::path(out_dir) / "events.log").string();
  write_text_file(events_path, events_log(art.runs));
  art.files.push_back(events_path);
  const std::string timing_path = (fs::path(out_dir) / "timing.json").string();
  write_text_file(timing_path, timing_json(cfg, timing));
  art.files.push_back(timing_path);

  for (const auto& run : art.runs)
    if (run.held_steps > 0 || run.aborted) art.exit_code = 2;
  return art;
}

struct SuiteResult {
  struct Row {
    std::string id;
    std::string path;
    bool pass = false;
    std::string note;
  };
  std::vector<Row> rows;
  bool all_pass = true;
};

// Run every *.cfg in config_dir (sorted by filename) and judge each against
// its own [expect] block.
inline SuiteResult run_suite(const std::string& config_dir, const std::string& out_dir,
                             bool plots = true) {
  namespace fs = std::filesystem;
  std::vector<fs::path> paths;
  for (const auto& entry : fs::directory_iterator(config_dir))
    if (entry.is_regular_file() && entry.path().extension() == ".cfg")
      paths.push_back(entry.path());
  std::sort(paths.begin(), paths.end());
  if (paths.empty()) throw ConfigurationError("no .cfg files in " + config_dir);

  SuiteResult result;
  for (const auto& path : paths) {
    SuiteResult::Row row;
    row.path = path.string();
    try {
      const ScenarioConfig cfg = load_scenario(path.string());
      row.id = cfg.id;
      const ScenarioArtifacts art =
          run_scenario(cfg, (fs::path(out_dir) / cfg.id).string(), plots);
      const ExpectationReport report = evaluate_expectations(cfg, art.runs);
      row.pass = report.passed() && art.exit_code == 0;
      if (!report.passed())
        row.note = report.failures.front();
      else if (art.exit_code != 0)
        row.note = "run reported failed steps";
    } catch (const std::runtime_error& e) {
      row.id = row.id.empty() ? path.stem().string() : row.id;
      row.pass = false;
      row.note = std::string(error_kind(e)) + ": " + e.what();
    }
    result.all_pass = result.all_pass && row.pass;
    result.rows.push_back(std::move(row));
  }
  return result;
}

} // namespace cbfpc
