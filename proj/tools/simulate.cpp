// CLI entry point: run one scenario, compare controllers on it, or sweep a
// directory of scenario configs as a pass/fail suite.

#include <cstdio>
#include <exception>
#include <string>

#include <CLI11.hpp>

#include "cbfpc/runner.hpp"

namespace {

void print_run_summary(const cbfpc::ScenarioConfig& cfg, const cbfpc::ScenarioArtifacts& art) {
  for (std::size_t r = 0; r < art.runs.size(); ++r) {
    const auto& run = art.runs[r];
    double h_min = std::numeric_limits<double>::infinity();
    for (const auto& rec : run.steps)
      for (double h : rec.h) h_min = std::min(h_min, h);
    std::printf("run %zu [%s]: steps=%zu events=%zu min_h=%s%s\n", r,
                cbfpc::controller_name(run.controller), run.steps.size() - 1, run.events.size(),
                cbfpc::format_cell(h_min).c_str(), run.aborted ? " ABORTED" : "");
  }
  for (const auto& f : art.files) std::printf("wrote %s\n", f.c_str());
  const auto report = cbfpc::evaluate_expectations(cfg, art.runs);
  for (const auto& fail : report.failures) std::printf("expectation failed: %s\n", fail.c_str());
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Safety-filter simulator: barrier-tracked QP filters on sample plants"};
  app.require_subcommand(1);

  std::string config_path;
  std::string suite_dir;
  std::string out_dir = "out";
  long seed = -1;
  bool no_plots = false;
  const auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--out", out_dir, "output directory")->capture_default_str();
    cmd->add_option("--seed", seed, "override the config RNG seed");
    cmd->add_flag("--no-plots", no_plots, "skip SVG plot output");
  };

  auto* run_cmd = app.add_subcommand("run", "run one scenario config");
  run_cmd->add_option("config", config_path, "scenario config file")->required();
  add_common(run_cmd);
  auto* cmp_cmd = app.add_subcommand("compare", "run gradient/newton/oracle on one scenario");
  cmp_cmd->add_option("config", config_path, "scenario config file")->required();
  add_common(cmp_cmd);
  auto* suite_cmd = app.add_subcommand("suite", "run every .cfg in a directory");
  suite_cmd->add_option("dir", suite_dir, "directory of scenario configs")->required();
  add_common(suite_cmd);

  CLI11_PARSE(app, argc, argv);

  try {
    if (run_cmd->parsed() || cmp_cmd->parsed()) {
      cbfpc::ScenarioConfig cfg = cbfpc::load_scenario(config_path);
      if (seed >= 0) cfg.seed = static_cast<unsigned long>(seed);
      const cbfpc::ScenarioArtifacts art = run_cmd->parsed()
                                               ? cbfpc::run_scenario(cfg, out_dir, !no_plots)
                                               : cbfpc::compare_controllers(cfg, out_dir);
      print_run_summary(cfg, art);
      return art.exit_code;
    }
    const cbfpc::SuiteResult suite = cbfpc::run_suite(suite_dir, out_dir, !no_plots);
    for (const auto& row : suite.rows)
      std::printf("%-24s %s%s%s\n", row.id.c_str(), row.pass ? "PASS" : "FAIL",
                  row.note.empty() ? "" : "  ", row.note.c_str());
    return suite.all_pass ? 0 : 1;
  } catch (const cbfpc::ConfigurationError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
