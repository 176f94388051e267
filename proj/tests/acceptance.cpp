// Acceptance runner: one pass/fail line per criterion, exit 0 only when all
// ten hold. Criteria marked with runtime budgets measure their own wall time.
// Usage: acceptance [config_dir] [out_dir]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <limits>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "cbfpc/cbf_models.hpp"
#include "cbfpc/oracle.hpp"
#include "cbfpc/pc_solver.hpp"
#include "cbfpc/plants.hpp"
#include "cbfpc/runner.hpp"
#include "cbfpc/scenario.hpp"
#include "support/checks.hpp"

using namespace cbfpc;
namespace fs = std::filesystem;

namespace {

// Pinned tolerances and budgets.
constexpr double kGradRelTol = 1e-6;
constexpr double kHessRelTol = 1e-5;
constexpr double kOracleAgreeTol = 1e-8;
constexpr double kGapSlack = 1e-8;
constexpr double kToyGapValue = 0.009975;
constexpr double kToyGapTol = 1e-6;
constexpr double kRateFraction = 0.9;
constexpr double kIssXi = 0.5;
constexpr double kFinalDistMax = 0.05;
constexpr double kCalcBudgetSec = 10.0;
constexpr double kRateBudgetSec = 30.0;
constexpr double kSafetyBudgetSec = 60.0;

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(const std::chrono::steady_clock::time_point& t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.3g", v);
  return buf;
}

// PC closed-loop runs accumulated across criteria 6-8 for the interior
// invariance count in criterion 10.
std::vector<ClosedLoopRun> g_pc_runs;

TimeVaryingQp example1_qp(const ScenarioConfig& cfg) {
  std::vector<CircularObstacle> obstacles;
  for (const auto& o : cfg.obstacles) obstacles.push_back({o.center, o.radius, o.alpha});
  TimeVaryingQp qp;
  qp.objective = integrator_tracking_objective(cfg.k_d, cfg.goal);
  qp.constraints = obstacle_rows(obstacles);
  return qp;
}

// ---- criterion 1 -----------------------------------------------------------

struct FamilyErrors {
  double grad = 0.0;
  double hess = 0.0;
};

FamilyErrors check_random_family(std::mt19937& rng, int points) {
  FamilyErrors err;
  for (int k = 0; k < points; ++k) {
    const int m = 1 + static_cast<int>(rng() % 4);
    const int p = 1 + static_cast<int>(rng() % 5);
    auto [qp, y0] = testsupport::random_qp(rng, m, p);
    BarrierProblem pr;
    pr.qp = qp;
    pr.c = std::pow(10.0, 1.0 + static_cast<double>(rng() % 3));
    const Vector y = testsupport::feasible_near(rng, pr.qp, y0, Vector(0), 0.3);
    const Vector g = barrier_gradient(pr, y, Vector(0), Vector(0));
    const Vector g_fd = testsupport::fd_gradient(pr, y, Vector(0), Vector(0));
    err.grad = std::max(err.grad, (g - g_fd).norm() / std::max(1.0, g.norm()));
    const Matrix h = barrier_hessian(pr, y, Vector(0), Vector(0));
    const Matrix h_fd = testsupport::fd_hessian(pr, y, Vector(0), Vector(0));
    err.hess = std::max(err.hess, (h - h_fd).norm() / std::max(1.0, h.norm()));
  }
  return err;
}

FamilyErrors check_obstacle_family(std::mt19937& rng, const ScenarioConfig& cfg, int points) {
  const TimeVaryingQp qp = example1_qp(cfg);
  std::uniform_real_distribution<double> coord(-1.0, 5.0);
  std::uniform_real_distribution<double> logc(0.0, 2.5);
  FamilyErrors err;
  int done = 0;
  while (done < points) {
    Vector x(2);
    x << coord(rng), coord(rng);
    bool clear = true;
    for (const auto& o : cfg.obstacles)
      if ((Eigen::Vector2d(x[0], x[1]) - o.center).norm() < o.radius + 0.05) clear = false;
    if (!clear) continue;
    BarrierProblem pr;
    pr.qp = qp;
    pr.c = 1.1 * std::pow(10.0, logc(rng));
    Vector y0;
    try {
      y0 = strictly_feasible_init(qp, x);
    } catch (const InfeasibleProblem&) {
      continue;
    }
    const Vector y = testsupport::feasible_near(rng, pr.qp, y0, x, 0.3);
    const Vector g = barrier_gradient(pr, y, x, Vector(0));
    const Vector g_fd = testsupport::fd_gradient(pr, y, x, Vector(0));
    err.grad = std::max(err.grad, (g - g_fd).norm() / std::max(1.0, g.norm()));
    const Matrix h = barrier_hessian(pr, y, x, Vector(0));
    const Matrix h_fd = testsupport::fd_hessian(pr, y, x, Vector(0));
    err.hess = std::max(err.hess, (h - h_fd).norm() / std::max(1.0, h.norm()));
    ++done;
  }
  return err;
}

FamilyErrors check_cartpole_family(std::mt19937& rng, const ScenarioConfig& cfg, int points) {
  const SwingLimit limit{cfg.angle_limit, cfg.swing_mu, cfg.swing_alpha};
  TimeVaryingQp qp;
  qp.objective = signal_tracking_objective(1);
  qp.constraints = cartpole_filter_rows(cfg.cartpole, limit, cfg.u_min, cfg.u_max);
  std::uniform_real_distribution<double> pos(-1.0, 1.0);
  std::uniform_real_distribution<double> ang(-0.05, 0.05);
  std::uniform_real_distribution<double> rot(-0.25, 0.25);
  std::uniform_real_distribution<double> ref(-4.0, 4.0);
  FamilyErrors err;
  int done = 0;
  while (done < points) {
    Vector x(4), theta(1);
    x << pos(rng), ang(rng), pos(rng), rot(rng);
    theta << ref(rng);
    BarrierProblem pr;
    pr.qp = qp;
    pr.c = 2.3 * (1.0 + static_cast<double>(rng() % 3));
    Vector y0;
    try {
      y0 = strictly_feasible_init(qp, x);
    } catch (const InfeasibleProblem&) {
      continue;
    }
    const Vector y = testsupport::feasible_near(rng, pr.qp, y0, x, 0.2);
    const Vector g = barrier_gradient(pr, y, x, theta);
    const Vector g_fd = testsupport::fd_gradient(pr, y, x, theta);
    err.grad = std::max(err.grad, (g - g_fd).norm() / std::max(1.0, g.norm()));
    const Matrix h = barrier_hessian(pr, y, x, theta);
    const Matrix h_fd = testsupport::fd_hessian(pr, y, x, theta);
    err.hess = std::max(err.hess, (h - h_fd).norm() / std::max(1.0, h.norm()));
    ++done;
  }
  return err;
}

Outcome criterion_calculus(const ScenarioConfig& ex1, const ScenarioConfig& ex2) {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937 rng(90101);
  const FamilyErrors random_fam = check_random_family(rng, 1000);
  const FamilyErrors obstacle_fam = check_obstacle_family(rng, ex1, 1000);
  const FamilyErrors pole_fam = check_cartpole_family(rng, ex2, 1000);
  const double elapsed = seconds_since(t0);
  const double grad_worst =
      std::max({random_fam.grad, obstacle_fam.grad, pole_fam.grad});
  const double hess_worst =
      std::max({random_fam.hess, obstacle_fam.hess, pole_fam.hess});
  Outcome out;
  out.pass = grad_worst <= kGradRelTol && hess_worst <= kHessRelTol &&
             elapsed < kCalcBudgetSec;
  out.detail = "grad/hess vs finite differences on 3x1000 points: worst rel err " +
               fmt(grad_worst) + " / " + fmt(hess_worst) + ", " + fmt(elapsed) + " s";
  return out;
}

// ---- criterion 2 -----------------------------------------------------------

Outcome criterion_closed_form(const ScenarioConfig& ex1) {
  const auto& obs = ex1.obstacles.front();
  TimeVaryingQp qp = example1_qp(ex1);

  Eigen::Vector2d hand_x(0.1, 1.0);
  const Eigen::Vector2d hand =
      single_obstacle_filter(hand_x, obs.center, obs.radius, ex1.k_d, ex1.goal, obs.alpha);
  const double hand_err = (hand - Eigen::Vector2d(0.4, 2.2)).norm();

  std::mt19937 rng(90102);
  std::uniform_real_distribution<double> coord(-1.0, 5.0);
  double worst = 0.0;
  int done = 0;
  while (done < 1000) {
    Eigen::Vector2d x(coord(rng), coord(rng));
    if ((x - obs.center).norm() <= obs.radius + 1e-6) continue;
    const Eigen::Vector2d closed =
        single_obstacle_filter(x, obs.center, obs.radius, ex1.k_d, ex1.goal, obs.alpha);
    const QpSolution sol = solve_kkt_enumeration(qp, Vector(x));
    worst = std::max(worst, (sol.y - Vector(closed)).norm());
    ++done;
  }
  Outcome out;
  out.pass = worst <= kOracleAgreeTol && hand_err <= kOracleAgreeTol;
  out.detail = "closed form vs active-set enumeration on 1000 states: worst gap " +
               fmt(worst) + ", hand point err " + fmt(hand_err);
  return out;
}

// ---- criterion 3 -----------------------------------------------------------

Outcome criterion_suboptimality() {
  std::mt19937 rng(90103);
  const double cs[] = {10.0, 50.0, 100.0};
  double worst_excess = -1e18;
  double worst_negative = 1e18;
  for (int k = 0; k < 500; ++k) {
    const int m = 2 + static_cast<int>(rng() % 3);
    const int p = 1 + static_cast<int>(rng() % 5);
    auto [qp, y0] = testsupport::random_qp(rng, m, p);
    BarrierProblem pr;
    pr.qp = qp;
    pr.c = cs[k % 3];
    const QpSolution exact = solve_kkt_enumeration(qp, Vector(0));
    const Vector y_c = barrier_minimizer(pr, Vector(0), Vector(0), y0);
    const double gap = qp.objective.value(y_c, Vector(0), Vector(0)) - exact.objective_value;
    worst_excess = std::max(worst_excess, gap - suboptimality_bound(pr));
    worst_negative = std::min(worst_negative, gap);
  }

  BarrierProblem toy;
  toy.qp.objective = make_objective(Matrix::Identity(1, 1));
  toy.qp.constraints.m_y = 1;
  toy.qp.constraints.rows.push_back({[](const Vector&) {
                                       Vector a(1);
                                       a[0] = -1.0;
                                       return a;
                                     },
                                     [](const Vector&) { return -1.0; }, nullptr, nullptr});
  toy.c = 100.0;
  Vector start(1);
  start << 2.0;
  const Vector y_toy = barrier_minimizer(toy, Vector(0), Vector(0), start);
  const double toy_gap = y_toy[0] * y_toy[0] - 1.0;

  Outcome out;
  out.pass = worst_excess <= kGapSlack && worst_negative >= -kGapSlack &&
             std::abs(toy_gap - kToyGapValue) <= kToyGapTol;
  out.detail = "500 random QPs: max gap excess over p/c " + fmt(worst_excess) +
               ", min gap " + fmt(worst_negative) + "; toy gap " + fmt(toy_gap);
  return out;
}

// ---- criterion 4 -----------------------------------------------------------

Outcome criterion_exponential_rate(const ScenarioConfig& ex1) {
  const auto t0 = std::chrono::steady_clock::now();

  struct Frozen {
    std::string name;
    BarrierProblem pr;
    Vector x;
    Vector y0;
  };
  std::vector<Frozen> problems;

  Frozen toy;
  toy.name = "toy";
  toy.pr.qp.objective = make_objective(Matrix::Identity(1, 1));
  toy.pr.qp.constraints.m_y = 1;
  toy.pr.qp.constraints.rows.push_back({[](const Vector&) {
                                          Vector a(1);
                                          a[0] = -1.0;
                                          return a;
                                        },
                                        [](const Vector&) { return -1.0; }, nullptr, nullptr});
  toy.pr.c = 10.0;
  toy.x = Vector(0);
  toy.y0 = Vector(1);
  toy.y0 << 3.0;
  problems.push_back(std::move(toy));

  Frozen homing;
  homing.name = "homing";
  homing.pr.qp = example1_qp(ex1);
  homing.pr.c = 50.0;
  homing.x = Vector(2);
  homing.x << 0.0, 0.5;
  homing.y0 = strictly_feasible_init(homing.pr.qp, homing.x);
  problems.push_back(std::move(homing));

  bool pass = true;
  std::ostringstream detail;
  for (const auto& fz : problems) {
    for (PcMethod method : {PcMethod::Gradient, PcMethod::Newton}) {
      PcConfig cfg;
      cfg.method = method;
      cfg.gamma = 2.0;
      cfg.prediction = PredictionMode::Off;
      const double rate = effective_rate(cfg, fz.pr.qp.objective);
      const auto samples =
          testsupport::flow_sigma(fz.pr, fz.y0, fz.x, Vector(0), cfg, 2.0, 2e-4, 50);
      const double slope = testsupport::fit_log_slope(samples, 1e-8);
      const bool ok = slope <= -kRateFraction * rate;
      pass = pass && ok;
      detail << fz.name << (method == PcMethod::Gradient ? "/grad " : "/newton ")
             << fmt(-slope) << ">=" << fmt(kRateFraction * rate) << (ok ? " " : " FAIL ");
    }
  }
  const double elapsed = seconds_since(t0);
  pass = pass && elapsed < kRateBudgetSec;
  Outcome out;
  out.pass = pass;
  out.detail = "fitted sigma decay rates: " + detail.str() + "(" + fmt(elapsed) + " s)";
  return out;
}

// ---- criterion 5 -----------------------------------------------------------

Outcome criterion_iss() {
  TimeVaryingQp qp;
  Vector target(2);
  target << 1.0, -1.0;
  qp.objective = make_objective(Matrix::Identity(2, 2),
                                [target](const Vector&, const Vector&) { return target; });
  qp.constraints.m_y = 2;
  Vector a(2);
  a << 1.0, 0.0;
  qp.constraints.rows.push_back(
      {[a](const Vector&) { return a; }, [](const Vector&) { return 10.0; }, nullptr, nullptr});
  const QpSolution exact = solve_kkt_enumeration(qp, Vector(0));

  bool pass = true;
  std::ostringstream detail;
  for (PcMethod method : {PcMethod::Gradient, PcMethod::Newton}) {
    for (double sup : {0.01, 0.1}) {
      PcConfig cfg;
      cfg.method = method;
      cfg.gamma = 1.0;
      cfg.prediction = PredictionMode::Analytic;
      cfg = inject_prediction_disturbance(
          cfg,
          [sup](double t) {
            Vector v(2);
            v << sup * std::cos(5.0 * t), sup * std::sin(5.0 * t);
            return v;
          },
          sup);

      BarrierProblem pr;
      pr.qp = qp;
      pr.c = 1e6;
      const double rate = effective_rate(cfg, qp.objective);
      const double t_wait = 20.0 / rate;
      const double t_end = t_wait + 2.0;
      const double h = 1e-3;
      // paper-convention convexity constant: min eig of the full quadratic
      const double q_c_paper = 2.0 * qp.objective.q_c;
      const double bound = sup / (kIssXi * q_c_paper);

      Vector y = exact.y + Vector::Constant(2, 0.5);
      double tail_sup = 0.0;
      const long n = static_cast<long>(std::llround(t_end / h));
      for (long k = 0; k < n; ++k) {
        const double t = k * h;
        y = rk4_step(
            [&](const Vector& z) {
              return continuous_rhs(pr, z, Vector(0), Vector(0), Vector(0), Vector(0), 0.0,
                                    cfg, t);
            },
            y, h);
        if (t + h >= t_wait) tail_sup = std::max(tail_sup, (y - exact.y).norm());
      }
      const bool ok = tail_sup <= bound;
      pass = pass && ok;
      detail << (method == PcMethod::Gradient ? "grad" : "newton") << "/sup=" << fmt(sup)
             << ": " << fmt(tail_sup) << "<=" << fmt(bound) << (ok ? " " : " FAIL ");
    }
  }
  Outcome out;
  out.pass = pass;
  out.detail = "ultimate tracking error under injected drift noise: " + detail.str();
  return out;
}

// ---- criteria 6-9 ----------------------------------------------------------

double min_safety(const ClosedLoopRun& run) {
  double hmin = std::numeric_limits<double>::infinity();
  for (const auto& rec : run.steps)
    for (double h : rec.h) hmin = std::min(hmin, h);
  return hmin;
}

Outcome criterion_example1(const ScenarioConfig& single, const ScenarioConfig& multi,
                           const std::string& out_dir) {
  const auto t0 = std::chrono::steady_clock::now();
  bool pass = true;
  std::ostringstream detail;
  for (const auto* cfg : {&single, &multi}) {
    const ScenarioArtifacts art =
        run_scenario(*cfg, (fs::path(out_dir) / cfg->id).string());
    for (const auto& run : art.runs) {
      g_pc_runs.push_back(run);
      const double hmin = min_safety(run);
      const auto& xe = run.steps.back().x;
      const double dist = (Eigen::Vector2d(xe[0], xe[1]) - cfg->goal).norm();
      const bool ok = hmin > 0.0 && dist < kFinalDistMax && art.exit_code == 0;
      pass = pass && ok;
      if (!ok) detail << cfg->id << " FAIL h_min=" << fmt(hmin) << " dist=" << fmt(dist) << " ";
    }
    detail << cfg->id << " min h " << fmt(min_safety(art.runs.front())) << "; ";
  }
  const double elapsed = seconds_since(t0);
  pass = pass && elapsed < kSafetyBudgetSec;
  Outcome out;
  out.pass = pass;
  out.detail = "homing scenarios stay safe and reach the goal: " + detail.str() +
               fmt(elapsed) + " s";
  return out;
}

struct Example2Runs {
  ClosedLoopRun pc;
  ClosedLoopRun nominal;
  ClosedLoopRun oracle;
  ScenarioConfig cfg;
};

Example2Runs run_example2(const ScenarioConfig& ex2, const std::string& out_dir) {
  Example2Runs runs;
  runs.cfg = ex2;
  const ScenarioArtifacts art = run_scenario(ex2, (fs::path(out_dir) / ex2.id).string());
  runs.pc = art.runs.front();
  g_pc_runs.push_back(runs.pc);

  ScenarioConfig nominal = ex2;
  nominal.controller = ControllerKind::Nominal;
  nominal.id = ex2.id + "_nominal";
  nominal.expect = ExpectSpec{};
  runs.nominal =
      run_scenario(nominal, (fs::path(out_dir) / nominal.id).string()).runs.front();

  ScenarioConfig oracle = ex2;
  oracle.controller = ControllerKind::OracleQp;
  oracle.id = ex2.id + "_oracle";
  oracle.expect = ExpectSpec{};
  runs.oracle =
      run_scenario(oracle, (fs::path(out_dir) / oracle.id).string()).runs.front();
  return runs;
}

double max_angle(const ClosedLoopRun& run) {
  double worst = 0.0;
  for (const auto& rec : run.steps) worst = std::max(worst, std::abs(rec.x[1]));
  return worst;
}

double max_force(const ClosedLoopRun& run) {
  double worst = 0.0;
  for (std::size_t k = 0; k + 1 < run.steps.size(); ++k)
    worst = std::max(worst, std::abs(run.steps[k].u[0]));
  return worst;
}

Outcome criterion_example2(const Example2Runs& runs) {
  const double limit = runs.cfg.angle_limit;
  const double pc_angle = max_angle(runs.pc);
  const double nominal_angle = max_angle(runs.nominal);
  const double force = max_force(runs.pc);
  Outcome out;
  out.pass = pc_angle <= limit + 1e-12 && nominal_angle > limit &&
             force <= runs.cfg.u_max + 1e-9;
  out.detail = "swing limit: filtered max |theta| " + fmt(pc_angle) + " <= " + fmt(limit) +
               ", unfiltered " + fmt(nominal_angle) + ", max |u| " + fmt(force);
  return out;
}

Outcome criterion_boundary_contrast(const Example2Runs& runs) {
  const double margin_pc = min_safety(runs.pc);
  const double margin_oracle = min_safety(runs.oracle);
  const double r2 = runs.cfg.angle_limit * runs.cfg.angle_limit;
  Outcome out;
  out.pass = margin_oracle < 0.1 * r2 && margin_pc > margin_oracle;
  out.detail = "min (limit^2 - theta^2): exact-QP controller " + fmt(margin_oracle) +
               " < " + fmt(0.1 * r2) + ", tracking filter " + fmt(margin_pc);
  return out;
}

Outcome criterion_step_time(const Example2Runs& runs) {
  const TimingStats pc = timing_stats(runs.pc, runs.cfg.timing_warmup);
  const TimingStats oracle = timing_stats(runs.oracle, runs.cfg.timing_warmup);
  Outcome out;
  out.pass = pc.samples > 0 && oracle.samples > 0 && pc.mean_ms < oracle.mean_ms;
  const double ratio = pc.mean_ms > 0.0 ? oracle.mean_ms / pc.mean_ms : 0.0;
  out.detail = "mean step time: filter " + fmt(pc.mean_ms) + " ms vs exact QP " +
               fmt(oracle.mean_ms) + " ms (ratio " + fmt(ratio) + ")";
  return out;
}

// ---- criterion 10 ----------------------------------------------------------

Outcome criterion_interior_invariance() {
  long accepted = 0;
  long violations = 0;
  for (const auto& run : g_pc_runs) {
    for (std::size_t k = 0; k + 1 < run.steps.size(); ++k) {
      const double rmax = run.steps[k].max_residual;
      if (std::isnan(rmax)) continue; // held step, no accepted update
      ++accepted;
      if (rmax >= 0.0) ++violations;
    }
  }
  Outcome out;
  out.pass = violations == 0 && accepted > 0;
  out.detail = std::to_string(violations) + " of " + std::to_string(accepted) +
               " accepted filter steps left the strict interior";
  return out;
}

} // namespace

int main(int argc, char** argv) {
  const std::string config_dir = argc > 1 ? argv[1] : "configs";
  const std::string out_dir = argc > 2 ? argv[2] : "acceptance_out";

  ScenarioConfig ex1_single, ex1_multi, ex2;
  try {
    ex1_single = load_scenario((fs::path(config_dir) / "example1_single.cfg").string());
    ex1_multi = load_scenario((fs::path(config_dir) / "example1_multi.cfg").string());
    ex2 = load_scenario((fs::path(config_dir) / "example2.cfg").string());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "cannot load bundled configs from %s: %s\n", config_dir.c_str(),
                 e.what());
    return 1;
  }

  Example2Runs ex2_runs;
  std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"derivative calculus", [&] { return criterion_calculus(ex1_single, ex2); }},
      {"closed form vs enumeration", [&] { return criterion_closed_form(ex1_single); }},
      {"suboptimality bound", [&] { return criterion_suboptimality(); }},
      {"exponential tracking rate", [&] { return criterion_exponential_rate(ex1_single); }},
      {"disturbance robustness", [&] { return criterion_iss(); }},
      {"homing safety", [&] { return criterion_example1(ex1_single, ex1_multi, out_dir); }},
      {"anti-swing safety",
       [&] {
         ex2_runs = run_example2(ex2, out_dir);
         return criterion_example2(ex2_runs);
       }},
      {"boundary contrast", [&] { return criterion_boundary_contrast(ex2_runs); }},
      {"step-time ordering", [&] { return criterion_step_time(ex2_runs); }},
      {"interior invariance", [&] { return criterion_interior_invariance(); }},
  };

  int passed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome out;
    try {
      out = criteria[i].second();
    } catch (const std::exception& e) {
      out.pass = false;
      out.detail = std::string("exception: ") + e.what();
    }
    if (out.pass) ++passed;
    std::printf("[%2zu] %s %s: %s\n", i + 1, out.pass ? "PASS" : "FAIL",
                criteria[i].first.c_str(), out.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("ACCEPTANCE: %d/10 passed\n", passed);
  return passed == 10 ? 0 : 1;
}
