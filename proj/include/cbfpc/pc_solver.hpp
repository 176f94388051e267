#pragma once

// Prediction-correction tracking of the barrier minimizer. The correction
// term descends the barrier objective at the frozen problem; the prediction
// term compensates the drift of the gradient caused by plant motion, signal
// motion and the barrier schedule. Continuous laws:
//
//   gradient:  y_dot = -gamma*g - Hess^{-1}*drift
//   newton:    y_dot = -Hess^{-1}*(gamma*g + drift)
//
// and the discrete laws are their forward-Euler ZOH versions with the drift
// replaced by an estimate (analytic, finite-difference of successive
// gradients, or zero). Every accepted discrete iterate is strictly feasible;
// that is what makes the applied input safe regardless of tracking error.

#include <cmath>
#include <functional>
#include <optional>
#include <string>

#include <Eigen/Dense>

#include "cbfpc/errors.hpp"
#include "cbfpc/tv_qp.hpp"

namespace cbfpc {

enum class PcMethod { Gradient, Newton };
enum class PredictionMode { Analytic, FiniteDifference, Off };

// c(t) = min(c0 * exp(growth*t), c_max). Larger c means a tighter
// suboptimality gap but a stiffer barrier, hence the cap.
struct BarrierSchedule {
  double c0 = 1.0;
  double growth = 0.0;
  double c_max = 1e9;

  double value(double t) const { return std::min(c0 * std::exp(growth * t), c_max); }

  double rate(double t) const {
    const double c = c0 * std::exp(growth * t);
    return c >= c_max ? 0.0 : growth * c;
  }

  void check() const {
    if (!(c0 > 0.0)) throw ConfigurationError("barrier schedule needs c0 > 0");
    if (!(growth >= 0.0)) throw ConfigurationError("barrier schedule needs growth >= 0");
    if (!(c_max >= c0)) throw ConfigurationError("barrier schedule needs c_max >= c0");
  }
};

// Additive error injected into the drift estimate, with its known sup norm.
// Used to exercise the input-to-state robustness of the laws.
struct PredictionDisturbance {
  std::function<Vector(double)> offset;
  double sup_norm = 0.0;
};

struct PcConfig {
  PcMethod method = PcMethod::Gradient;
  double gamma = 1.0;
  BarrierSchedule schedule;
  double step = 1e-3;
  PredictionMode prediction = PredictionMode::Analytic;
  double fd_jump_threshold = 0.01; // reject FD estimate when |G_k - G_{k-1}| exceeds this
  double backtrack_factor = 0.5;
  int max_backtracks = 30;
  std::optional<PredictionDisturbance> disturbance;

  void check() const {
    if (!(gamma > 0.0)) throw ConfigurationError("correction rate gamma must be positive");
    if (!(step > 0.0)) throw ConfigurationError("sampling step must be positive");
    if (!(fd_jump_threshold > 0.0)) throw ConfigurationError("fd jump threshold must be positive");
    if (!(backtrack_factor > 0.0 && backtrack_factor < 1.0))
      throw ConfigurationError("backtrack factor must lie in (0, 1)");
    if (max_backtracks < 0) throw ConfigurationError("max backtracks must be nonnegative");
    schedule.check();
  }
};

inline PcConfig inject_prediction_disturbance(PcConfig config,
                                              std::function<Vector(double)> offset,
                                              double sup_norm) {
  if (!(sup_norm >= 0.0)) throw ConfigurationError("disturbance sup norm must be nonnegative");
  config.disturbance = PredictionDisturbance{std::move(offset), sup_norm};
  return config;
}

// Convergence rate of |y - y_c(t)| guaranteed by the laws: the gradient law
// contracts at least at rate min_eig(2Q)*gamma, the Newton law exactly at
// gamma.
inline double effective_rate(const PcConfig& config, const QuadraticObjective& objective) {
  return config.method == PcMethod::Gradient ? 2.0 * objective.q_c * config.gamma : config.gamma;
}

struct PcState {
  Vector y;
  double t = 0.0;
  double c = 0.0;
  double sigma_norm = 0.0; // |barrier gradient| after the latest update
  long steps = 0;
  std::optional<Vector> prev_gradient; // pre-step gradient of the previous step
};

struct StepReport {
  int backtracks = 0;
  bool fd_guard = false; // FD estimate discarded by the jump guard
  bool prediction_used = false;
  double sigma_norm = 0.0;
};

// Known rates of the drifting channels at the current step. Channels left
// empty are treated as stationary.
struct DriftEstimate {
  Vector x_dot;
  Vector theta_dot;
};

namespace detail {

constexpr double kFeasibilityMargin = 1e-9; // accepted iterates keep every F_i below -this
constexpr double kConditionFloor = 1e-12;   // rcond below this counts as singular

inline Vector solve_spd(const Matrix& hess, const Vector& rhs) {
  Eigen::LDLT<Matrix> ldlt(hess);
  if (ldlt.info() != Eigen::Success || ldlt.rcond() < kConditionFloor ||
      !(ldlt.vectorD().minCoeff() > 0.0))
    throw SingularGeometry("barrier hessian is numerically singular");
  return ldlt.solve(rhs);
}

inline void check_finite(const Vector& v, const char* what) {
  if (!v.allFinite()) throw NumericalDivergence(std::string(what) + " contains non-finite values");
}

} // namespace detail

// Validates the wiring and produces the solver state at t0. y0 must be
// strictly feasible at x0; problem.c is aligned with the schedule.
inline PcState make_initial_state(BarrierProblem& problem, const Vector& y0, const Vector& x0,
                                  const PcConfig& config, double t0 = 0.0) {
  config.check();
  problem.qp.check();
  detail::check_finite(y0, "initial iterate");
  detail::check_finite(x0, "initial state");
  problem.c = config.schedule.value(t0);
  const Vector F = residuals(problem.qp, y0, x0);
  if (!strictly_feasible(F, detail::kFeasibilityMargin))
    throw InfeasibleEvaluation("initial iterate is not strictly feasible");
  PcState state;
  state.y = y0;
  state.t = t0;
  state.c = problem.c;
  state.sigma_norm =
      barrier_gradient(problem, y0, x0, problem.theta.value_at(t0)).norm();
  return state;
}

// Right-hand side of the continuous laws at time t. The caller supplies the
// channel rates; prediction mode FiniteDifference has no meaning without a
// step sequence and degrades to Off here (a configured disturbance is still
// injected so the perturbed flow can be studied in isolation).
inline Vector continuous_rhs(const BarrierProblem& problem, const Vector& y, const Vector& x,
                             const Vector& x_dot, const Vector& theta, const Vector& theta_dot,
                             double c_dot, const PcConfig& config, double t) {
  config.check();
  const Vector g = barrier_gradient(problem, y, x, theta);
  const Matrix hess = barrier_hessian(problem, y, x, theta);

  Vector drift = Vector::Zero(y.size());
  if (config.prediction == PredictionMode::Analytic)
    drift = barrier_drift(problem, y, x, x_dot, theta, theta_dot, c_dot);
  if (config.prediction != PredictionMode::Off && config.disturbance &&
      config.disturbance->offset)
    drift += config.disturbance->offset(t);

  if (config.method == PcMethod::Gradient)
    return -config.gamma * g - detail::solve_spd(hess, drift);
  return -detail::solve_spd(hess, config.gamma * g + drift);
}

// One ZOH step of the discrete law at plant state x. Mutates problem.c along
// the schedule and advances state by config.step. Accepted iterates are
// strictly feasible at x; if none is found within the backtracking budget the
// state is left untouched and StepFailed is raised. A y that is already
// infeasible at x (the plant moved too far) raises InvalidState before any
// update.
inline StepReport discrete_step(BarrierProblem& problem, PcState& state, const Vector& x,
                                const Vector& theta, const PcConfig& config,
                                const DriftEstimate* drift_info = nullptr) {
  config.check();
  detail::check_finite(state.y, "iterate");
  detail::check_finite(x, "plant state");

  problem.c = config.schedule.value(state.t);
  if (state.y.size() != problem.qp.dim())
    throw ConfigurationError("iterate dimension mismatch");

  // Rows are evaluated once per step; gradient, hessian, the backtracking
  // trials, and the post-step residual all reuse (A, B).
  const int p = problem.qp.constraints.count();
  Matrix A;
  Vector B;
  if (p > 0) {
    A = problem.qp.constraints.normals(x);
    B = problem.qp.constraints.bounds(x);
  }
  const Vector F = p > 0 ? Vector(A.transpose() * state.y - B) : Vector(0);
  if (!strictly_feasible(F))
    throw InvalidState("carried iterate infeasible at the new plant state, max residual " +
                       std::to_string(F.size() > 0 ? F.maxCoeff() : 0.0));

  const Vector target = problem.qp.objective.target_at(x, theta);
  Vector g = 2.0 * (problem.qp.objective.Q * state.y) - 2.0 * target;
  Matrix hess = 2.0 * problem.qp.objective.Q;
  if (p > 0) {
    const Vector d = detail::barrier_weights(F);
    g += (A * d) / problem.c;
    hess += (A * d.cwiseAbs2().asDiagonal() * A.transpose()) / problem.c;
  }

  StepReport report;
  Vector drift = Vector::Zero(state.y.size());
  const double c_dot = config.schedule.rate(state.t);
  switch (config.prediction) {
    case PredictionMode::Off:
      break;
    case PredictionMode::Analytic: {
      const Vector x_dot = drift_info ? drift_info->x_dot : Vector(0);
      const Vector theta_dot = drift_info ? drift_info->theta_dot : Vector(0);
      try {
        drift = barrier_drift(problem, state.y, x, x_dot, theta, theta_dot, c_dot);
        report.prediction_used = true;
        break;
      } catch (const PredictionUnavailable&) {
        // fall through to the finite-difference estimate
      }
      [[fallthrough]];
    }
    case PredictionMode::FiniteDifference: {
      if (state.prev_gradient) {
        const Vector jump = g - *state.prev_gradient;
        if (jump.norm() > config.fd_jump_threshold) {
          report.fd_guard = true;
        } else {
          drift = jump / config.step;
          report.prediction_used = true;
        }
      }
      break;
    }
  }
  if (config.prediction != PredictionMode::Off && config.disturbance &&
      config.disturbance->offset)
    drift += config.disturbance->offset(state.t);

  Vector delta;
  if (config.method == PcMethod::Gradient)
    delta = config.step * (-config.gamma * g - detail::solve_spd(hess, drift));
  else
    delta = config.step * (-detail::solve_spd(hess, config.gamma * g + drift));
  detail::check_finite(delta, "update direction");

  // Feasibility certificate: shrink the whole update until the iterate is
  // strictly interior again.
  double scale = 1.0;
  Vector trial;
  Vector trial_F(0);
  bool accepted = false;
  for (int bt = 0; bt <= config.max_backtracks; ++bt) {
    trial = state.y + scale * delta;
    if (p > 0) trial_F = A.transpose() * trial - B;
    if (strictly_feasible(trial_F, detail::kFeasibilityMargin)) {
      accepted = true;
      report.backtracks = bt;
      break;
    }
    scale *= config.backtrack_factor;
  }
  if (!accepted)
    throw StepFailed("no strictly feasible iterate within " +
                     std::to_string(config.max_backtracks) + " backtracks");

  state.prev_gradient = g;
  state.y = trial;
  state.t += config.step;
  state.steps += 1;
  problem.c = config.schedule.value(state.t);
  state.c = problem.c;
  Vector g_next = 2.0 * (problem.qp.objective.Q * state.y) - 2.0 * target;
  if (p > 0) g_next += (A * detail::barrier_weights(trial_F)) / problem.c;
  state.sigma_norm = g_next.norm();
  report.sigma_norm = state.sigma_norm;
  return report;
}

// Certified lower bound dynamics on the plant's safety function: whenever
// the pair (x, y) keeps value >= 0 the plant stays safe. Needs the tracking
// rate to beat the class-K rate alpha; otherwise no certificate exists and
// nullopt is returned. disturbance_sup > 0 yields the enlarged-set variant
// for a known drift-estimate error bound.
struct SafetyCertificate {
  double value = 0.0;       // -|gradient| + alpha_prime*h (+ sup/alpha)
  double alpha_prime = 0.0;
  double gamma_hat = 0.0;
};

inline std::optional<SafetyCertificate>
eval_safety_certificate(const BarrierProblem& problem, const Vector& y, const Vector& x,
                        const Vector& theta, double h_value, double alpha, double b_h,
                        const PcConfig& config, double disturbance_sup = 0.0) {
  if (!(alpha > 0.0)) throw ConfigurationError("class-K rate alpha must be positive");
  if (!(b_h > 0.0)) throw ConfigurationError("safety gradient bound b_h must be positive");
  const double gamma_hat = effective_rate(config, problem.qp.objective);
  if (!(gamma_hat > alpha)) return std::nullopt;
  SafetyCertificate cert;
  cert.gamma_hat = gamma_hat;
  cert.alpha_prime = 2.0 * problem.qp.objective.q_c * (gamma_hat - alpha) / b_h;
  cert.value = -barrier_gradient(problem, y, x, theta).norm() + cert.alpha_prime * h_value;
  if (disturbance_sup > 0.0) cert.value += disturbance_sup / alpha;
  return cert;
}

} // namespace cbfpc
