#pragma once

// Simulated plants and the closed-loop driver tying a plant to a filter.
// The driver is deliberately plain: compute an input at the sampled state,
// hold it (ZOH) over one sampling interval, advance the plant, repeat.

#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "cbfpc/cartpole.hpp"
#include "cbfpc/errors.hpp"
#include "cbfpc/oracle.hpp"
#include "cbfpc/pc_solver.hpp"
#include "cbfpc/tv_qp.hpp"

namespace cbfpc {

// Classical fourth-order step for x_dot = rhs(x) with fixed step dt.
template <typename Rhs>
Vector rk4_step(Rhs&& rhs, const Vector& x, double dt) {
  const Vector k1 = rhs(x);
  const Vector k2 = rhs(x + 0.5 * dt * k1);
  const Vector k3 = rhs(x + 0.5 * dt * k2);
  const Vector k4 = rhs(x + dt * k3);
  return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

// Velocity-controlled point: x_dot = u. ZOH makes the exact step linear.
inline Vector step_integrator(const Vector& x, const Vector& u, double dt) {
  if (x.size() != u.size()) throw ConfigurationError("integrator input dimension mismatch");
  return x + dt * u;
}

// Cart-pole under constant force u over one interval.
inline Eigen::Vector4d step_cartpole(const CartPoleParams& params, const Eigen::Vector4d& q,
                                     double u, double dt) {
  const Vector next = rk4_step(
      [&](const Vector& s) -> Vector {
        return cartpole::rhs(params, Eigen::Vector4d(s[0], s[1], s[2], s[3]), u);
      },
      Vector(q), dt);
  return Eigen::Vector4d(next[0], next[1], next[2], next[3]);
}

enum class ControllerKind { PcGradient, PcNewton, OracleQp, Nominal };

inline const char* controller_name(ControllerKind kind) {
  switch (kind) {
    case ControllerKind::PcGradient: return "pc_gradient";
    case ControllerKind::PcNewton: return "pc_newton";
    case ControllerKind::OracleQp: return "oracle_qp";
    case ControllerKind::Nominal: return "nominal";
  }
  return "unknown";
}

// Everything a closed-loop run needs, independent of where it came from.
struct ControlScenario {
  // plant; exact_integrator selects the closed-form ZOH step instead of RK4
  std::function<Vector(const Vector& x, const Vector& u)> plant_rhs;
  bool exact_integrator = false;
  Vector x0;
  int input_dim = 0;

  // filter problem
  TimeVaryingQp qp;
  ExternalSignal theta;
  std::function<Vector(const Vector& x, double t)> nominal_input;

  // diagnostics: logged safety values and the certificate channel
  std::vector<std::function<double(const Vector& x)>> safety_fns;
  std::function<double(const Vector& x)> certificate_h;
  double cbf_alpha = 0.0; // class-K rate of the certificate channel
  double b_h = 1.0;       // gradient bound of the certificate channel

  double horizon = 1.0;
  double dt = 1e-3;
  bool freeze_plant = false; // keep x at x0, e.g. to study the filter alone
};

struct StepRecord {
  double t = 0.0;
  Vector x;
  Vector y;
  Vector u;
  std::vector<double> h; // one per safety function, at x
  double sigma_norm = 0.0;
  double h_cert = std::numeric_limits<double>::quiet_NaN(); // certificate value, NaN if n/a
  double c = 0.0;
  int backtracks = 0;
  double step_time_ms = 0.0;
  double max_residual = std::numeric_limits<double>::quiet_NaN(); // max_i F_i at (y, x)
};

struct RunEvent {
  long step = 0;
  double t = 0.0;
  std::string kind;
  std::string detail;
};

struct ClosedLoopRun {
  ControllerKind controller = ControllerKind::PcGradient;
  std::vector<StepRecord> steps; // one per control step, plus a terminal sample
  std::vector<RunEvent> events;
  long held_steps = 0; // steps where the input was held after a failure
  bool aborted = false;
};

namespace detail {

inline std::vector<double> safety_values(const ControlScenario& sc, const Vector& x) {
  std::vector<double> h;
  h.reserve(sc.safety_fns.size());
  for (const auto& fn : sc.safety_fns) h.push_back(fn(x));
  return h;
}

inline Vector advance_plant(const ControlScenario& sc, const Vector& x, const Vector& u) {
  if (sc.freeze_plant) return x;
  if (sc.exact_integrator) return step_integrator(x, u, sc.dt);
  if (!sc.plant_rhs) throw ConfigurationError("scenario has no plant dynamics");
  return rk4_step([&](const Vector& s) { return sc.plant_rhs(s, u); }, x, sc.dt);
}

} // namespace detail

// Drive one controller against the scenario plant. Failed filter steps hold
// the previous input and the run continues; non-finite states abort the run
// with whatever was logged so far.
inline ClosedLoopRun run_closed_loop(const ControlScenario& sc, ControllerKind controller,
                                     const PcConfig& config) {
  if (sc.input_dim <= 0 || sc.x0.size() == 0) throw ConfigurationError("scenario is incomplete");
  sc.qp.check();
  if (sc.qp.dim() < sc.input_dim)
    throw ConfigurationError("decision vector smaller than the input dimension");
  const long n_steps = static_cast<long>(std::llround(sc.horizon / sc.dt));
  if (n_steps <= 0) throw ConfigurationError("horizon shorter than one step");

  const bool is_pc =
      controller == ControllerKind::PcGradient || controller == ControllerKind::PcNewton;
  PcConfig cfg = config;
  cfg.method = controller == ControllerKind::PcNewton ? PcMethod::Newton : PcMethod::Gradient;
  cfg.check();

  ClosedLoopRun run;
  run.controller = controller;

  BarrierProblem problem;
  problem.qp = sc.qp;
  problem.theta = sc.theta;

  Vector x = sc.x0;
  Vector u_prev = Vector::Zero(sc.input_dim);
  PcState state;
  if (is_pc) {
    const Vector y0 = strictly_feasible_init(sc.qp, x);
    state = make_initial_state(problem, y0, x, cfg, 0.0);
    u_prev = y0.head(sc.input_dim);
  }

  using clock = std::chrono::steady_clock;
  for (long k = 0; k < n_steps; ++k) {
    const double t = k * sc.dt;
    StepRecord rec;
    rec.t = t;
    rec.x = x;
    rec.h = detail::safety_values(sc, x);

    const Vector theta_k = sc.theta.value_at(t);
    Vector y = Vector::Zero(sc.qp.dim());
    Vector u = u_prev;
    bool held = false;

    const auto t_start = clock::now();
    if (is_pc) {
      DriftEstimate drift;
      if (!sc.freeze_plant) {
        if (sc.exact_integrator)
          drift.x_dot = u_prev;
        else if (sc.plant_rhs)
          drift.x_dot = sc.plant_rhs(x, u_prev);
      }
      drift.theta_dot = sc.theta.derivative_at(t);
      try {
        const StepReport rep = discrete_step(problem, state, x, theta_k, cfg, &drift);
        rec.backtracks = rep.backtracks;
        rec.sigma_norm = rep.sigma_norm;
        y = state.y;
        u = y.head(sc.input_dim);
      } catch (const NumericalDivergence& e) {
        run.events.push_back({k, t, "NumericalDivergence", e.what()});
        run.aborted = true;
        break;
      } catch (const InvalidState& e) {
        // The plant outran the carried iterate and left it infeasible. Holding
        // would apply a constraint-violating input, so re-seed from scratch at
        // the current state and step from there; hold only if even that fails.
        try {
          const Vector y0 = strictly_feasible_init(sc.qp, x, 1e-6);
          state = make_initial_state(problem, y0, x, cfg, t);
          const StepReport rep = discrete_step(problem, state, x, theta_k, cfg, &drift);
          rec.backtracks = rep.backtracks;
          rec.sigma_norm = rep.sigma_norm;
          y = state.y;
          u = y.head(sc.input_dim);
          run.events.push_back({k, t, "Reinitialized", e.what()});
        } catch (const std::runtime_error& e2) {
          run.events.push_back({k, t, error_kind(e2), e2.what()});
          held = true;
          y = state.y;
          u = u_prev;
        }
      } catch (const std::runtime_error& e) { // StepFailed, SingularGeometry
        run.events.push_back({k, t, error_kind(e), e.what()});
        held = true;
        y = state.y;
        u = u_prev;
      }
      rec.c = state.c;
    } else if (controller == ControllerKind::OracleQp) {
      try {
        const QpSolution sol = solve_kkt_enumeration(sc.qp, x, theta_k);
        y = sol.y;
        u = y.head(sc.input_dim);
      } catch (const std::runtime_error& e) {
        run.events.push_back({k, t, error_kind(e), e.what()});
        held = true;
      }
    } else { // Nominal
      if (!sc.nominal_input) throw ConfigurationError("scenario has no nominal input");
      u = sc.nominal_input(x, t);
      if (u.size() != sc.input_dim) throw ConfigurationError("nominal input dimension mismatch");
      y.head(sc.input_dim) = u;
    }
    rec.step_time_ms =
        std::chrono::duration<double, std::milli>(clock::now() - t_start).count();

    rec.y = y;
    rec.u = u;
    if (held) run.held_steps += 1;
    if (!held && (is_pc || controller == ControllerKind::OracleQp)) {
      const Vector F = residuals(sc.qp, y, x);
      rec.max_residual = F.size() > 0 ? F.maxCoeff() : 0.0;
    }
    if (is_pc && !held && sc.certificate_h && sc.cbf_alpha > 0.0) {
      const auto cert = eval_safety_certificate(problem, y, x, theta_k, sc.certificate_h(x),
                                                sc.cbf_alpha, sc.b_h, cfg,
                                                cfg.disturbance ? cfg.disturbance->sup_norm : 0.0);
      if (cert) rec.h_cert = cert->value;
    }
    run.steps.push_back(std::move(rec));

    x = detail::advance_plant(sc, x, u);
    if (!x.allFinite()) {
      run.events.push_back({k + 1, (k + 1) * sc.dt, "NumericalDivergence",
                            "plant state has non-finite entries"});
      run.aborted = true;
      break;
    }
    u_prev = u;
  }

  // terminal sample so the end state shows up in logs and safety checks
  StepRecord last;
  last.t = static_cast<double>(run.steps.size()) * sc.dt;
  last.x = x;
  last.h = detail::safety_values(sc, x);
  if (!run.steps.empty()) {
    last.y = run.steps.back().y;
    last.u = run.steps.back().u;
    last.sigma_norm = run.steps.back().sigma_norm;
    last.c = run.steps.back().c;
  } else {
    last.y = Vector::Zero(sc.qp.dim());
    last.u = Vector::Zero(sc.input_dim);
  }
  run.steps.push_back(std::move(last));
  return run;
}

} // namespace cbfpc
