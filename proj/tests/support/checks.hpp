#pragma once

// Test-only numerical oracles: central finite differences for every
// derivative the library computes analytically, random strictly feasible QP
// generators, and small fitting/integration helpers for the flow tests.
// Nothing here is used by the library itself.

#include <cmath>
#include <random>
#include <vector>

#include "cbfpc/pc_solver.hpp"
#include "cbfpc/plants.hpp"
#include "cbfpc/tv_qp.hpp"

namespace cbfpc::testsupport {

inline Vector fd_gradient(const BarrierProblem& pr, const Vector& y, const Vector& x,
                          const Vector& theta) {
  Vector g(y.size());
  for (Eigen::Index j = 0; j < y.size(); ++j) {
    const double eps = 1e-7 * std::max(1.0, std::abs(y[j]));
    Vector yp = y, ym = y;
    yp[j] += eps;
    ym[j] -= eps;
    g[j] = (barrier_objective(pr, yp, x, theta) - barrier_objective(pr, ym, x, theta)) /
           (2.0 * eps);
  }
  return g;
}

inline Matrix fd_hessian(const BarrierProblem& pr, const Vector& y, const Vector& x,
                         const Vector& theta) {
  Matrix hess(y.size(), y.size());
  for (Eigen::Index j = 0; j < y.size(); ++j) {
    const double eps = 1e-7 * std::max(1.0, std::abs(y[j]));
    Vector yp = y, ym = y;
    yp[j] += eps;
    ym[j] -= eps;
    hess.col(j) =
        (barrier_gradient(pr, yp, x, theta) - barrier_gradient(pr, ym, x, theta)) / (2.0 * eps);
  }
  return hess;
}

// Time-drift of the gradient by advancing every channel (x, theta, c)
// simultaneously along its rate.
inline Vector fd_drift(const BarrierProblem& pr, const Vector& y, const Vector& x,
                       const Vector& x_dot, const Vector& theta, const Vector& theta_dot,
                       double c_dot) {
  const double eps = 1e-7;
  BarrierProblem plus = pr;
  BarrierProblem minus = pr;
  plus.c = pr.c + eps * c_dot;
  minus.c = pr.c - eps * c_dot;
  const Vector xp = x_dot.size() > 0 ? Vector(x + eps * x_dot) : x;
  const Vector xm = x_dot.size() > 0 ? Vector(x - eps * x_dot) : x;
  const Vector tp = theta_dot.size() > 0 ? Vector(theta + eps * theta_dot) : theta;
  const Vector tm = theta_dot.size() > 0 ? Vector(theta - eps * theta_dot) : theta;
  return (barrier_gradient(plus, y, xp, tp) - barrier_gradient(minus, y, xm, tm)) / (2.0 * eps);
}

// Random strongly convex QP with a known strictly feasible point at margin
// >= 0.5. State and signal are empty; the rows are constants.
struct RandomQp {
  TimeVaryingQp qp;
  Vector y_feasible;
};

inline RandomQp random_qp(std::mt19937& rng, int m, int p) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> slack(0.5, 1.5);

  Matrix A(m, m);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) A(i, j) = gauss(rng);
  Matrix Q = A.transpose() * A / static_cast<double>(m) + 0.3 * Matrix::Identity(m, m);

  Vector target(m);
  for (int i = 0; i < m; ++i) target[i] = gauss(rng);

  Vector y0(m);
  for (int i = 0; i < m; ++i) y0[i] = 0.5 * gauss(rng);

  RandomQp out;
  out.qp.objective = make_objective(
      std::move(Q), [target](const Vector&, const Vector&) { return target; });
  out.qp.constraints.m_y = m;
  for (int i = 0; i < p; ++i) {
    Vector a(m);
    for (int j = 0; j < m; ++j) a[j] = gauss(rng);
    const double b = a.dot(y0) + slack(rng);
    out.qp.constraints.rows.push_back(
        {[a](const Vector&) { return a; }, [b](const Vector&) { return b; }, nullptr, nullptr});
  }
  out.y_feasible = y0;
  return out;
}

// Random strictly feasible iterate near y0: rejection-sample Gaussian
// perturbations until margin >= min_margin holds.
inline Vector feasible_near(std::mt19937& rng, const TimeVaryingQp& qp, const Vector& y0,
                            const Vector& x, double spread, double min_margin = 1e-3) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (int attempt = 0; attempt < 1000; ++attempt) {
    Vector y = y0;
    for (Eigen::Index j = 0; j < y.size(); ++j) y[j] += spread * gauss(rng);
    const Vector F = residuals(qp, y, x);
    if (F.size() == 0 || F.maxCoeff() < -min_margin) return y;
  }
  return y0;
}

// sigma(t) samples along the continuous law for a frozen problem.
struct FlowSample {
  double t;
  double sigma;
};

inline std::vector<FlowSample> flow_sigma(const BarrierProblem& problem, const Vector& y0,
                                          const Vector& x, const Vector& theta,
                                          const PcConfig& config, double horizon, double h,
                                          int record_every) {
  std::vector<FlowSample> out;
  Vector y = y0;
  const long n = static_cast<long>(std::llround(horizon / h));
  out.push_back({0.0, barrier_gradient(problem, y, x, theta).norm()});
  for (long k = 0; k < n; ++k) {
    y = rk4_step(
        [&](const Vector& z) {
          return continuous_rhs(problem, z, x, Vector(0), theta, Vector(0), 0.0, config,
                                k * h);
        },
        y, h);
    if ((k + 1) % record_every == 0 || k + 1 == n)
      out.push_back({(k + 1) * h, barrier_gradient(problem, y, x, theta).norm()});
  }
  return out;
}

// Least-squares slope of log(sigma) over samples with sigma above the floor.
inline double fit_log_slope(const std::vector<FlowSample>& samples, double sigma_floor) {
  double st = 0.0, sv = 0.0, stt = 0.0, stv = 0.0;
  long n = 0;
  for (const auto& s : samples) {
    if (!(s.sigma > sigma_floor)) continue;
    const double v = std::log(s.sigma);
    st += s.t;
    sv += v;
    stt += s.t * s.t;
    stv += s.t * v;
    ++n;
  }
  if (n < 2) return 0.0;
  const double denom = n * stt - st * st;
  return (n * stv - st * sv) / denom;
}

} // namespace cbfpc::testsupport
