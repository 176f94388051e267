#pragma once

// Reference solvers: exact QP solutions by exhaustive KKT enumeration, the
// closed-form single-obstacle filter, phase-I initialization and barrier
// centering. These are correctness anchors and per-step baselines, not the
// fast path.

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cbfpc/errors.hpp"
#include "cbfpc/tv_qp.hpp"

namespace cbfpc {

struct QpSolution {
  Vector y;
  std::vector<int> active_set; // ascending row indices held with equality
  Vector multipliers;          // one per active row, same order
  double objective_value = 0.0;
};

namespace detail {

constexpr double kKktFeasTol = 1e-10;       // accepted constraint violation
constexpr double kKktMultiplierTol = 1e-10; // accepted multiplier negativity
constexpr double kKktTieTol = 1e-12;        // objective values closer than this tie

// Solve the equality-constrained QP with rows S active:
//   [2Q  A_S] [y]   [2H ]
//   [A_S'  0] [l] = [B_S]
// Returns false when the KKT matrix is singular (dependent active rows).
inline bool solve_active_subset(const Matrix& Q, const Vector& H, const Matrix& A,
                                const Vector& B, const std::vector<int>& S, Vector& y,
                                Vector& lambda) {
  const int m = static_cast<int>(Q.rows());
  const int k = static_cast<int>(S.size());
  Matrix K = Matrix::Zero(m + k, m + k);
  K.topLeftCorner(m, m) = 2.0 * Q;
  Vector rhs(m + k);
  rhs.head(m) = 2.0 * H;
  for (int j = 0; j < k; ++j) {
    K.block(0, m + j, m, 1) = A.col(S[j]);
    K.block(m + j, 0, 1, m) = A.col(S[j]).transpose();
    rhs[m + j] = B[S[j]];
  }
  Eigen::FullPivLU<Matrix> lu(K);
  if (!lu.isInvertible()) return false;
  Vector z = lu.solve(rhs);
  y = z.head(m);
  lambda = z.tail(k);
  return true;
}

} // namespace detail

// Exact minimizer of the constrained QP at state x by enumerating candidate
// active sets. Exponential in the row count, hence the hard cap; meant for
// the small filters this library targets and as ground truth in tests.
// Deterministic: ties on the objective resolve to the lexicographically
// smallest active set.
inline QpSolution solve_kkt_enumeration(const TimeVaryingQp& qp, const Vector& x,
                                        const Vector& theta = Vector(0)) {
  qp.check();
  const int m = qp.dim();
  const int p = qp.constraints.count();
  if (p > 20)
    throw CapacityExceeded("active-set enumeration capped at 20 rows, got " + std::to_string(p));

  const Vector H = qp.objective.target_at(x, theta);
  const Matrix A = p > 0 ? qp.constraints.normals(x) : Matrix(m, 0);
  const Vector B = p > 0 ? qp.constraints.bounds(x) : Vector(0);

  bool found = false;
  QpSolution best;
  const int max_active = std::min(p, m); // > m active rows cannot be independent

  for (unsigned long mask = 0; mask < (1ul << p); ++mask) {
    std::vector<int> S;
    for (int i = 0; i < p; ++i)
      if (mask & (1ul << i)) S.push_back(i);
    if (static_cast<int>(S.size()) > max_active) continue;

    Vector y, lambda;
    if (!detail::solve_active_subset(qp.objective.Q, H, A, B, S, y, lambda)) continue;
    if (lambda.size() > 0 && lambda.minCoeff() < -detail::kKktMultiplierTol) continue;
    Vector F = p > 0 ? Vector(A.transpose() * y - B) : Vector(0);
    if (F.size() > 0 && F.maxCoeff() > detail::kKktFeasTol) continue;

    const double value = qp.objective.value(y, x, theta);
    const bool better =
        !found || value < best.objective_value - detail::kKktTieTol ||
        (value <= best.objective_value + detail::kKktTieTol &&
         std::lexicographical_compare(S.begin(), S.end(), best.active_set.begin(),
                                      best.active_set.end()));
    if (better) {
      best.y = y;
      best.active_set = S;
      best.multipliers = lambda.cwiseMax(0.0);
      best.objective_value = value;
      found = true;
    }
  }
  if (!found)
    throw InfeasibleProblem("no KKT point satisfies feasibility and dual nonnegativity");
  return best;
}

// Closed-form filter for a planar integrator steered by v_d = k_d*(target-x)
// around one circular obstacle: project the nominal velocity onto the
// half-plane n'v >= -alpha*h along the obstacle normal n = (x-center)/|..|.
inline Eigen::Vector2d single_obstacle_filter(const Eigen::Vector2d& x,
                                              const Eigen::Vector2d& center, double radius,
                                              double k_d, const Eigen::Vector2d& target,
                                              double alpha) {
  const Eigen::Vector2d diff = x - center;
  const double dist = diff.norm();
  if (dist < 1e-9) throw SingularGeometry("state coincides with obstacle center");
  const Eigen::Vector2d n = diff / dist;
  const Eigen::Vector2d v_d = k_d * (target - x);
  const double h = dist - radius;
  const double deficit = -n.dot(v_d) - alpha * h;
  return v_d + std::max(deficit, 0.0) * n;
}

// Phase-I: find y with every residual <= -margin, or certify that none
// exists. Minimizes (s + 1)^2 + eps*|y|^2 over the epigraph rows
// [a_i; -1]'(y, s) <= b_i, which keeps the search bounded without changing
// the feasible set; the tiny eps term just pins down y among equally slack
// points.
inline Vector strictly_feasible_init(const TimeVaryingQp& qp, const Vector& x,
                                     double margin = 1e-3) {
  qp.check();
  if (!(margin >= 0.0)) throw ConfigurationError("feasibility margin must be nonnegative");
  const int m = qp.dim();
  const int p = qp.constraints.count();
  if (p == 0) return Vector::Zero(m);

  constexpr double kEps = 1e-6;
  constexpr double kPull = 1.0; // target slack the objective pulls s toward

  TimeVaryingQp aug;
  Matrix Qa = Matrix::Identity(m + 1, m + 1) * kEps;
  Qa(m, m) = 1.0;
  Vector ta = Vector::Zero(m + 1);
  ta[m] = -kPull;
  aug.objective = make_objective(std::move(Qa),
                                 [ta](const Vector&, const Vector&) { return ta; });
  aug.constraints.m_y = m + 1;
  const Matrix A = qp.constraints.normals(x);
  const Vector B = qp.constraints.bounds(x);
  for (int i = 0; i < p; ++i) {
    Vector ai(m + 1);
    ai.head(m) = A.col(i);
    ai[m] = -1.0;
    const double bi = B[i];
    aug.constraints.rows.push_back(
        {[ai](const Vector&) { return ai; }, [bi](const Vector&) { return bi; }, nullptr, nullptr});
  }

  QpSolution sol = solve_kkt_enumeration(aug, Vector(0));
  const double slack = sol.y[m];
  if (!(slack <= -margin))
    throw InfeasibleProblem("no strictly feasible point with margin " + std::to_string(margin) +
                            ", best slack " + std::to_string(slack));
  return sol.y.head(m);
}

// Damped Newton descent to the minimizer of the barrier objective at fixed
// (x, theta, c). y0 must be strictly feasible. Terminates on the Newton
// decrement, which bounds the remaining objective gap by decrement^2.
inline Vector barrier_minimizer(const BarrierProblem& pr, const Vector& x, const Vector& theta,
                                Vector y, double decrement_tol = 1e-9, int max_iter = 200) {
  double value = barrier_objective(pr, y, x, theta); // also validates feasibility of y
  for (int it = 0; it < max_iter; ++it) {
    const Vector g = barrier_gradient(pr, y, x, theta);
    const Matrix hess = barrier_hessian(pr, y, x, theta);
    Eigen::LDLT<Matrix> ldlt(hess);
    if (ldlt.info() != Eigen::Success)
      throw SingularGeometry("barrier hessian factorization failed");
    const Vector step = ldlt.solve(-g);
    const double decrement = std::sqrt(std::max(0.0, -g.dot(step)));
    if (decrement <= decrement_tol) return y;

    double scale = 1.0;
    bool accepted = false;
    for (int bt = 0; bt < 60; ++bt) {
      const Vector trial = y + scale * step;
      if (strictly_feasible(residuals(pr.qp, trial, x))) {
        const double trial_value = barrier_objective(pr, trial, x, theta);
        if (trial_value < value) {
          y = trial;
          value = trial_value;
          accepted = true;
          break;
        }
      }
      scale *= 0.5;
    }
    if (!accepted) {
      // The predicted improvement decrement^2/2 can drop below the ULP of the
      // objective while the decrement still exceeds decrement_tol; no trial
      // point can then compare strictly smaller. That iterate is converged to
      // machine precision, not stalled.
      const double floor = 16.0 * std::numeric_limits<double>::epsilon() * (1.0 + std::abs(value));
      if (decrement * decrement <= floor) return y;
      throw StepFailed("barrier centering stalled");
    }
  }
  throw StepFailed("barrier centering did not converge within iteration budget");
}

} // namespace cbfpc
