#pragma once

// Time-varying inequality-constrained QP and its log-barrier relaxation.
//
// The decision vector y stacks the filtered input u and any relaxation
// variables. The problem at plant state x and exogenous signal theta is
//
//   min_y  y'Qy - 2*target(x,theta)'y   s.t.  a_i(x)'y - b_i(x) <= 0
//
// and the barrier relaxation replaces the constraints with
// -(1/c) * sum_i log(b_i - a_i'y). Everything here evaluates that relaxed
// objective and its derivatives at a point; no solving happens in this file.

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cbfpc/errors.hpp"

namespace cbfpc {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// Exogenous time signal (reference input, moving target). dim == 0 means the
// problem has no exogenous channel; value/derivative may then stay empty.
struct ExternalSignal {
  int dim = 0;
  std::function<Vector(double)> value;
  std::function<Vector(double)> derivative; // optional, zero when absent

  Vector value_at(double t) const {
    if (dim == 0) return Vector(0);
    if (!value) throw ConfigurationError("external signal has no value function");
    Vector v = value(t);
    if (v.size() != dim) throw ConfigurationError("external signal value has wrong dimension");
    return v;
  }

  Vector derivative_at(double t) const {
    if (dim == 0) return Vector(0);
    if (!derivative) return Vector::Zero(dim);
    Vector v = derivative(t);
    if (v.size() != dim) throw ConfigurationError("external signal derivative has wrong dimension");
    return v;
  }
};

// f0(y) = y'Qy - 2*target'y. Unconstrained minimizer is Q^{-1}*target.
// q_c is a positive lower bound on the eigenvalues of Q, so the hessian 2Q
// of f0 has eigenvalues >= 2*q_c.
struct QuadraticObjective {
  Matrix Q;
  double q_c = 0.0;
  std::function<Vector(const Vector& x, const Vector& theta)> target;
  // Jacobians of target w.r.t. x and theta (dim(y) x dim(x) / dim(y) x
  // dim(theta)). Only needed for drift evaluation; leave empty otherwise.
  std::function<Matrix(const Vector& x, const Vector& theta)> target_jac_x;
  std::function<Matrix(const Vector& x, const Vector& theta)> target_jac_theta;

  int dim() const { return static_cast<int>(Q.rows()); }

  Vector target_at(const Vector& x, const Vector& theta) const {
    if (!target) return Vector::Zero(dim());
    Vector h = target(x, theta);
    if (h.size() != dim()) throw ConfigurationError("objective target has wrong dimension");
    return h;
  }

  double value(const Vector& y, const Vector& x, const Vector& theta) const {
    return y.dot(Q * y) - 2.0 * target_at(x, theta).dot(y);
  }
};

inline double min_eigenvalue(const Matrix& S) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(S, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

inline QuadraticObjective
make_objective(Matrix Q,
               std::function<Vector(const Vector&, const Vector&)> target = nullptr,
               std::function<Matrix(const Vector&, const Vector&)> target_jac_x = nullptr,
               std::function<Matrix(const Vector&, const Vector&)> target_jac_theta = nullptr) {
  if (Q.rows() != Q.cols() || Q.rows() == 0)
    throw ConfigurationError("objective matrix must be square and nonempty");
  if ((Q - Q.transpose()).cwiseAbs().maxCoeff() > 1e-12 * (1.0 + Q.cwiseAbs().maxCoeff()))
    throw ConfigurationError("objective matrix must be symmetric");
  QuadraticObjective obj;
  obj.Q = std::move(Q);
  obj.q_c = min_eigenvalue(obj.Q);
  if (obj.q_c <= 0.0)
    throw ConfigurationError("objective matrix must be positive definite");
  obj.target = std::move(target);
  obj.target_jac_x = std::move(target_jac_x);
  obj.target_jac_theta = std::move(target_jac_theta);
  return obj;
}

// One row a(x)'y <= b(x). The state Jacobians are optional and only pulled
// in by drift evaluation; a_jac_x(x) is dim(y) x dim(x) with column j the
// partial w.r.t. x_j, b_grad_x(x) has dim(x).
struct ConstraintRow {
  std::function<Vector(const Vector& x)> a;
  std::function<double(const Vector& x)> b;
  std::function<Matrix(const Vector& x)> a_jac_x;
  std::function<Vector(const Vector& x)> b_grad_x;
};

struct LinearConstraintSet {
  int m_y = 0; // dimension of y every row must match
  std::vector<ConstraintRow> rows;

  int count() const { return static_cast<int>(rows.size()); }

  // Columns of A are the row normals a_i evaluated at x.
  Matrix normals(const Vector& x) const {
    Matrix A(m_y, count());
    for (int i = 0; i < count(); ++i) {
      Vector ai = rows[i].a(x);
      if (ai.size() != m_y)
        throw ConfigurationError("constraint row " + std::to_string(i) + " has wrong dimension");
      A.col(i) = ai;
    }
    return A;
  }

  Vector bounds(const Vector& x) const {
    Vector b(count());
    for (int i = 0; i < count(); ++i) b[i] = rows[i].b(x);
    return b;
  }

  bool has_state_jacobians() const {
    for (const auto& r : rows)
      if (!r.a_jac_x || !r.b_grad_x) return false;
    return true;
  }
};

inline LinearConstraintSet stack(const LinearConstraintSet& first, const LinearConstraintSet& second) {
  if (first.m_y != second.m_y)
    throw ConfigurationError("cannot stack constraint sets with different y dimensions");
  LinearConstraintSet out = first;
  out.rows.insert(out.rows.end(), second.rows.begin(), second.rows.end());
  return out;
}

// Constrained QP: objective plus rows, dimensions tied together.
struct TimeVaryingQp {
  QuadraticObjective objective;
  LinearConstraintSet constraints;

  int dim() const { return objective.dim(); }

  void check() const {
    if (constraints.m_y != objective.dim())
      throw ConfigurationError("constraint set dimension does not match objective");
  }
};

// Barrier relaxation of a TimeVaryingQp. c > 0 is the barrier sharpness; the
// relaxed minimizer is within count()/c of the constrained optimum in f0.
struct BarrierProblem {
  TimeVaryingQp qp;
  double c = 1.0;
  ExternalSignal theta;
};

// F_i(y, x) = a_i'y - b_i. Strict feasibility means every entry < 0.
inline Vector residuals(const TimeVaryingQp& qp, const Vector& y, const Vector& x) {
  if (y.size() != qp.dim()) throw ConfigurationError("iterate dimension mismatch");
  if (qp.constraints.count() == 0) return Vector(0);
  return qp.constraints.normals(x).transpose() * y - qp.constraints.bounds(x);
}

inline bool strictly_feasible(const Vector& F, double margin = 0.0) {
  for (Eigen::Index i = 0; i < F.size(); ++i)
    if (!(F[i] < -margin)) return false;
  return true;
}

namespace detail {

// d_i = 1/(b_i - a_i'y) = -1/F_i, positive iff strictly feasible.
inline Vector barrier_weights(const Vector& F) {
  Vector d(F.size());
  for (Eigen::Index i = 0; i < F.size(); ++i) {
    if (!(F[i] < 0.0))
      throw InfeasibleEvaluation("barrier evaluated at infeasible point, F[" + std::to_string(i) +
                                 "] = " + std::to_string(F[i]));
    d[i] = -1.0 / F[i];
  }
  return d;
}

inline void check_barrier_inputs(const BarrierProblem& pr, const Vector& y) {
  pr.qp.check();
  if (y.size() != pr.qp.dim()) throw ConfigurationError("iterate dimension mismatch");
  if (!(pr.c > 0.0)) throw ConfigurationError("barrier sharpness must be positive");
}

} // namespace detail

// Relaxed objective f0 + (1/c) * sum_i -log(-F_i).
inline double barrier_objective(const BarrierProblem& pr, const Vector& y, const Vector& x,
                                const Vector& theta) {
  detail::check_barrier_inputs(pr, y);
  double v = pr.qp.objective.value(y, x, theta);
  Vector F = residuals(pr.qp, y, x);
  for (Eigen::Index i = 0; i < F.size(); ++i) {
    if (!(F[i] < 0.0))
      throw InfeasibleEvaluation("barrier evaluated at infeasible point, F[" + std::to_string(i) +
                                 "] = " + std::to_string(F[i]));
    v -= std::log(-F[i]) / pr.c;
  }
  return v;
}

// Gradient in y: 2Qy - 2*target + (1/c) * A * d.
inline Vector barrier_gradient(const BarrierProblem& pr, const Vector& y, const Vector& x,
                               const Vector& theta) {
  detail::check_barrier_inputs(pr, y);
  Vector g = 2.0 * (pr.qp.objective.Q * y) - 2.0 * pr.qp.objective.target_at(x, theta);
  if (pr.qp.constraints.count() > 0) {
    Matrix A = pr.qp.constraints.normals(x);
    Vector d = detail::barrier_weights(A.transpose() * y - pr.qp.constraints.bounds(x));
    g += (A * d) / pr.c;
  }
  return g;
}

// Hessian in y: 2Q + (1/c) * A * diag(d)^2 * A'. Positive definite with
// eigenvalues >= 2*q_c at every strictly feasible point.
inline Matrix barrier_hessian(const BarrierProblem& pr, const Vector& y, const Vector& x,
                              const Vector& theta) {
  detail::check_barrier_inputs(pr, y);
  (void)theta; // hessian of f0 does not depend on the target
  Matrix hess = 2.0 * pr.qp.objective.Q;
  if (pr.qp.constraints.count() > 0) {
    Matrix A = pr.qp.constraints.normals(x);
    Vector d = detail::barrier_weights(A.transpose() * y - pr.qp.constraints.bounds(x));
    hess += (A * d.cwiseAbs2().asDiagonal() * A.transpose()) / pr.c;
  }
  return hess;
}

// Time-drift of the gradient at fixed y, i.e. d/dt [barrier_gradient] along
// x_dot, theta_dot and the barrier schedule rate c_dot:
//
//   -2*(dH/dx * x_dot + dH/dtheta * theta_dot)
//   + (1/c) * sum_i [ d_i * Ja_i - d_i^2 * a_i * (grad b_i - Ja_i'y)' ] * x_dot
//   - (c_dot/c^2) * A * d
//
// Requires the row Jacobians and target Jacobians for every channel whose
// rate is nonzero; missing ones raise PredictionUnavailable.
inline Vector barrier_drift(const BarrierProblem& pr, const Vector& y, const Vector& x,
                            const Vector& x_dot, const Vector& theta, const Vector& theta_dot,
                            double c_dot = 0.0) {
  detail::check_barrier_inputs(pr, y);
  const auto& obj = pr.qp.objective;
  Vector g = Vector::Zero(pr.qp.dim());

  if (x_dot.size() > 0 && x_dot.size() != x.size())
    throw ConfigurationError("state rate dimension mismatch");
  if (theta_dot.size() > 0 && theta_dot.size() != theta.size())
    throw ConfigurationError("signal rate dimension mismatch");
  const bool x_moves = x_dot.size() > 0 && x_dot.cwiseAbs().maxCoeff() > 0.0;
  const bool theta_moves = theta_dot.size() > 0 && theta_dot.cwiseAbs().maxCoeff() > 0.0;

  // A null target is identically zero, so its Jacobians vanish; only a target
  // without Jacobians makes the drift unavailable.
  if (x_moves && obj.target) {
    if (!obj.target_jac_x)
      throw PredictionUnavailable("objective target has no state Jacobian");
    Matrix Hx = obj.target_jac_x(x, theta);
    if (Hx.rows() != pr.qp.dim() || Hx.cols() != x.size())
      throw ConfigurationError("objective target state Jacobian has wrong shape");
    g -= 2.0 * (Hx * x_dot);
  }
  if (theta_moves && obj.target) {
    if (!obj.target_jac_theta)
      throw PredictionUnavailable("objective target has no signal Jacobian");
    Matrix Ht = obj.target_jac_theta(x, theta);
    if (Ht.rows() != pr.qp.dim() || Ht.cols() != theta.size())
      throw ConfigurationError("objective target signal Jacobian has wrong shape");
    g -= 2.0 * (Ht * theta_dot);
  }

  if (pr.qp.constraints.count() > 0) {
    Matrix A = pr.qp.constraints.normals(x);
    Vector F = A.transpose() * y - pr.qp.constraints.bounds(x);
    Vector d = detail::barrier_weights(F);
    if (x_moves) {
      for (int i = 0; i < pr.qp.constraints.count(); ++i) {
        const auto& row = pr.qp.constraints.rows[i];
        if (!row.a_jac_x || !row.b_grad_x)
          throw PredictionUnavailable("constraint row " + std::to_string(i) +
                                      " has no state Jacobians");
        Matrix Ja = row.a_jac_x(x);
        Vector gb = row.b_grad_x(x);
        if (Ja.rows() != pr.qp.dim() || Ja.cols() != x.size() || gb.size() != x.size())
          throw ConfigurationError("constraint row " + std::to_string(i) +
                                   " Jacobian has wrong shape");
        const double Fdot_i = (Ja.transpose() * y - gb).dot(x_dot);
        g += (d[i] * (Ja * x_dot) + d[i] * d[i] * Fdot_i * A.col(i)) / pr.c;
      }
    }
    if (c_dot != 0.0) g -= (c_dot / (pr.c * pr.c)) * (A * d);
  }
  return g;
}

// Gap bound between the relaxed minimizer and the constrained optimum:
// f0(y_c) - f0(y*) <= count()/c.
inline double suboptimality_bound(const BarrierProblem& pr) {
  if (!(pr.c > 0.0)) throw ConfigurationError("barrier sharpness must be positive");
  return pr.qp.constraints.count() / pr.c;
}

} // namespace cbfpc
