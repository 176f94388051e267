#pragma once

// Builders that turn safety specifications into constraint rows and tracking
// objectives. Each row encodes "derivative of a safety/energy function plus
// class-K margin, affine in the decision vector".

#include <cmath>
#include <functional>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "cbfpc/cartpole.hpp"
#include "cbfpc/errors.hpp"
#include "cbfpc/tv_qp.hpp"

namespace cbfpc {

// Keep-out disc for a planar velocity-controlled point. h = |x - center| - r.
struct CircularObstacle {
  Eigen::Vector2d center = Eigen::Vector2d::Zero();
  double radius = 1.0;
  double alpha = 1.0; // class-K rate in h_dot >= -alpha*h

  void check() const {
    if (!(radius > 0.0) || !(alpha > 0.0))
      throw ConfigurationError("obstacle radius and alpha must be positive");
  }

  double h(const Eigen::Vector2d& x) const { return (x - center).norm() - radius; }
};

namespace detail {

inline Eigen::Vector2d obstacle_offset(const CircularObstacle& obs, const Vector& x) {
  if (x.size() != 2) throw ConfigurationError("obstacle rows need a planar state");
  Eigen::Vector2d diff = Eigen::Vector2d(x[0], x[1]) - obs.center;
  if (diff.norm() < 1e-9) throw SingularGeometry("state coincides with obstacle center");
  return diff;
}

} // namespace detail

// Rows -n'v <= alpha*(|x-c|-r) over y = v, one per obstacle, with exact
// state Jacobians (the normal direction rotates with x).
inline LinearConstraintSet obstacle_rows(const std::vector<CircularObstacle>& obstacles) {
  LinearConstraintSet set;
  set.m_y = 2;
  for (const auto& obs : obstacles) {
    obs.check();
    ConstraintRow row;
    row.a = [obs](const Vector& x) -> Vector {
      const Eigen::Vector2d diff = detail::obstacle_offset(obs, x);
      return -diff / diff.norm();
    };
    row.b = [obs](const Vector& x) -> double {
      return obs.alpha * (detail::obstacle_offset(obs, x).norm() - obs.radius);
    };
    row.a_jac_x = [obs](const Vector& x) -> Matrix {
      const Eigen::Vector2d diff = detail::obstacle_offset(obs, x);
      const double n = diff.norm();
      return -Matrix::Identity(2, 2) / n + (diff * diff.transpose()) / (n * n * n);
    };
    row.b_grad_x = [obs](const Vector& x) -> Vector {
      const Eigen::Vector2d diff = detail::obstacle_offset(obs, x);
      return obs.alpha * diff / diff.norm();
    };
    set.rows.push_back(std::move(row));
  }
  return set;
}

// Objective pulling the velocity toward the proportional homing law
// v_d = k_d*(goal - x). Q = I, so the unconstrained minimizer is v_d itself.
inline QuadraticObjective integrator_tracking_objective(double k_d, Eigen::Vector2d goal) {
  if (!(k_d > 0.0)) throw ConfigurationError("homing gain must be positive");
  return make_objective(
      Matrix::Identity(2, 2),
      [k_d, goal](const Vector& x, const Vector&) -> Vector {
        if (x.size() != 2) throw ConfigurationError("homing law needs a planar state");
        return k_d * (goal - Eigen::Vector2d(x[0], x[1]));
      },
      [k_d](const Vector&, const Vector&) -> Matrix { return -k_d * Matrix::Identity(2, 2); },
      nullptr);
}

// Objective pulling y toward the exogenous reference signal. Q = I, target
// is the signal itself.
inline QuadraticObjective signal_tracking_objective(int dim) {
  if (dim <= 0) throw ConfigurationError("objective dimension must be positive");
  return make_objective(
      Matrix::Identity(dim, dim),
      [dim](const Vector&, const Vector& theta) -> Vector {
        if (theta.size() != dim) throw ConfigurationError("reference signal has wrong dimension");
        return theta;
      },
      [dim](const Vector& x, const Vector&) -> Matrix { return Matrix::Zero(dim, x.size()); },
      [dim](const Vector&, const Vector&) -> Matrix { return Matrix::Identity(dim, dim); });
}

// Componentwise input box lower <= y <= upper as 2*m rows with zero state
// Jacobians.
inline LinearConstraintSet box_rows(const Vector& lower, const Vector& upper) {
  if (lower.size() != upper.size()) throw ConfigurationError("box bounds dimension mismatch");
  const int m = static_cast<int>(lower.size());
  for (int i = 0; i < m; ++i)
    if (!(lower[i] < upper[i])) throw ConfigurationError("box bounds must satisfy lower < upper");
  LinearConstraintSet set;
  set.m_y = m;
  for (int i = 0; i < m; ++i) {
    const double up = upper[i];
    const double lo = lower[i];
    ConstraintRow hi;
    hi.a = [m, i](const Vector&) -> Vector { return Vector::Unit(m, i); };
    hi.b = [up](const Vector&) -> double { return up; };
    hi.a_jac_x = [m](const Vector& x) -> Matrix { return Matrix::Zero(m, x.size()); };
    hi.b_grad_x = [](const Vector& x) -> Vector { return Vector::Zero(x.size()); };
    set.rows.push_back(std::move(hi));
    ConstraintRow lo_row;
    lo_row.a = [m, i](const Vector&) -> Vector { return -Vector::Unit(m, i); };
    lo_row.b = [lo](const Vector&) -> double { return -lo; };
    lo_row.a_jac_x = [m](const Vector& x) -> Matrix { return Matrix::Zero(m, x.size()); };
    lo_row.b_grad_x = [](const Vector& x) -> Vector { return Vector::Zero(x.size()); };
    set.rows.push_back(std::move(lo_row));
  }
  return set;
}

// Swing envelope for the cart-pole: base function h = limit^2 - theta^2 has
// relative degree two in the force input, so the row constrains the
// exponential composite h_e = h_dot + mu*h instead.
struct SwingLimit {
  double angle_limit = 0.1; // radians
  double mu = 1.0;          // pole of the composite
  double alpha = 1.0;       // class-K rate on h_e

  void check() const {
    if (!(angle_limit > 0.0) || !(mu > 0.0) || !(alpha > 0.0))
      throw ConfigurationError("swing limit parameters must be positive");
  }

  double h(const Eigen::Vector4d& q) const { return angle_limit * angle_limit - q[1] * q[1]; }

  double h_exp(const Eigen::Vector4d& q) const {
    return -2.0 * q[1] * q[3] + mu * h(q);
  }
};

namespace detail {

inline Eigen::Vector4d as_state4(const Vector& x) {
  if (x.size() != 4) throw ConfigurationError("cart-pole rows need a 4-dim state");
  return Eigen::Vector4d(x[0], x[1], x[2], x[3]);
}

} // namespace detail

// One row over the scalar force input: a = 2*theta*g_omega,
// b = -2*theta*f_omega - 2*omega^2 - 2*mu*theta*omega
//     + alpha*(-2*theta*omega + mu*(limit^2 - theta^2)),
// which is "h_e_dot >= -alpha*h_e" rearranged to a*u <= b.
inline LinearConstraintSet swing_limit_rows(const CartPoleParams& params, const SwingLimit& limit) {
  params.check();
  limit.check();
  LinearConstraintSet set;
  set.m_y = 1;
  ConstraintRow row;
  row.a = [params](const Vector& x) -> Vector {
    const Eigen::Vector4d q = detail::as_state4(x);
    Vector a(1);
    a[0] = 2.0 * q[1] * cartpole::g_omega(params, q[1]);
    return a;
  };
  row.b = [params, limit](const Vector& x) -> double {
    const Eigen::Vector4d q = detail::as_state4(x);
    const double theta = q[1];
    const double omega = q[3];
    const double fw = cartpole::f_omega(params, theta, omega);
    return -2.0 * theta * fw - 2.0 * omega * omega - 2.0 * limit.mu * theta * omega +
           limit.alpha * limit.h_exp(q);
  };
  row.a_jac_x = [params](const Vector& x) -> Matrix {
    const Eigen::Vector4d q = detail::as_state4(x);
    Matrix J = Matrix::Zero(1, 4);
    J(0, 1) = 2.0 * cartpole::g_omega(params, q[1]) +
              2.0 * q[1] * cartpole::g_omega_dtheta(params, q[1]);
    return J;
  };
  row.b_grad_x = [params, limit](const Vector& x) -> Vector {
    const Eigen::Vector4d q = detail::as_state4(x);
    const double theta = q[1];
    const double omega = q[3];
    const double fw = cartpole::f_omega(params, theta, omega);
    const double fw_t = cartpole::f_omega_dtheta(params, theta, omega);
    const double fw_w = cartpole::f_omega_domega(params, theta, omega);
    Vector g = Vector::Zero(4);
    g[1] = -2.0 * fw - 2.0 * theta * fw_t - 2.0 * limit.mu * omega -
           2.0 * limit.alpha * omega - 2.0 * limit.alpha * limit.mu * theta;
    g[3] = -2.0 * theta * fw_w - 4.0 * omega - 2.0 * limit.mu * theta -
           2.0 * limit.alpha * theta;
    return g;
  };
  set.rows.push_back(std::move(row));
  return set;
}

// Full anti-swing filter constraint set: swing envelope first, then the
// force saturation box, matching the logged residual order.
inline LinearConstraintSet cartpole_filter_rows(const CartPoleParams& params,
                                                const SwingLimit& limit, double u_min,
                                                double u_max) {
  Vector lo(1), hi(1);
  lo[0] = u_min;
  hi[0] = u_max;
  return stack(swing_limit_rows(params, limit), box_rows(lo, hi));
}

// Energy-descent row over y = [u, delta]: LfV + LgV'u + beta*V <= delta,
// with the relaxation delta as the last component of y.
struct ClfSpec {
  std::function<double(const Vector& x)> V;
  std::function<double(const Vector& x)> LfV;
  std::function<Vector(const Vector& x)> LgV; // dim m_u
  double beta = 1.0;
  // optional state gradients, only needed for drift evaluation
  std::function<Vector(const Vector& x)> V_grad;
  std::function<Vector(const Vector& x)> LfV_grad;
  std::function<Matrix(const Vector& x)> LgV_jac; // m_u x n
};

inline LinearConstraintSet clf_rows(const ClfSpec& spec, int m_u) {
  if (!(spec.beta > 0.0)) throw ConfigurationError("energy decay rate must be positive");
  if (!spec.V || !spec.LfV || !spec.LgV) throw ConfigurationError("energy row needs V, LfV, LgV");
  LinearConstraintSet set;
  set.m_y = m_u + 1;
  ConstraintRow row;
  row.a = [spec, m_u](const Vector& x) -> Vector {
    Vector a(m_u + 1);
    Vector lg = spec.LgV(x);
    if (lg.size() != m_u) throw ConfigurationError("LgV has wrong dimension");
    a.head(m_u) = lg;
    a[m_u] = -1.0;
    return a;
  };
  row.b = [spec](const Vector& x) -> double { return -spec.LfV(x) - spec.beta * spec.V(x); };
  if (spec.V_grad && spec.LfV_grad && spec.LgV_jac) {
    row.a_jac_x = [spec, m_u](const Vector& x) -> Matrix {
      Matrix J = Matrix::Zero(m_u + 1, x.size());
      J.topRows(m_u) = spec.LgV_jac(x);
      return J;
    };
    row.b_grad_x = [spec](const Vector& x) -> Vector {
      return -spec.LfV_grad(x) - spec.beta * spec.V_grad(x);
    };
  }
  set.rows.push_back(std::move(row));
  return set;
}

// Objective for the relaxed tracking filter over y = [u, delta]:
// |u - u_ref|^2 + relax_weight*delta^2 with the reference from the
// exogenous signal.
inline QuadraticObjective relaxed_tracking_objective(int m_u, double relax_weight) {
  if (m_u <= 0) throw ConfigurationError("input dimension must be positive");
  if (!(relax_weight > 0.0)) throw ConfigurationError("relaxation weight must be positive");
  Matrix Q = Matrix::Identity(m_u + 1, m_u + 1);
  Q(m_u, m_u) = relax_weight;
  return make_objective(
      std::move(Q),
      [m_u](const Vector&, const Vector& theta) -> Vector {
        if (theta.size() != m_u) throw ConfigurationError("reference signal has wrong dimension");
        Vector t = Vector::Zero(m_u + 1);
        t.head(m_u) = theta;
        return t;
      },
      [m_u](const Vector& x, const Vector&) -> Matrix { return Matrix::Zero(m_u + 1, x.size()); },
      [m_u](const Vector&, const Vector&) -> Matrix {
        Matrix J = Matrix::Zero(m_u + 1, m_u);
        J.topRows(m_u) = Matrix::Identity(m_u, m_u);
        return J;
      });
}

} // namespace cbfpc
