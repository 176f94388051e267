#pragma once

// Cart-pole rig: cart of mass m_c sliding horizontally, pole of mass m_p and
// length l hanging from it, force input u on the cart. State ordering is
// q = [p, theta, v, omega] with theta = 0 the rest angle.

#include <cmath>

#include <Eigen/Dense>

#include "cbfpc/errors.hpp"

namespace cbfpc {

struct CartPoleParams {
  double cart_mass = 1.0;
  double pole_mass = 1.0;
  double pole_length = 2.0;
  double gravity = 9.8;

  void check() const {
    if (!(cart_mass > 0.0) || !(pole_mass > 0.0) || !(pole_length > 0.0) || !(gravity > 0.0))
      throw ConfigurationError("cart-pole parameters must be positive");
  }
};

namespace cartpole {

// Shared denominator m_c + m_p*sin^2(theta), bounded away from zero.
inline double inertia(const CartPoleParams& P, double theta) {
  const double s = std::sin(theta);
  return P.cart_mass + P.pole_mass * s * s;
}

inline double f_v(const CartPoleParams& P, double theta, double omega) {
  const double s = std::sin(theta);
  return P.pole_mass * s * (P.pole_length * omega * omega + P.gravity * std::cos(theta)) /
         inertia(P, theta);
}

inline double f_omega(const CartPoleParams& P, double theta, double omega) {
  const double s = std::sin(theta);
  const double num = P.pole_mass * P.pole_length * omega * omega * std::cos(theta) * s +
                     (P.cart_mass + P.pole_mass) * P.gravity * s;
  return -num / (P.pole_length * inertia(P, theta));
}

inline double g_v(const CartPoleParams& P, double theta) { return 1.0 / inertia(P, theta); }

inline double g_omega(const CartPoleParams& P, double theta) {
  return -1.0 / (P.pole_length * inertia(P, theta));
}

// d(g_omega)/d(theta) = m_p*sin(2*theta) / (l * inertia^2)
inline double g_omega_dtheta(const CartPoleParams& P, double theta) {
  const double s = inertia(P, theta);
  return P.pole_mass * std::sin(2.0 * theta) / (P.pole_length * s * s);
}

inline double f_omega_dtheta(const CartPoleParams& P, double theta, double omega) {
  const double s = inertia(P, theta);
  const double s_dtheta = P.pole_mass * std::sin(2.0 * theta);
  const double num = P.pole_mass * P.pole_length * omega * omega * std::cos(theta) *
                         std::sin(theta) +
                     (P.cart_mass + P.pole_mass) * P.gravity * std::sin(theta);
  const double num_dtheta = P.pole_mass * P.pole_length * omega * omega * std::cos(2.0 * theta) +
                            (P.cart_mass + P.pole_mass) * P.gravity * std::cos(theta);
  return (-num_dtheta * s + num * s_dtheta) / (P.pole_length * s * s);
}

inline double f_omega_domega(const CartPoleParams& P, double theta, double omega) {
  return -P.pole_mass * omega * std::sin(2.0 * theta) / inertia(P, theta);
}

// q_dot for q = [p, theta, v, omega] under cart force u.
inline Eigen::Vector4d rhs(const CartPoleParams& P, const Eigen::Vector4d& q, double u) {
  Eigen::Vector4d dq;
  dq[0] = q[2];
  dq[1] = q[3];
  dq[2] = f_v(P, q[1], q[3]) + g_v(P, q[1]) * u;
  dq[3] = f_omega(P, q[1], q[3]) + g_omega(P, q[1]) * u;
  return dq;
}

} // namespace cartpole
} // namespace cbfpc
