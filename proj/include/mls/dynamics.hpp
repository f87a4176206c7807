#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>

namespace mls {

struct KinematicState {
  double x = 0.0;
  double y = 0.0;
  double theta = 0.0;  // heading, (-pi, pi]
  double vx = 0.0;
  double vy = 0.0;
  double omega = 0.0;  // angular velocity
};

// Maps any angle into (-pi, pi].
inline double wrap_angle(double a) {
  const double two_pi = 2.0 * std::numbers::pi;
  a = std::fmod(a, two_pi);
  if (a <= -std::numbers::pi) a += two_pi;
  if (a > std::numbers::pi) a -= two_pi;
  return a;
}

struct ControlSignal {
  double s = 0.0;  // thrust along heading
  double u = 0.0;  // turning torque
};

// Squashes raw network activations into bounded actuation, with
// multiplicative noise on each channel.
inline ControlSignal apply_control(double a_s, double a_u, double noise_s,
                                   double noise_u, double epsilon, double d_b) {
  ControlSignal c;
  c.s = 0.5 * d_b * std::tanh(a_s) * (1.0 + epsilon * noise_s);
  c.u = std::tanh(a_u) * (1.0 + epsilon * noise_u);
  return c;
}

// Rescales (x, y) radially so its norm does not exceed bound.
inline void clamp_norm(double& x, double& y, double bound) {
  const double norm = std::hypot(x, y);
  if (norm > bound) {
    const double scale = bound / norm;
    x *= scale;
    y *= scale;
  }
}

// One explicit Euler step of the kinematics. Every derivative is evaluated
// on the incoming state; clamps are applied after the update.
inline KinematicState integrate_step(const KinematicState& k, const ControlSignal& c,
                                     double dt, double damping, double q_max,
                                     double v_max, double omega_max) {
  KinematicState next;
  next.x = k.x + dt * k.vx;
  next.y = k.y + dt * k.vy;
  next.theta = wrap_angle(k.theta + dt * k.omega);
  next.vx = k.vx + dt * (c.s * std::cos(k.theta) - damping * k.vx);
  next.vy = k.vy + dt * (c.s * std::sin(k.theta) - damping * k.vy);
  next.omega = k.omega + dt * (c.u - damping * k.omega);
  clamp_norm(next.x, next.y, q_max);
  clamp_norm(next.vx, next.vy, v_max);
  next.omega = std::clamp(next.omega, -omega_max, omega_max);
  return next;
}

}  // namespace mls
