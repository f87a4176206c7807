#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>

namespace mls {

// First-order filter shared by every moving average in the model:
// x' = x + dt * tau * (target - x).
inline double filter_step(double x, double target, double tau, double dt) {
  return x + dt * tau * (target - x);
}

// Movement scalar accumulating speed and turn rate.
inline double update_movement(double m, double vx, double vy, double omega,
                              double tau_m, double dt) {
  return filter_step(m, std::hypot(vx, vy) + std::abs(omega), tau_m, dt);
}

// Grazing feeds boids that move less than the population average.
inline double grazing_gain(double m_i, double m_n, double k_g, double cap) {
  return std::clamp(k_g * (m_n - m_i), 0.0, cap);
}

// Signed flow from j's point of view toward i: positive when i is poorer.
// Antisymmetric by construction, capped in magnitude.
inline double pair_transfer(double e_i, double e_j, double k_e, double cap) {
  return std::clamp(k_e * (e_j - e_i), -cap, cap);
}

inline double metabolic_cost(double s, double u, double e, double k_cs, double k_cu,
                             double gamma) {
  return k_cs * std::abs(s) + k_cu * std::abs(u) + gamma * e;
}

inline double apply_depot_update(double e, double e_g, double e_e, double e_c,
                                 double e_max) {
  return std::clamp(e + e_g + e_e - e_c, 0.0, e_max);
}

inline double old_age_probability(int age, int a_min, int a_max) {
  const double p = static_cast<double>(age - a_min) / static_cast<double>(a_max - a_min);
  return std::clamp(p, 0.0, 1.0);
}

// Net exchange per slot: sum of pairwise capped transfers over overlapping
// active pairs (centers strictly closer than d_b), all evaluated on the given
// depot snapshot. With clip_nonnegative the literal channel-clipping reading
// is applied to the net flow instead, which sacrifices the zero-sum property.
inline void exchange_flows(std::span<const double> depot, std::span<const double> x,
                           std::span<const double> y,
                           std::span<const std::uint8_t> active, double d_b,
                           double k_e, double cap, bool clip_nonnegative,
                           std::span<double> out) {
  const int n = static_cast<int>(depot.size());
  const double limit = d_b * d_b;
  for (int i = 0; i < n; ++i) out[i] = 0.0;
  for (int i = 0; i < n; ++i) {
    if (!active[i]) continue;
    for (int j = i + 1; j < n; ++j) {
      if (!active[j]) continue;
      const double dx = x[j] - x[i];
      const double dy = y[j] - y[i];
      if (dx * dx + dy * dy >= limit) continue;
      const double t = pair_transfer(depot[i], depot[j], k_e, cap);
      out[i] += t;
      out[j] -= t;
    }
  }
  if (clip_nonnegative) {
    for (int i = 0; i < n; ++i) out[i] = std::clamp(out[i], 0.0, cap);
  }
}

}  // namespace mls
