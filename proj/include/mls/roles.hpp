#pragma once

namespace mls {

// Behavioral label for an active boid, derived from its resource moving
// averages at the end of a step.
enum class Role { kExchange = 0, kGrazing = 1, kSuboptimal = 2 };

// Exchange when the positive-exchange average strictly dominates both the
// grazing and metabolic averages; Grazing symmetrically; everything else,
// including any tie, is Suboptimal.
inline Role classify_role(double ebar_e_plus, double ebar_g, double ebar_c) {
  if (ebar_e_plus > ebar_g && ebar_e_plus > ebar_c) return Role::kExchange;
  if (ebar_g > ebar_e_plus && ebar_g > ebar_c) return Role::kGrazing;
  return Role::kSuboptimal;
}

inline char role_char(Role r) {
  switch (r) {
    case Role::kExchange: return 'E';
    case Role::kGrazing: return 'G';
    case Role::kSuboptimal: return 'S';
  }
  return '-';
}

}  // namespace mls
