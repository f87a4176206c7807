#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

// Deterministic counter-based random streams. Every draw in the project is
// addressed by (seed, stream tag, two coordinates, draw index), so the values
// produced never depend on evaluation order or thread count.

namespace mls::rng {

inline constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ull;

// SplitMix64 finalizer (Steele, Lea, Flood 2014).
inline constexpr std::uint64_t mix64(std::uint64_t z) {
  z ^= z >> 30;
  z *= 0xbf58476d1ce4e5b9ull;
  z ^= z >> 27;
  z *= 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

inline constexpr std::uint64_t combine(std::uint64_t h, std::uint64_t v) {
  return mix64((h + kGolden) ^ v);
}

// Named substreams. Tag values are part of the reproducibility contract;
// never renumber them.
enum class Tag : std::uint64_t {
  kInit = 1,            // rollout initialization, coords (slot, 0)
  kControl = 2,         // per-step actuation noise, coords (step, slot)
  kOldAge = 3,          // old-age elimination draws, coords (step, slot)
  kSpawn = 4,           // birth placement + mutation noise, coords (step, parent slot)
  kCmaSample = 5,       // optimizer sampling, coords (generation, candidate)
  kScenario = 6,        // scenario seed derivation, coords (generation, scenario)
  kSubstratePrior = 7,  // random-substrate sampling in ablations, coords (0, 0)
};

class Stream {
 public:
  Stream(std::uint64_t seed, Tag tag, std::uint64_t a = 0, std::uint64_t b = 0)
      : key_(combine(combine(combine(mix64(seed ^ kGolden),
                                     static_cast<std::uint64_t>(tag)),
                             a),
                     b)) {}

  std::uint64_t bits(std::uint64_t idx) const { return combine(key_, idx); }

  // Uniform in [0, 1).
  double uniform(std::uint64_t idx) const {
    return static_cast<double>(bits(idx) >> 11) * 0x1.0p-53;
  }

  double uniform(std::uint64_t idx, double lo, double hi) const {
    return lo + uniform(idx) * (hi - lo);
  }

  // Standard normal via Box-Muller; draw idx consumes uniforms 2*idx, 2*idx+1.
  double gaussian(std::uint64_t idx) const {
    const double u1 = 1.0 - uniform(2 * idx);  // (0, 1], keeps the log finite
    const double u2 = uniform(2 * idx + 1);
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * std::numbers::pi * u2);
  }

  // Angle in (-pi, pi].
  double angle(std::uint64_t idx) const {
    return std::numbers::pi - uniform(idx) * 2.0 * std::numbers::pi;
  }

 private:
  std::uint64_t key_;
};

// Derives a child seed, e.g. the per-scenario rollout seeds.
inline std::uint64_t derive_seed(std::uint64_t seed, Tag tag, std::uint64_t a,
                                 std::uint64_t b) {
  return Stream(seed, tag, a, b).bits(0);
}

}  // namespace mls::rng
