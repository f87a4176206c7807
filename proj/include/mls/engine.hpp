#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "mls/config.hpp"
#include "mls/dynamics.hpp"
#include "mls/neural.hpp"
#include "mls/roles.hpp"
#include "mls/sensing.hpp"

namespace mls {

// Per-slot state. A slot is reused after its occupant dies; spawning
// reinitializes every field.
struct Boid {
  KinematicState kin;
  double e = 0.0;    // resource depot
  double e_g = 0.0;  // last-step channel values
  double e_e = 0.0;
  double e_c = 0.0;
  double ebar = 0.0;  // moving averages (filter constant tau_ebar)
  double ebar_g = 0.0;
  double ebar_e = 0.0;
  double ebar_c = 0.0;
  double ebar_e_plus = 0.0;
  double m = 0.0;      // movement scalar
  double s_ctl = 0.0;  // last actuation
  double u_ctl = 0.0;
  int overlaps = 0;  // neighbors within d_b at the last sensing
  int age = 0;
  int birth_streak = 0;
  int death_streak = 0;
  int birth_step = -1;  // step the boid spawned on; -1 for initial boids
  bool active = false;
  bool immortal = false;
};

struct World {
  SimConfig cfg;
  std::uint64_t seed = 0;
  int t = 0;
  std::vector<Boid> boids;      // N_max slots
  std::vector<double> z;        // N_max x n
  std::vector<double> zbar;     // N_max x n
  std::vector<double> J;        // N_max x n x n

  // Per-step scratch, sized once at init.
  std::vector<double> obs;      // N_max x obs_dim
  std::vector<double> sig;      // N_max x n
  std::vector<RayReading> rays_scratch;  // N_max x r
  std::vector<double> snap_x, snap_y, snap_e;
  std::vector<std::uint8_t> snap_active;
  std::vector<double> flow_x, flow_y, flow_e;  // exchange inputs and output
  std::vector<double> new_m;
  std::vector<char> role_row;
  std::vector<double> mutation_noise;  // n x n, filled per birth
  SpatialGrid grid;

  double* z_row(int slot) { return z.data() + static_cast<std::size_t>(slot) * cfg.units; }
  double* zbar_row(int slot) { return zbar.data() + static_cast<std::size_t>(slot) * cfg.units; }
  double* J_row(int slot) {
    return J.data() + static_cast<std::size_t>(slot) * cfg.units * cfg.units;
  }
  const double* z_row(int slot) const {
    return z.data() + static_cast<std::size_t>(slot) * cfg.units;
  }
  const double* zbar_row(int slot) const {
    return zbar.data() + static_cast<std::size_t>(slot) * cfg.units;
  }
  const double* J_row(int slot) const {
    return J.data() + static_cast<std::size_t>(slot) * cfg.units * cfg.units;
  }
  int active_count() const;
};

// Receives completed steps for logging. `roles` has one char per slot:
// E/G/S for active boids, '-' for inactive slots.
class StepSink {
 public:
  virtual ~StepSink() = default;
  virtual void on_step(const World& w, std::span<const char> roles) = 0;
};

enum class MutationMode {
  kLearned,  // trained operator: J + g(o) * (1 + eta * xi)
  kUniform,  // ablation: J + U(-bound, bound) per entry
};

struct RolloutOptions {
  bool parallel = true;
  bool reference_impl = false;  // brute-force sensing instead of the grid
  int log_every = 0;            // 0 disables the sink
  StepSink* sink = nullptr;
  bool track_roles = false;     // classify roles even without a sink
  bool record_series = false;   // keep per-step series in the metrics
  MutationMode mutation = MutationMode::kLearned;
  double uniform_bound = 0.05;
};

struct RolloutMetrics {
  double f_e = 0.0;           // sum over steps and active boids of e_g - e_c
  double f_a = 0.0;           // sum over steps and active boids of age
  double pos_exchange = 0.0;  // sum of max(0, e_e)
  int steps = 0;
  // Per-step series, filled when record_series is set.
  std::vector<double> e_plus;    // sum(e_g - e_c) / N_max
  std::vector<double> e_eplus;   // sum(max(0, e_e)) / N_max
  std::vector<int> active_count;
  std::array<std::int64_t, 3> role_steps{};  // boid-steps per Role, track_roles
};

// Places N_min immortal boids; all other slots stay inactive.
World init_rollout(const SimConfig& cfg, std::uint64_t seed);

// Spawns a child of `parent` into the free slot. Halves the parent depot,
// mutates J per options.mutation, resets the parent's birth streak.
void spawn_child(World& w, int parent, int slot, const Substrate& sub,
                 const MutationNet& net, const RolloutOptions& opt);

// Advances the world one step. Deterministic in (world, substrate, net,
// options-that-affect-semantics); thread count never changes results.
void step(World& w, const Substrate& sub, const MutationNet& net,
          const RolloutOptions& opt, RolloutMetrics* metrics);

RolloutMetrics run_rollout(const SimConfig& cfg, const Substrate& sub,
                           const MutationNet& net, std::uint64_t seed,
                           const RolloutOptions& opt);

// Convenience wrapper decoding a flat genome first.
RolloutMetrics run_rollout(const SimConfig& cfg, std::span<const double> genome,
                           std::uint64_t seed, const RolloutOptions& opt);

}  // namespace mls
