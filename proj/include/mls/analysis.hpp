#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mls/config.hpp"
#include "mls/roles.hpp"

namespace mls {

struct RoleProportions {
  double exchange = 0.0;
  double grazing = 0.0;
  double suboptimal = 0.0;
};

// Fractions over the active role characters (E/G/S); '-' entries are
// inactive slots and do not count. All-inactive steps return zeros.
RoleProportions proportions_of(std::span<const char> roles);

// Trailing moving average with window `bins`; the warm-up prefix averages
// over the samples seen so far.
std::vector<double> smooth_trailing(std::span<const double> series, int bins);

// Mean positive exchange per boid-step across a generation's rollouts:
// sum of the per-rollout positive-exchange masses over M*S*N_max*T.
double generation_exchange_metric(std::span<const double> pos_exchange_sums,
                                  int n_max, int steps);

// One parsed row of a trajectory log.
struct TrajectoryRow {
  int step = 0;
  int slot = 0;
  bool active = false;
  double x = 0.0, y = 0.0, theta = 0.0;
  double e = 0.0, e_g = 0.0, e_e = 0.0, e_c = 0.0, m = 0.0;
  char role = '-';
};

// Reads a `step,slot,active,x,y,theta,e,e_g,e_e,e_c,m,role` file. Throws
// std::runtime_error on malformed input.
std::vector<TrajectoryRow> load_trajectory_csv(const std::string& path);

// Recompute oracles over raw logs; these must agree with the engine's
// streaming accumulators.
double recompute_pos_exchange(std::span<const TrajectoryRow> rows);

// e_plus(t) = sum over active boids of (e_g - e_c) / n_max, one value per
// distinct step in row order.
std::vector<double> net_resource_series(std::span<const TrajectoryRow> rows, int n_max);

// Per-step role fractions from logged role characters, row order preserved.
std::vector<RoleProportions> role_proportions_series(std::span<const TrajectoryRow> rows);

enum class AblationSetting { kFull = 0, kSubstrateOnly = 1, kRandomAll = 2 };

const char* ablation_name(AblationSetting s);

struct AblationSeries {
  AblationSetting setting = AblationSetting::kFull;
  std::uint64_t seed = 0;
  std::vector<double> e_plus;   // smoothed per-step net resource gain
  std::vector<double> e_eplus;  // smoothed per-step positive exchange
  double mean_e_plus = 0.0;     // means of the raw series
  double mean_e_eplus = 0.0;
};

// Runs the three settings for every seed:
//   Full          trained substrate, trained mutation operator
//   SubstrateOnly trained substrate, additive U(-bound, bound) mutation
//   RandomAll     substrate drawn from N(0, random_sigma^2), uniform mutation
// Series are smoothed with a trailing filter of `smooth_bins`.
std::vector<AblationSeries> run_ablation(const SimConfig& cfg,
                                         std::span<const double> genome,
                                         std::span<const std::uint64_t> seeds,
                                         int smooth_bins, double uniform_bound,
                                         double random_sigma, bool parallel);

}  // namespace mls
