#pragma once

#include <numbers>
#include <stdexcept>
#include <string>

#include <json.hpp>

namespace mls {

// Raised when a configuration document fails validation. The message names
// the offending field.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// World/rollout parameters. Field names follow the config-file keys, which
// transliterate the usual model notation (k_g, e_birth, tau_zbar, ...).
struct SimConfig {
  double dt = 0.1;
  int steps = 4000;  // key "T"
  int n_max = 50;
  int n_min = 5;
  double damping = 0.3;  // key "lambda"
  double d_b = 20.0;     // boid diameter
  double q_max = 10000.0;
  double v_max = 20.0;
  double omega_max = std::numbers::pi / 3.0;
  double epsilon = 0.1;  // actuation noise scale
  double tau_m = 0.04;
  double k_g = 0.1;
  double k_e = 0.2;
  double k_cs = 0.004;
  double k_cu = 0.04;
  double gamma = 0.001;  // depot leak
  double e_max = 100.0;
  double e_g_max = 4.0;
  double e_e_max = 8.0;
  int rays = 11;          // key "r"
  double d_max = 300.0;   // ray reach
  double fov = 1.5 * std::numbers::pi;
  int units = 40;         // key "n", CTRNN hidden units
  double e_birth = 20.0;
  int t_birth = 40;
  double e_death = 2.0;
  int t_death = 40;
  double tau_zbar = 0.04;
  double tau_ebar = 0.04;
  double eta = 0.05;      // mutation noise scale
  int mlp_layers = 2;     // key "l"
  int mlp_hidden = 16;    // key "h"
  int a_min_old = 400;
  int a_max_old = 600;
  double d_spawn = 20.0;
  bool exchange_post_move = true;       // overlaps from post-move positions
  bool exchange_clip_nonnegative = false;  // clamp net exchange into [0, e_e_max]
  int log_every = 1;

  int obs_dim() const { return 2 * rays + 10; }
};

// Group-level optimizer parameters.
struct TrainConfig {
  int groups = 50;     // key "M", CMA-ES population size
  int scenarios = 2;   // key "S"
  double elite_ratio = 0.3;
  double sigma_init = 0.1;
  int generations = 2000;
  double age_fitness_scale = 5e-8;  // key "mu"
  bool fixed_scenarios = false;
  int checkpoint_interval = 100;
  int eigen_interval = 0;  // 0 = ceil(dim / 10)
};

struct Config {
  SimConfig sim;
  TrainConfig train;
};

// Parses a flat JSON object. Missing keys keep their defaults; unknown keys
// are an error. Throws ConfigError.
Config config_from_json(const nlohmann::json& doc);
nlohmann::json config_to_json(const Config& cfg);

Config load_config_file(const std::string& path);

// Throws ConfigError naming the first violated field.
void validate(const Config& cfg);

}  // namespace mls
