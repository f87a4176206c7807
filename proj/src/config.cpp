#include "mls/config.hpp"

#include <cmath>
#include <fstream>
#include <set>

namespace mls {

namespace {

using nlohmann::json;

template <typename T>
void read(const json& doc, std::set<std::string>& seen, const char* key, T& out) {
  if (auto it = doc.find(key); it != doc.end()) {
    seen.insert(key);
    try {
      out = it->get<T>();
    } catch (const json::exception&) {
      throw ConfigError(std::string("config field \"") + key + "\" has the wrong type");
    }
  }
}

void require_finite(double v, const char* key) {
  if (!std::isfinite(v)) {
    throw ConfigError(std::string("config field \"") + key + "\" must be finite");
  }
}

void require_positive(double v, const char* key) {
  require_finite(v, key);
  if (v <= 0.0) {
    throw ConfigError(std::string("config field \"") + key + "\" must be positive");
  }
}

void require_nonnegative(double v, const char* key) {
  require_finite(v, key);
  if (v < 0.0) {
    throw ConfigError(std::string("config field \"") + key + "\" must be non-negative");
  }
}

}  // namespace

Config config_from_json(const json& doc) {
  if (!doc.is_object()) {
    throw ConfigError("config document must be a JSON object");
  }
  Config cfg;
  std::set<std::string> seen;
  SimConfig& s = cfg.sim;
  read(doc, seen, "dt", s.dt);
  read(doc, seen, "T", s.steps);
  read(doc, seen, "N_max", s.n_max);
  read(doc, seen, "N_min", s.n_min);
  read(doc, seen, "lambda", s.damping);
  read(doc, seen, "d_b", s.d_b);
  read(doc, seen, "q_max", s.q_max);
  read(doc, seen, "v_max", s.v_max);
  read(doc, seen, "omega_max", s.omega_max);
  read(doc, seen, "epsilon", s.epsilon);
  read(doc, seen, "tau_m", s.tau_m);
  read(doc, seen, "k_g", s.k_g);
  read(doc, seen, "k_e", s.k_e);
  read(doc, seen, "k_cs", s.k_cs);
  read(doc, seen, "k_cu", s.k_cu);
  read(doc, seen, "gamma", s.gamma);
  read(doc, seen, "e_max", s.e_max);
  read(doc, seen, "e_g_max", s.e_g_max);
  read(doc, seen, "e_e_max", s.e_e_max);
  read(doc, seen, "r", s.rays);
  read(doc, seen, "d_max", s.d_max);
  read(doc, seen, "fov", s.fov);
  read(doc, seen, "n", s.units);
  read(doc, seen, "e_birth", s.e_birth);
  read(doc, seen, "t_birth", s.t_birth);
  read(doc, seen, "e_death", s.e_death);
  read(doc, seen, "t_death", s.t_death);
  read(doc, seen, "tau_zbar", s.tau_zbar);
  read(doc, seen, "tau_ebar", s.tau_ebar);
  read(doc, seen, "eta", s.eta);
  read(doc, seen, "l", s.mlp_layers);
  read(doc, seen, "h", s.mlp_hidden);
  read(doc, seen, "a_min_old", s.a_min_old);
  read(doc, seen, "a_max_old", s.a_max_old);
  read(doc, seen, "d_spawn", s.d_spawn);
  read(doc, seen, "exchange_post_move", s.exchange_post_move);
  read(doc, seen, "exchange_clip_nonnegative", s.exchange_clip_nonnegative);
  read(doc, seen, "log_every", s.log_every);
  TrainConfig& t = cfg.train;
  read(doc, seen, "M", t.groups);
  read(doc, seen, "S", t.scenarios);
  read(doc, seen, "elite_ratio", t.elite_ratio);
  read(doc, seen, "sigma_init", t.sigma_init);
  read(doc, seen, "generations", t.generations);
  read(doc, seen, "mu", t.age_fitness_scale);
  read(doc, seen, "fixed_scenarios", t.fixed_scenarios);
  read(doc, seen, "checkpoint_interval", t.checkpoint_interval);
  read(doc, seen, "eigen_interval", t.eigen_interval);
  for (auto it = doc.begin(); it != doc.end(); ++it) {
    if (!seen.count(it.key())) {
      throw ConfigError("unknown config field \"" + it.key() + "\"");
    }
  }
  validate(cfg);
  return cfg;
}

nlohmann::json config_to_json(const Config& cfg) {
  const SimConfig& s = cfg.sim;
  const TrainConfig& t = cfg.train;
  return json{
      {"dt", s.dt},
      {"T", s.steps},
      {"N_max", s.n_max},
      {"N_min", s.n_min},
      {"lambda", s.damping},
      {"d_b", s.d_b},
      {"q_max", s.q_max},
      {"v_max", s.v_max},
      {"omega_max", s.omega_max},
      {"epsilon", s.epsilon},
      {"tau_m", s.tau_m},
      {"k_g", s.k_g},
      {"k_e", s.k_e},
      {"k_cs", s.k_cs},
      {"k_cu", s.k_cu},
      {"gamma", s.gamma},
      {"e_max", s.e_max},
      {"e_g_max", s.e_g_max},
      {"e_e_max", s.e_e_max},
      {"r", s.rays},
      {"d_max", s.d_max},
      {"fov", s.fov},
      {"n", s.units},
      {"e_birth", s.e_birth},
      {"t_birth", s.t_birth},
      {"e_death", s.e_death},
      {"t_death", s.t_death},
      {"tau_zbar", s.tau_zbar},
      {"tau_ebar", s.tau_ebar},
      {"eta", s.eta},
      {"l", s.mlp_layers},
      {"h", s.mlp_hidden},
      {"a_min_old", s.a_min_old},
      {"a_max_old", s.a_max_old},
      {"d_spawn", s.d_spawn},
      {"exchange_post_move", s.exchange_post_move},
      {"exchange_clip_nonnegative", s.exchange_clip_nonnegative},
      {"log_every", s.log_every},
      {"M", t.groups},
      {"S", t.scenarios},
      {"elite_ratio", t.elite_ratio},
      {"sigma_init", t.sigma_init},
      {"generations", t.generations},
      {"mu", t.age_fitness_scale},
      {"fixed_scenarios", t.fixed_scenarios},
      {"checkpoint_interval", t.checkpoint_interval},
      {"eigen_interval", t.eigen_interval},
  };
}

Config load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("cannot open config file: " + path);
  }
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("config file " + path + " is not valid JSON: " + e.what());
  }
  // A run manifest embeds the config it ran with; accept either form.
  if (doc.is_object() && doc.contains("resolved_config")) {
    doc = doc["resolved_config"];
  }
  return config_from_json(doc);
}

void validate(const Config& cfg) {
  const SimConfig& s = cfg.sim;
  const TrainConfig& t = cfg.train;
  require_positive(s.dt, "dt");
  if (s.steps < 1) throw ConfigError("config field \"T\" must be at least 1");
  if (s.n_max < 1) throw ConfigError("config field \"N_max\" must be at least 1");
  if (s.n_min < 0) throw ConfigError("config field \"N_min\" must be non-negative");
  if (s.n_min > s.n_max) throw ConfigError("config field \"N_min\" must not exceed \"N_max\"");
  require_nonnegative(s.damping, "lambda");
  require_positive(s.d_b, "d_b");
  require_positive(s.q_max, "q_max");
  require_positive(s.v_max, "v_max");
  require_positive(s.omega_max, "omega_max");
  require_nonnegative(s.epsilon, "epsilon");
  require_positive(s.tau_m, "tau_m");
  require_nonnegative(s.k_g, "k_g");
  require_nonnegative(s.k_e, "k_e");
  require_nonnegative(s.k_cs, "k_cs");
  require_nonnegative(s.k_cu, "k_cu");
  require_nonnegative(s.gamma, "gamma");
  require_positive(s.e_max, "e_max");
  require_nonnegative(s.e_g_max, "e_g_max");
  require_nonnegative(s.e_e_max, "e_e_max");
  if (s.rays < 1) throw ConfigError("config field \"r\" must be at least 1");
  require_positive(s.d_max, "d_max");
  require_positive(s.fov, "fov");
  if (s.units < 1) throw ConfigError("config field \"n\" must be at least 1");
  require_nonnegative(s.e_birth, "e_birth");
  if (s.t_birth < 1) throw ConfigError("config field \"t_birth\" must be at least 1");
  require_nonnegative(s.e_death, "e_death");
  if (s.t_death < 1) throw ConfigError("config field \"t_death\" must be at least 1");
  if (s.e_death >= s.e_birth) {
    throw ConfigError("config field \"e_death\" must be below \"e_birth\"");
  }
  require_positive(s.tau_zbar, "tau_zbar");
  require_positive(s.tau_ebar, "tau_ebar");
  require_nonnegative(s.eta, "eta");
  if (s.mlp_layers < 1) throw ConfigError("config field \"l\" must be at least 1");
  if (s.mlp_hidden < 1) throw ConfigError("config field \"h\" must be at least 1");
  if (s.a_min_old < 0) throw ConfigError("config field \"a_min_old\" must be non-negative");
  if (s.a_max_old <= s.a_min_old) {
    throw ConfigError("config field \"a_max_old\" must exceed \"a_min_old\"");
  }
  require_nonnegative(s.d_spawn, "d_spawn");
  if (s.log_every < 1) throw ConfigError("config field \"log_every\" must be at least 1");
  if (t.groups < 2) throw ConfigError("config field \"M\" must be at least 2");
  if (t.scenarios < 1) throw ConfigError("config field \"S\" must be at least 1");
  require_positive(t.elite_ratio, "elite_ratio");
  if (static_cast<int>(std::floor(t.elite_ratio * t.groups)) < 1) {
    throw ConfigError("config field \"elite_ratio\" too small: floor(elite_ratio * M) must be at least 1");
  }
  require_positive(t.sigma_init, "sigma_init");
  if (t.generations < 1) throw ConfigError("config field \"generations\" must be at least 1");
  require_nonnegative(t.age_fitness_scale, "mu");
  if (t.checkpoint_interval < 0) {
    throw ConfigError("config field \"checkpoint_interval\" must be non-negative");
  }
  if (t.eigen_interval < 0) {
    throw ConfigError("config field \"eigen_interval\" must be non-negative");
  }
}

}  // namespace mls
