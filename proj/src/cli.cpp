#include "mls/cli.hpp"

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#ifdef _OPENMP
#include <omp.h>
#endif

#include "mls/analysis.hpp"
#include "mls/checkpoint.hpp"
#include "mls/config.hpp"
#include "mls/csv.hpp"
#include "mls/engine.hpp"
#include "mls/evolution.hpp"
#include "mls/manifest.hpp"

namespace mls {
namespace {

namespace fs = std::filesystem;

// Precedence: --threads flag, then MLS_THREADS, then the runtime default.
int resolve_threads(int flag_value) {
  if (flag_value > 0) return flag_value;
  if (const char* env = std::getenv("MLS_THREADS")) {
    const int v = std::atoi(env);
    if (v > 0) return v;
  }
  return 0;
}

void apply_threads(int threads) {
#ifdef _OPENMP
  if (threads > 0) omp_set_num_threads(threads);
#else
  (void)threads;
#endif
}

Config load_config_or_defaults(const std::string& path) {
  if (path.empty()) {
    Config cfg;
    validate(cfg);
    return cfg;
  }
  return load_config_file(path);
}

void check_checkpoint_layout(const Checkpoint& cp, const SimConfig& cfg) {
  const auto mismatch = [](const char* field, int a, int b) {
    throw ConfigError(std::string("checkpoint ") + field + "=" + std::to_string(a) +
                      " disagrees with config " + field + "=" + std::to_string(b));
  };
  if (cp.units != cfg.units) mismatch("n", cp.units, cfg.units);
  if (cp.rays != cfg.rays) mismatch("r", cp.rays, cfg.rays);
  if (cp.layers != cfg.mlp_layers) mismatch("l", cp.layers, cfg.mlp_layers);
  if (cp.hidden != cfg.mlp_hidden) mismatch("h", cp.hidden, cfg.mlp_hidden);
  const GenomeLayout layout =
      GenomeLayout::make(cfg.units, cfg.rays, cfg.mlp_layers, cfg.mlp_hidden);
  if (static_cast<int>(cp.genome.size()) != layout.total_length()) {
    throw ConfigError("checkpoint genome length " + std::to_string(cp.genome.size()) +
                      " does not match the configured layout (" +
                      std::to_string(layout.total_length()) + ")");
  }
}

// Streams one rollout into the three inference CSVs.
class TrajectorySink : public StepSink {
 public:
  TrajectorySink(const std::string& dir)
      : traj_(dir + "/trajectory.csv",
              "step,slot,active,x,y,theta,e,e_g,e_e,e_c,m,role"),
        roles_(dir + "/roles.csv", "step,slot,role"),
        props_(dir + "/proportions.csv",
               "step,frac_exchange,frac_grazing,frac_suboptimal") {}

  void on_step(const World& w, std::span<const char> roles) override {
    const int nmax = w.cfg.n_max;
    for (int i = 0; i < nmax; ++i) {
      const Boid& b = w.boids[i];
      std::string row = std::to_string(w.t);
      row += ',';
      row += std::to_string(i);
      row += ',';
      row += b.active ? '1' : '0';
      row += ',';
      row += format_double(b.kin.x);
      row += ',';
      row += format_double(b.kin.y);
      row += ',';
      row += format_double(b.kin.theta);
      row += ',';
      row += format_double(b.e);
      row += ',';
      row += format_double(b.e_g);
      row += ',';
      row += format_double(b.e_e);
      row += ',';
      row += format_double(b.e_c);
      row += ',';
      row += format_double(b.m);
      row += ',';
      row += roles[i];
      traj_.write_row(row);
      std::string role_row = std::to_string(w.t);
      role_row += ',';
      role_row += std::to_string(i);
      role_row += ',';
      role_row += roles[i];
      roles_.write_row(role_row);
    }
    const RoleProportions p = proportions_of(roles);
    std::string prop_row = std::to_string(w.t);
    prop_row += ',';
    prop_row += format_double(p.exchange);
    prop_row += ',';
    prop_row += format_double(p.grazing);
    prop_row += ',';
    prop_row += format_double(p.suboptimal);
    props_.write_row(prop_row);
  }

  void flush() {
    traj_.flush();
    roles_.flush();
    props_.flush();
  }

 private:
  CsvWriter traj_;
  CsvWriter roles_;
  CsvWriter props_;
};

struct CommonArgs {
  std::string config_path;
  std::string out_dir = "out";
  int threads = 0;
};

RunManifest start_manifest(const std::string& command, const Config& cfg,
                           int threads) {
  RunManifest m;
  m.command = command;
  m.resolved_config = config_to_json(cfg);
  m.started_at = utc_timestamp();
  m.threads = threads;
  return m;
}

int cmd_train(const CommonArgs& common, std::uint64_t first_seed, int seed_count,
              int generations_override, bool save_cma_state) {
  Config cfg = load_config_or_defaults(common.config_path);
  if (generations_override >= 0) cfg.train.generations = generations_override;
  validate(cfg);
  const int threads = resolve_threads(common.threads);
  apply_threads(threads);
  fs::create_directories(common.out_dir);
  RunManifest manifest = start_manifest("train", cfg, threads);
  const auto t0 = std::chrono::steady_clock::now();

  for (int si = 0; si < seed_count; ++si) {
    const std::uint64_t seed = first_seed + static_cast<std::uint64_t>(si);
    manifest.seeds.push_back(seed);
    const std::string gen_path =
        common.out_dir + "/generations_seed" + std::to_string(seed) + ".csv";
    const std::string cp_path =
        common.out_dir + "/checkpoint_seed" + std::to_string(seed) + ".json";
    CsvWriter gen_csv(gen_path,
                      "generation,seed,best_f,mean_f,best_f_e,best_f_a,e_eplus_mean");
    TrainCallbacks cb;
    cb.on_generation = [&gen_csv, seed](const GenerationRecord& rec) {
      std::string row = std::to_string(rec.generation);
      row += ',';
      row += std::to_string(seed);
      row += ',';
      row += format_double(rec.best_f);
      row += ',';
      row += format_double(rec.mean_f);
      row += ',';
      row += format_double(rec.f_e[rec.best_index]);
      row += ',';
      row += format_double(rec.f_a[rec.best_index]);
      row += ',';
      row += format_double(rec.e_eplus_mean);
      gen_csv.write_row(row);
      if (rec.warnings > 0) {
        std::cerr << "warning: generation " << rec.generation << " had " << rec.warnings
                  << " non-finite fitness value(s); ranked worst\n";
      }
    };
    cb.on_checkpoint = [&cfg, &cp_path, save_cma_state](
                           const CmaEs& strategy, std::span<const double> genome,
                           double best_f, int generation) {
      Checkpoint cp;
      cp.units = cfg.sim.units;
      cp.rays = cfg.sim.rays;
      cp.layers = cfg.sim.mlp_layers;
      cp.hidden = cfg.sim.mlp_hidden;
      cp.generation = generation;
      cp.genome.assign(genome.begin(), genome.end());
      if (std::isfinite(best_f) && generation > 0) cp.best_f = best_f;
      if (save_cma_state) cp.cma_state = strategy.serialize();
      save_checkpoint(cp_path, cp);
    };
    train(cfg, seed, make_rollout_evaluator(cfg), cb, /*parallel=*/true);
    manifest.outputs.push_back(gen_path);
    manifest.outputs.push_back(cp_path);
  }

  manifest.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  save_manifest(common.out_dir + "/manifest.json", manifest);
  return 0;
}

int cmd_infer(const CommonArgs& common, const std::string& checkpoint_path,
              int steps_override, int n_max_override, std::uint64_t seed,
              int log_every) {
  const Checkpoint cp = load_checkpoint(checkpoint_path);
  Config cfg = load_config_or_defaults(common.config_path);
  check_checkpoint_layout(cp, cfg.sim);
  if (n_max_override > 0) cfg.sim.n_max = n_max_override;
  validate(cfg);
  // A zero-step rollout (header-only logs) is allowed here even though a
  // stored config requires at least one step.
  if (steps_override >= 0) cfg.sim.steps = steps_override;
  const int threads = resolve_threads(common.threads);
  apply_threads(threads);
  fs::create_directories(common.out_dir);
  RunManifest manifest = start_manifest("infer", cfg, threads);
  manifest.seeds.push_back(seed);
  manifest.checkpoint = checkpoint_path;
  const auto t0 = std::chrono::steady_clock::now();

  TrajectorySink sink(common.out_dir);
  RolloutOptions opt;
  opt.parallel = true;
  opt.log_every = log_every;
  opt.sink = &sink;
  opt.track_roles = true;
  const RolloutMetrics metrics = run_rollout(cfg.sim, cp.genome, seed, opt);
  sink.flush();

  manifest.outputs = {common.out_dir + "/trajectory.csv", common.out_dir + "/roles.csv",
                      common.out_dir + "/proportions.csv"};
  manifest.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  save_manifest(common.out_dir + "/manifest.json", manifest);
  std::cout << "infer: steps=" << metrics.steps << " f_e=" << format_double(metrics.f_e)
            << " f_a=" << format_double(metrics.f_a)
            << " pos_exchange=" << format_double(metrics.pos_exchange) << '\n';
  return 0;
}

int cmd_ablate(const CommonArgs& common, const std::string& checkpoint_path,
               std::uint64_t first_seed, int seed_count, int steps, int n_max,
               int bins, double uniform_bound, double random_sigma) {
  const Checkpoint cp = load_checkpoint(checkpoint_path);
  Config cfg = load_config_or_defaults(common.config_path);
  check_checkpoint_layout(cp, cfg.sim);
  cfg.sim.steps = steps;
  cfg.sim.n_max = n_max;
  validate(cfg);
  const int threads = resolve_threads(common.threads);
  apply_threads(threads);
  fs::create_directories(common.out_dir);
  RunManifest manifest = start_manifest("ablate", cfg, threads);
  manifest.checkpoint = checkpoint_path;
  const auto t0 = std::chrono::steady_clock::now();

  std::vector<std::uint64_t> seeds(seed_count);
  for (int i = 0; i < seed_count; ++i) {
    seeds[i] = first_seed + static_cast<std::uint64_t>(i);
    manifest.seeds.push_back(seeds[i]);
  }
  const std::vector<AblationSeries> series = run_ablation(
      cfg.sim, cp.genome, seeds, bins, uniform_bound, random_sigma, /*parallel=*/true);

  const std::string path = common.out_dir + "/ablation.csv";
  CsvWriter csv(path, "setting,seed,step,e_plus,e_eplus");
  for (const AblationSeries& s : series) {
    const std::string prefix =
        std::string(ablation_name(s.setting)) + ',' + std::to_string(s.seed) + ',';
    for (std::size_t t = 0; t < s.e_plus.size(); ++t) {
      std::string row = prefix;
      row += std::to_string(t);
      row += ',';
      row += format_double(s.e_plus[t]);
      row += ',';
      row += format_double(s.e_eplus[t]);
      csv.write_row(row);
    }
    std::cout << "ablate: " << ablation_name(s.setting) << " seed=" << s.seed
              << " mean_e_plus=" << format_double(s.mean_e_plus)
              << " mean_e_eplus=" << format_double(s.mean_e_eplus) << '\n';
  }

  manifest.outputs = {path};
  manifest.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  save_manifest(common.out_dir + "/manifest.json", manifest);
  return 0;
}

int cmd_analyze(const CommonArgs& common, const std::string& log_path, int n_max) {
  Config cfg = load_config_or_defaults(common.config_path);
  if (n_max > 0) cfg.sim.n_max = n_max;
  fs::create_directories(common.out_dir);
  RunManifest manifest = start_manifest("analyze", cfg, 0);
  manifest.checkpoint = "";
  const auto t0 = std::chrono::steady_clock::now();

  const std::vector<TrajectoryRow> rows = load_trajectory_csv(log_path);
  std::vector<int> step_ids;
  for (const TrajectoryRow& r : rows) {
    if (step_ids.empty() || step_ids.back() != r.step) step_ids.push_back(r.step);
  }
  const std::vector<double> e_plus = net_resource_series(rows, cfg.sim.n_max);
  const std::vector<RoleProportions> props = role_proportions_series(rows);
  const double pos_exchange = recompute_pos_exchange(rows);

  const std::string props_path = common.out_dir + "/proportions.csv";
  CsvWriter props_csv(props_path, "step,frac_exchange,frac_grazing,frac_suboptimal");
  for (std::size_t i = 0; i < props.size(); ++i) {
    std::string row = std::to_string(step_ids[i]);
    row += ',';
    row += format_double(props[i].exchange);
    row += ',';
    row += format_double(props[i].grazing);
    row += ',';
    row += format_double(props[i].suboptimal);
    props_csv.write_row(row);
  }
  const std::string eplus_path = common.out_dir + "/e_plus.csv";
  CsvWriter eplus_csv(eplus_path, "step,e_plus");
  for (std::size_t i = 0; i < e_plus.size(); ++i) {
    std::string row = std::to_string(step_ids[i]);
    row += ',';
    row += format_double(e_plus[i]);
    eplus_csv.write_row(row);
  }
  nlohmann::json summary;
  summary["rows"] = rows.size();
  summary["steps"] = step_ids.size();
  summary["pos_exchange"] = pos_exchange;
  const std::string summary_path = common.out_dir + "/summary.json";
  std::ofstream summary_out(summary_path, std::ios::binary);
  summary_out << summary.dump(2) << '\n';

  manifest.outputs = {props_path, eplus_path, summary_path};
  manifest.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  save_manifest(common.out_dir + "/manifest.json", manifest);
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"multi-level selection boid ecology"};
  app.require_subcommand(1);

  CommonArgs common;

  auto* train_cmd = app.add_subcommand("train", "run group-level selection");
  std::uint64_t train_seed = 1;
  int train_seeds = 1;
  int train_generations = -1;
  bool save_cma_state = false;
  train_cmd->add_option("--config", common.config_path, "JSON config file");
  train_cmd->add_option("--seed", train_seed, "first training seed");
  train_cmd->add_option("--seeds", train_seeds, "number of training seeds")
      ->check(CLI::PositiveNumber);
  train_cmd->add_option("--generations", train_generations, "override generation count");
  train_cmd->add_option("--out", common.out_dir, "output directory");
  train_cmd->add_option("--threads", common.threads, "worker thread cap");
  train_cmd->add_flag("--cma-state", save_cma_state,
                      "embed optimizer state in checkpoints");

  auto* infer_cmd = app.add_subcommand("infer", "run one rollout from a checkpoint");
  std::string infer_checkpoint;
  int infer_steps = -1;
  int infer_n_max = 0;
  std::uint64_t infer_seed = 1;
  int log_every = 1;
  infer_cmd->add_option("checkpoint", infer_checkpoint, "checkpoint JSON")->required();
  infer_cmd->add_option("--config", common.config_path, "JSON config file");
  infer_cmd->add_option("--steps", infer_steps, "override step count");
  infer_cmd->add_option("--n-max", infer_n_max, "override slot count");
  infer_cmd->add_option("--seed", infer_seed, "rollout seed");
  infer_cmd->add_option("--log-every", log_every, "log every k-th step")
      ->check(CLI::PositiveNumber);
  infer_cmd->add_option("--out", common.out_dir, "output directory");
  infer_cmd->add_option("--threads", common.threads, "worker thread cap");

  auto* ablate_cmd = app.add_subcommand("ablate", "three-setting ablation rollouts");
  std::string ablate_checkpoint;
  std::uint64_t ablate_seed = 1;
  int ablate_seeds = 3;
  int ablate_steps = 10000;
  int ablate_n_max = 100;
  int ablate_bins = 500;
  double uniform_bound = 0.05;
  double random_sigma = 0.1;
  ablate_cmd->add_option("checkpoint", ablate_checkpoint, "checkpoint JSON")->required();
  ablate_cmd->add_option("--config", common.config_path, "JSON config file");
  ablate_cmd->add_option("--seed", ablate_seed, "first rollout seed");
  ablate_cmd->add_option("--seeds", ablate_seeds, "seeds per setting")
      ->check(CLI::PositiveNumber);
  ablate_cmd->add_option("--steps", ablate_steps, "rollout length")
      ->check(CLI::PositiveNumber);
  ablate_cmd->add_option("--n-max", ablate_n_max, "slot count")
      ->check(CLI::PositiveNumber);
  ablate_cmd->add_option("--bins", ablate_bins, "smoothing window")
      ->check(CLI::PositiveNumber);
  ablate_cmd->add_option("--uniform-bound", uniform_bound,
                         "bound of the replacement mutation noise");
  ablate_cmd->add_option("--random-sigma", random_sigma,
                         "random-substrate sampling scale");
  ablate_cmd->add_option("--out", common.out_dir, "output directory");
  ablate_cmd->add_option("--threads", common.threads, "worker thread cap");

  auto* analyze_cmd = app.add_subcommand("analyze", "recompute metrics from logs");
  std::string analyze_log;
  int analyze_n_max = 0;
  analyze_cmd->add_option("log", analyze_log, "trajectory CSV")->required();
  analyze_cmd->add_option("--config", common.config_path, "JSON config file");
  analyze_cmd->add_option("--n-max", analyze_n_max, "slot count used in the log");
  analyze_cmd->add_option("--out", common.out_dir, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (train_cmd->parsed()) {
      return cmd_train(common, train_seed, train_seeds, train_generations,
                       save_cma_state);
    }
    if (infer_cmd->parsed()) {
      return cmd_infer(common, infer_checkpoint, infer_steps, infer_n_max, infer_seed,
                       log_every);
    }
    if (ablate_cmd->parsed()) {
      return cmd_ablate(common, ablate_checkpoint, ablate_seed, ablate_seeds,
                        ablate_steps, ablate_n_max, ablate_bins, uniform_bound,
                        random_sigma);
    }
    if (analyze_cmd->parsed()) {
      return cmd_analyze(common, analyze_log, analyze_n_max);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace mls
