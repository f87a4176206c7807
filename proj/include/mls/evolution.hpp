#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "mls/config.hpp"

namespace mls {

// (mu/mu_w, lambda) CMA-ES with cumulative step-size adaptation, rank-one and
// rank-mu covariance updates, and a lazily refreshed eigendecomposition.
// Fitnesses are maximized. Sampling is deterministic in (seed, generation).
class CmaEs {
 public:
  CmaEs(int dim, int popsize, double elite_ratio, double sigma0,
        std::uint64_t seed, int eigen_interval = 0);

  int dim() const { return dim_; }
  int popsize() const { return popsize_; }
  int generation() const { return generation_; }
  double sigma() const { return sigma_; }
  const Eigen::VectorXd& mean() const { return mean_; }
  std::vector<double> mean_std() const;

  // Moves the search distribution's centre, e.g. to start away from zero.
  void set_mean(std::span<const double> mean);

  // Draws popsize candidates; refreshes the eigendecomposition when due.
  std::vector<std::vector<double>> ask();

  // Consumes the candidates from the matching ask(). Non-finite fitnesses
  // are ranked worst; the return value counts them.
  int tell(const std::vector<std::vector<double>>& candidates,
           std::span<const double> fitness);

  // Reconstruction of C from the cached factorization (for testing).
  Eigen::MatrixXd covariance() const { return C_; }
  Eigen::MatrixXd factor_reconstruction() const;

  nlohmann::json serialize() const;
  static CmaEs deserialize(const nlohmann::json& doc);

 private:
  void refresh_eigen();

  int dim_;
  int popsize_;
  int mu_;
  int eigen_interval_;
  int generation_ = 0;
  int last_eigen_gen_ = 0;
  std::uint64_t seed_;
  double sigma_;
  double mu_eff_;
  double c_sigma_, d_sigma_, c_c_, c_1_, c_mu_, chi_n_;
  Eigen::VectorXd weights_;
  Eigen::VectorXd mean_, p_sigma_, p_c_;
  Eigen::MatrixXd C_, B_;
  Eigen::VectorXd D_;  // sqrt of C's eigenvalues
  std::vector<Eigen::VectorXd> last_y_;  // sampled y_k = B D xi_k of last ask
};

// Scenario-averaged rollout outcome for one genome.
struct EvalResult {
  double f = 0.0;
  double f_e = 0.0;
  double f_a = 0.0;
  double pos_exchange = 0.0;  // mean per-scenario positive-exchange mass
};

// Runs S rollouts (one per scenario seed) and averages:
// f = mean(f_e) + mu * mean(f_a).
EvalResult evaluate_genome(const SimConfig& sim, const TrainConfig& train,
                           std::span<const double> genome,
                           std::span<const std::uint64_t> scenario_seeds);

using Evaluator = std::function<EvalResult(std::span<const double> genome,
                                           std::span<const std::uint64_t> scenario_seeds)>;

struct GenerationRecord {
  int generation = 0;
  std::vector<double> f, f_e, f_a;  // per candidate
  double best_f = 0.0;
  double mean_f = 0.0;
  int best_index = 0;
  double e_eplus_mean = 0.0;  // positive exchange per boid-step this generation
  int warnings = 0;           // candidates with non-finite fitness
};

struct TrainCallbacks {
  std::function<void(const GenerationRecord&)> on_generation;
  // Invoked at the configured checkpoint interval, after the final
  // generation, and once immediately when there are zero generations.
  std::function<void(const CmaEs& strategy, std::span<const double> best_genome,
                     double best_f, int generation)>
      on_checkpoint;
};

struct TrainResult {
  std::vector<GenerationRecord> records;
  std::vector<double> best_genome;
  double best_f = 0.0;
  bool has_best = false;
};

// Scenario seed for (generation, scenario) under a training seed; with
// fixed_scenarios the generation index is pinned to 0.
std::uint64_t scenario_seed(std::uint64_t train_seed, bool fixed, int generation,
                            int scenario);

// Group-level selection loop: ask, evaluate all candidates (concurrently when
// `parallel`), tell. The evaluator defaults to evaluate_genome over rollouts.
TrainResult train(const Config& cfg, std::uint64_t seed, const Evaluator& evaluator,
                  const TrainCallbacks& callbacks = {}, bool parallel = true);

Evaluator make_rollout_evaluator(const Config& cfg);

}  // namespace mls
