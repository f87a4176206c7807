#include "mls/evolution.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "mls/engine.hpp"
#include "mls/rng.hpp"

namespace mls {

CmaEs::CmaEs(int dim, int popsize, double elite_ratio, double sigma0,
             std::uint64_t seed, int eigen_interval)
    : dim_(dim), popsize_(popsize), seed_(seed), sigma_(sigma0) {
  if (dim < 1) throw std::invalid_argument("CmaEs: dim must be positive");
  if (popsize < 2) throw std::invalid_argument("CmaEs: popsize must be at least 2");
  mu_ = static_cast<int>(std::floor(elite_ratio * popsize));
  if (mu_ < 1) throw std::invalid_argument("CmaEs: floor(elite_ratio * popsize) < 1");
  eigen_interval_ = eigen_interval > 0 ? eigen_interval : (dim + 9) / 10;

  weights_.resize(mu_);
  for (int i = 0; i < mu_; ++i) {
    weights_[i] = std::log(mu_ + 0.5) - std::log(static_cast<double>(i + 1));
  }
  weights_ /= weights_.sum();
  mu_eff_ = 1.0 / weights_.squaredNorm();

  const double n = static_cast<double>(dim);
  c_sigma_ = (mu_eff_ + 2.0) / (n + mu_eff_ + 5.0);
  d_sigma_ = 1.0 + 2.0 * std::max(0.0, std::sqrt((mu_eff_ - 1.0) / (n + 1.0)) - 1.0) +
             c_sigma_;
  c_c_ = (4.0 + mu_eff_ / n) / (n + 4.0 + 2.0 * mu_eff_ / n);
  c_1_ = 2.0 / ((n + 1.3) * (n + 1.3) + mu_eff_);
  c_mu_ = std::min(1.0 - c_1_, 2.0 * (mu_eff_ - 2.0 + 1.0 / mu_eff_) /
                                   ((n + 2.0) * (n + 2.0) + mu_eff_));
  chi_n_ = std::sqrt(n) * (1.0 - 1.0 / (4.0 * n) + 1.0 / (21.0 * n * n));

  mean_ = Eigen::VectorXd::Zero(dim);
  p_sigma_ = Eigen::VectorXd::Zero(dim);
  p_c_ = Eigen::VectorXd::Zero(dim);
  C_ = Eigen::MatrixXd::Identity(dim, dim);
  B_ = Eigen::MatrixXd::Identity(dim, dim);
  D_ = Eigen::VectorXd::Ones(dim);
}

std::vector<double> CmaEs::mean_std() const {
  return std::vector<double>(mean_.data(), mean_.data() + dim_);
}

void CmaEs::set_mean(std::span<const double> mean) {
  if (static_cast<int>(mean.size()) != dim_) {
    throw std::invalid_argument("CmaEs::set_mean: wrong dimension");
  }
  mean_ = Eigen::Map<const Eigen::VectorXd>(mean.data(), dim_);
}

Eigen::MatrixXd CmaEs::factor_reconstruction() const {
  return B_ * D_.array().square().matrix().asDiagonal() * B_.transpose();
}

void CmaEs::refresh_eigen() {
  C_ = 0.5 * (C_ + C_.transpose().eval());  // keep symmetric against drift
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(C_);
  if (solver.info() != Eigen::Success) {
    throw std::runtime_error("CmaEs: eigendecomposition failed");
  }
  B_ = solver.eigenvectors();
  // Floor tiny/negative eigenvalues so C stays usable as a covariance.
  const double floor_ev = 1e-20;
  D_ = solver.eigenvalues().cwiseMax(floor_ev).cwiseSqrt();
  last_eigen_gen_ = generation_;
}

std::vector<std::vector<double>> CmaEs::ask() {
  if (generation_ - last_eigen_gen_ >= eigen_interval_) refresh_eigen();
  std::vector<std::vector<double>> out(popsize_);
  last_y_.assign(popsize_, Eigen::VectorXd());
  const rng::Stream stream(seed_, rng::Tag::kCmaSample,
                           static_cast<std::uint64_t>(generation_), 0);
  Eigen::VectorXd xi(dim_);
  for (int k = 0; k < popsize_; ++k) {
    const std::uint64_t base = static_cast<std::uint64_t>(k) * dim_;
    for (int i = 0; i < dim_; ++i) {
      xi[i] = stream.gaussian(base + i);
    }
    Eigen::VectorXd y = B_ * (D_.asDiagonal() * xi);
    last_y_[k] = y;
    Eigen::VectorXd x = mean_ + sigma_ * y;
    out[k].assign(x.data(), x.data() + dim_);
  }
  return out;
}

int CmaEs::tell(const std::vector<std::vector<double>>& candidates,
                std::span<const double> fitness) {
  if (static_cast<int>(candidates.size()) != popsize_ ||
      static_cast<int>(fitness.size()) != popsize_) {
    throw std::invalid_argument("CmaEs::tell: candidate/fitness count mismatch");
  }
  // Descending fitness; non-finite entries sink to the end. Stable order
  // keeps ties deterministic.
  int bad = 0;
  std::vector<int> order(popsize_);
  std::iota(order.begin(), order.end(), 0);
  const auto key = [&fitness](int i) {
    const double f = fitness[i];
    return std::isfinite(f) ? f : -std::numeric_limits<double>::infinity();
  };
  std::stable_sort(order.begin(), order.end(),
                   [&key](int a, int b) { return key(a) > key(b); });
  for (int i = 0; i < popsize_; ++i) {
    if (!std::isfinite(fitness[i])) ++bad;
  }

  // Recover y_k for the selected candidates. When candidates come from the
  // matching ask() the cached y is exact; otherwise fall back to the
  // definition (x - mean) / sigma.
  const auto y_of = [this, &candidates](int k) -> Eigen::VectorXd {
    if (k < static_cast<int>(last_y_.size()) && last_y_[k].size() == dim_) {
      const Eigen::Map<const Eigen::VectorXd> x(candidates[k].data(), dim_);
      const Eigen::VectorXd expect = mean_ + sigma_ * last_y_[k];
      if ((expect - x).lpNorm<Eigen::Infinity>() == 0.0) return last_y_[k];
    }
    const Eigen::Map<const Eigen::VectorXd> x(candidates[k].data(), dim_);
    return (x - mean_) / sigma_;
  };

  Eigen::VectorXd y_w = Eigen::VectorXd::Zero(dim_);
  std::vector<Eigen::VectorXd> y_sel(mu_);
  for (int i = 0; i < mu_; ++i) {
    y_sel[i] = y_of(order[i]);
    y_w += weights_[i] * y_sel[i];
  }

  mean_ += sigma_ * y_w;

  // C^(-1/2) y_w through the cached factorization.
  const Eigen::VectorXd c_inv_sqrt_yw =
      B_ * (D_.cwiseInverse().asDiagonal() * (B_.transpose() * y_w));
  p_sigma_ = (1.0 - c_sigma_) * p_sigma_ +
             std::sqrt(c_sigma_ * (2.0 - c_sigma_) * mu_eff_) * c_inv_sqrt_yw;

  const double ps_norm = p_sigma_.norm();
  const double expected_decay =
      std::sqrt(1.0 - std::pow(1.0 - c_sigma_, 2.0 * (generation_ + 1)));
  const bool h_sigma =
      ps_norm / expected_decay < (1.4 + 2.0 / (dim_ + 1.0)) * chi_n_;

  p_c_ = (1.0 - c_c_) * p_c_;
  if (h_sigma) {
    p_c_ += std::sqrt(c_c_ * (2.0 - c_c_) * mu_eff_) * y_w;
  }

  const double delta_h = h_sigma ? 0.0 : c_c_ * (2.0 - c_c_);
  Eigen::MatrixXd c_next = (1.0 - c_1_ - c_mu_ + c_1_ * delta_h) * C_;
  c_next.noalias() += c_1_ * (p_c_ * p_c_.transpose());
  for (int i = 0; i < mu_; ++i) {
    c_next.noalias() += (c_mu_ * weights_[i]) * (y_sel[i] * y_sel[i].transpose());
  }
  C_ = std::move(c_next);

  sigma_ *= std::exp((c_sigma_ / d_sigma_) * (ps_norm / chi_n_ - 1.0));
  if (!std::isfinite(sigma_)) sigma_ = 0.0;

  ++generation_;
  last_y_.clear();
  return bad;
}

nlohmann::json CmaEs::serialize() const {
  nlohmann::json doc;
  doc["dim"] = dim_;
  doc["popsize"] = popsize_;
  doc["mu"] = mu_;
  doc["eigen_interval"] = eigen_interval_;
  doc["generation"] = generation_;
  doc["last_eigen_gen"] = last_eigen_gen_;
  doc["seed"] = seed_;
  doc["sigma"] = sigma_;
  const auto vec = [](const Eigen::VectorXd& v) {
    return std::vector<double>(v.data(), v.data() + v.size());
  };
  doc["weights"] = vec(weights_);
  doc["mean"] = vec(mean_);
  doc["p_sigma"] = vec(p_sigma_);
  doc["p_c"] = vec(p_c_);
  std::vector<double> c_lower;
  c_lower.reserve(static_cast<std::size_t>(dim_) * (dim_ + 1) / 2);
  for (int i = 0; i < dim_; ++i) {
    for (int j = 0; j <= i; ++j) c_lower.push_back(C_(i, j));
  }
  doc["C_lower"] = std::move(c_lower);
  std::vector<double> b_flat;
  b_flat.reserve(static_cast<std::size_t>(dim_) * dim_);
  for (int i = 0; i < dim_; ++i) {
    for (int j = 0; j < dim_; ++j) b_flat.push_back(B_(i, j));
  }
  doc["B"] = std::move(b_flat);
  doc["D"] = vec(D_);
  return doc;
}

CmaEs CmaEs::deserialize(const nlohmann::json& doc) {
  const int dim = doc.at("dim").get<int>();
  CmaEs s(dim, doc.at("popsize").get<int>(), 0.5, doc.at("sigma").get<double>(),
          doc.at("seed").get<std::uint64_t>(), doc.at("eigen_interval").get<int>());
  s.mu_ = doc.at("mu").get<int>();
  s.generation_ = doc.at("generation").get<int>();
  s.last_eigen_gen_ = doc.at("last_eigen_gen").get<int>();
  const auto load_vec = [&doc](const char* key, Eigen::VectorXd& v, int expect) {
    const auto data = doc.at(key).get<std::vector<double>>();
    if (static_cast<int>(data.size()) != expect) {
      throw std::runtime_error(std::string("CmaEs state field ") + key +
                               " has the wrong length");
    }
    v = Eigen::Map<const Eigen::VectorXd>(data.data(), expect);
  };
  load_vec("weights", s.weights_, s.mu_);
  s.mu_eff_ = 1.0 / s.weights_.squaredNorm();
  // Derived constants depend on mu_eff; recompute them for the stored mu.
  const double n = static_cast<double>(dim);
  s.c_sigma_ = (s.mu_eff_ + 2.0) / (n + s.mu_eff_ + 5.0);
  s.d_sigma_ = 1.0 +
               2.0 * std::max(0.0, std::sqrt((s.mu_eff_ - 1.0) / (n + 1.0)) - 1.0) +
               s.c_sigma_;
  s.c_c_ = (4.0 + s.mu_eff_ / n) / (n + 4.0 + 2.0 * s.mu_eff_ / n);
  s.c_1_ = 2.0 / ((n + 1.3) * (n + 1.3) + s.mu_eff_);
  s.c_mu_ = std::min(1.0 - s.c_1_, 2.0 * (s.mu_eff_ - 2.0 + 1.0 / s.mu_eff_) /
                                       ((n + 2.0) * (n + 2.0) + s.mu_eff_));
  load_vec("mean", s.mean_, dim);
  load_vec("p_sigma", s.p_sigma_, dim);
  load_vec("p_c", s.p_c_, dim);
  load_vec("D", s.D_, dim);
  const auto c_lower = doc.at("C_lower").get<std::vector<double>>();
  if (static_cast<int>(c_lower.size()) != dim * (dim + 1) / 2) {
    throw std::runtime_error("CmaEs state field C_lower has the wrong length");
  }
  std::size_t pos = 0;
  for (int i = 0; i < dim; ++i) {
    for (int j = 0; j <= i; ++j) {
      s.C_(i, j) = c_lower[pos];
      s.C_(j, i) = c_lower[pos];
      ++pos;
    }
  }
  const auto b_flat = doc.at("B").get<std::vector<double>>();
  if (static_cast<int>(b_flat.size()) != dim * dim) {
    throw std::runtime_error("CmaEs state field B has the wrong length");
  }
  pos = 0;
  for (int i = 0; i < dim; ++i) {
    for (int j = 0; j < dim; ++j) s.B_(i, j) = b_flat[pos++];
  }
  return s;
}

EvalResult evaluate_genome(const SimConfig& sim, const TrainConfig& train,
                           std::span<const double> genome,
                           std::span<const std::uint64_t> scenario_seeds) {
  EvalResult out;
  RolloutOptions opt;
  opt.parallel = false;  // evaluations already run concurrently
  for (const std::uint64_t seed : scenario_seeds) {
    const RolloutMetrics m = run_rollout(sim, genome, seed, opt);
    out.f_e += m.f_e;
    out.f_a += m.f_a;
    out.pos_exchange += m.pos_exchange;
  }
  const double s = static_cast<double>(scenario_seeds.size());
  if (s > 0) {
    out.f_e /= s;
    out.f_a /= s;
    out.pos_exchange /= s;
  }
  out.f = out.f_e + train.age_fitness_scale * out.f_a;
  return out;
}

std::uint64_t scenario_seed(std::uint64_t train_seed, bool fixed, int generation,
                            int scenario) {
  return rng::derive_seed(train_seed, rng::Tag::kScenario,
                          fixed ? 0 : static_cast<std::uint64_t>(generation),
                          static_cast<std::uint64_t>(scenario));
}

Evaluator make_rollout_evaluator(const Config& cfg) {
  return [cfg](std::span<const double> genome,
               std::span<const std::uint64_t> seeds) {
    return evaluate_genome(cfg.sim, cfg.train, genome, seeds);
  };
}

TrainResult train(const Config& cfg, std::uint64_t seed, const Evaluator& evaluator,
                  const TrainCallbacks& callbacks, bool parallel) {
  const GenomeLayout layout = GenomeLayout::make(cfg.sim.units, cfg.sim.rays,
                                                 cfg.sim.mlp_layers, cfg.sim.mlp_hidden);
  CmaEs strategy(layout.total_length(), cfg.train.groups, cfg.train.elite_ratio,
                 cfg.train.sigma_init, seed, cfg.train.eigen_interval);
  TrainResult result;
  result.best_genome = strategy.mean_std();

  if (cfg.train.generations == 0) {
    if (callbacks.on_checkpoint) {
      callbacks.on_checkpoint(strategy, result.best_genome, 0.0, 0);
    }
    return result;
  }

  const int generations = cfg.train.generations;
  const int popsize = cfg.train.groups;
  std::vector<std::uint64_t> seeds(cfg.train.scenarios);
  for (int g = 0; g < generations; ++g) {
    for (int s = 0; s < cfg.train.scenarios; ++s) {
      seeds[s] = scenario_seed(seed, cfg.train.fixed_scenarios, g, s);
    }
    const std::vector<std::vector<double>> candidates = strategy.ask();
    std::vector<EvalResult> evals(popsize);
#pragma omp parallel for schedule(dynamic) if (parallel)
    for (int k = 0; k < popsize; ++k) {
      evals[k] = evaluator(candidates[k], seeds);
    }

    GenerationRecord rec;
    rec.generation = g;
    rec.f.resize(popsize);
    rec.f_e.resize(popsize);
    rec.f_a.resize(popsize);
    double pos_total = 0.0;
    double f_sum = 0.0;
    int best_k = 0;
    for (int k = 0; k < popsize; ++k) {
      rec.f[k] = evals[k].f;
      rec.f_e[k] = evals[k].f_e;
      rec.f_a[k] = evals[k].f_a;
      pos_total += evals[k].pos_exchange;
      f_sum += evals[k].f;
      if (evals[k].f > evals[best_k].f) best_k = k;
    }
    rec.best_index = best_k;
    rec.best_f = rec.f[best_k];
    rec.mean_f = f_sum / popsize;
    rec.e_eplus_mean = pos_total / (static_cast<double>(popsize) *
                                    static_cast<double>(cfg.sim.n_max) *
                                    static_cast<double>(cfg.sim.steps));
    rec.warnings = strategy.tell(candidates, rec.f);

    if (std::isfinite(rec.best_f) && (!result.has_best || rec.best_f > result.best_f)) {
      result.best_f = rec.best_f;
      result.best_genome = candidates[best_k];
      result.has_best = true;
    }
    if (callbacks.on_generation) callbacks.on_generation(rec);
    const bool at_interval = cfg.train.checkpoint_interval > 0 &&
                             (g + 1) % cfg.train.checkpoint_interval == 0;
    if (callbacks.on_checkpoint && (at_interval || g + 1 == generations)) {
      callbacks.on_checkpoint(strategy, result.best_genome, result.best_f, g + 1);
    }
    result.records.push_back(std::move(rec));
  }
  return result;
}

}  // namespace mls
