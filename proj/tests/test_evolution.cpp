#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "mls/engine.hpp"
#include "mls/evolution.hpp"
#include "mls/rng.hpp"

using namespace mls;

namespace {

double sphere(const std::vector<double>& x) {
  double acc = 0.0;
  for (double v : x) acc += v * v;
  return -acc;
}

SimConfig tiny_sim() {
  SimConfig sim;
  sim.units = 4;
  sim.rays = 3;
  sim.mlp_layers = 1;
  sim.mlp_hidden = 2;
  sim.n_max = 10;
  sim.n_min = 3;
  sim.steps = 100;
  return sim;
}

std::vector<double> random_genome(const SimConfig& cfg, std::uint64_t seed) {
  const GenomeLayout layout =
      GenomeLayout::make(cfg.units, cfg.rays, cfg.mlp_layers, cfg.mlp_hidden);
  std::vector<double> g(layout.total_length());
  const rng::Stream stream(seed, rng::Tag::kSubstratePrior, 0, 0);
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = 0.1 * stream.gaussian(i);
  return g;
}

}  // namespace

TEST_CASE("ask produces the population; zero step size collapses onto the mean") {
  CmaEs strategy(6, 10, 0.5, 0.0, 99);
  const auto candidates = strategy.ask();
  REQUIRE(candidates.size() == 10);
  for (const auto& c : candidates) {
    REQUIRE(c.size() == 6);
    for (double v : c) CHECK(v == 0.0);
  }
  SUBCASE("set_mean recentres the distribution") {
    std::vector<double> m{1, 2, 3, 4, 5, 6};
    strategy.set_mean(m);
    for (const auto& c : strategy.ask()) {
      for (int i = 0; i < 6; ++i) CHECK(c[i] == m[i]);
    }
    CHECK_THROWS(strategy.set_mean(std::vector<double>{1.0, 2.0}));
  }
}

TEST_CASE("initial samples are centred standard normals scaled by sigma") {
  const int dim = 4;
  const int pop = 2000;
  CmaEs strategy(dim, pop, 0.5, 1.0, 7);
  const auto candidates = strategy.ask();
  for (int i = 0; i < dim; ++i) {
    double mean = 0.0, var = 0.0;
    for (const auto& c : candidates) mean += c[i];
    mean /= pop;
    for (const auto& c : candidates) var += (c[i] - mean) * (c[i] - mean);
    var /= pop - 1;
    CHECK(std::abs(mean) < 0.1);      // ~4.5 sigma of the sample mean
    CHECK(var == doctest::Approx(1.0).epsilon(0.15));
  }
}

TEST_CASE("one update moves the mean to the weighted recombination point") {
  const int dim = 5;
  const int pop = 8;
  const double elite = 0.5;
  CmaEs strategy(dim, pop, elite, 0.4, 3);
  const auto candidates = strategy.ask();
  std::vector<double> fitness(pop);
  for (int k = 0; k < pop; ++k) fitness[k] = sphere(candidates[k]);
  CHECK(strategy.tell(candidates, fitness) == 0);
  CHECK(strategy.generation() == 1);
  CHECK(strategy.sigma() > 0.0);

  // independent recombination oracle: log-rank weights over the sorted elite
  const int mu = static_cast<int>(std::floor(elite * pop));
  std::vector<int> order(pop);
  for (int i = 0; i < pop; ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&fitness](int a, int b) { return fitness[a] > fitness[b]; });
  std::vector<double> w(mu);
  double wsum = 0.0;
  for (int i = 0; i < mu; ++i) {
    w[i] = std::log(mu + 0.5) - std::log(static_cast<double>(i + 1));
    wsum += w[i];
  }
  const std::vector<double> mean = strategy.mean_std();
  for (int i = 0; i < dim; ++i) {
    double expect = 0.0;
    for (int k = 0; k < mu; ++k) expect += (w[k] / wsum) * candidates[order[k]][i];
    CHECK(mean[i] == doctest::Approx(expect).epsilon(1e-12));
  }
}

TEST_CASE("ranking ignores constant fitness shifts") {
  CmaEs a(4, 8, 0.5, 0.3, 11);
  CmaEs b(4, 8, 0.5, 0.3, 11);
  for (int g = 0; g < 3; ++g) {
    const auto ca = a.ask();
    const auto cb = b.ask();
    REQUIRE(ca == cb);
    std::vector<double> fa(8), fb(8);
    for (int k = 0; k < 8; ++k) {
      fa[k] = sphere(ca[k]);
      fb[k] = fa[k] + 1e6;  // shifted, same ordering
    }
    a.tell(ca, fa);
    b.tell(cb, fb);
  }
  CHECK(a.serialize() == b.serialize());
}

TEST_CASE("non-finite fitness is counted and quarantined") {
  CmaEs strategy(3, 6, 0.5, 0.2, 5);
  const auto candidates = strategy.ask();
  std::vector<double> fitness(6, 1.0);
  fitness[1] = std::numeric_limits<double>::quiet_NaN();
  fitness[4] = std::numeric_limits<double>::infinity();  // +inf is finite? no
  fitness[5] = -std::numeric_limits<double>::infinity();
  CHECK(strategy.tell(candidates, fitness) == 3);
  for (double v : strategy.mean_std()) CHECK(std::isfinite(v));
  CHECK(std::isfinite(strategy.sigma()));
}

TEST_CASE("factorization tracks the covariance after a refresh") {
  CmaEs strategy(6, 12, 0.4, 0.5, 21, /*eigen_interval=*/1);
  for (int g = 0; g < 5; ++g) {
    const auto candidates = strategy.ask();
    std::vector<double> fitness(candidates.size());
    for (std::size_t k = 0; k < candidates.size(); ++k) {
      fitness[k] = sphere(candidates[k]);
    }
    strategy.tell(candidates, fitness);
  }
  (void)strategy.ask();  // triggers the due refresh
  const Eigen::MatrixXd recon = strategy.factor_reconstruction();
  const Eigen::MatrixXd c = strategy.covariance();
  CHECK((recon - c).lpNorm<Eigen::Infinity>() <
        1e-9 * std::max(1.0, c.lpNorm<Eigen::Infinity>()));
}

TEST_CASE("first-generation sampling is identical for any refresh cadence") {
  CmaEs eager(8, 6, 0.5, 0.3, 33, 1);
  CmaEs lazy(8, 6, 0.5, 0.3, 33, 7);
  CHECK(eager.ask() == lazy.ask());
}

TEST_CASE("state roundtrips through serialization") {
  CmaEs a(5, 8, 0.5, 0.3, 17);
  for (int g = 0; g < 4; ++g) {
    const auto c = a.ask();
    std::vector<double> f(8);
    for (int k = 0; k < 8; ++k) f[k] = sphere(c[k]);
    a.tell(c, f);
  }
  CmaEs b = CmaEs::deserialize(a.serialize());
  CHECK(b.generation() == a.generation());
  CHECK(b.sigma() == a.sigma());
  const auto ca = a.ask();
  const auto cb = b.ask();
  CHECK(ca == cb);
  std::vector<double> f(8);
  for (int k = 0; k < 8; ++k) f[k] = sphere(ca[k]);
  a.tell(ca, f);
  b.tell(cb, f);
  CHECK(a.ask() == b.ask());
}

TEST_CASE("the optimizer solves a small sphere problem") {
  CmaEs strategy(6, 12, 0.5, 0.3, 1);
  std::vector<double> start(6, 1.0);
  strategy.set_mean(start);
  double best = -std::numeric_limits<double>::infinity();
  for (int g = 0; g < 120 && best < -1e-8; ++g) {
    const auto candidates = strategy.ask();
    std::vector<double> fitness(candidates.size());
    for (std::size_t k = 0; k < candidates.size(); ++k) {
      fitness[k] = sphere(candidates[k]);
      best = std::max(best, fitness[k]);
    }
    strategy.tell(candidates, fitness);
  }
  CHECK(best > -1e-8);
}

TEST_CASE("scenario seeds pin to generation zero when frozen") {
  CHECK(scenario_seed(9, true, 0, 0) == scenario_seed(9, true, 57, 0));
  CHECK(scenario_seed(9, true, 0, 1) == scenario_seed(9, true, 57, 1));
  CHECK(scenario_seed(9, false, 0, 0) != scenario_seed(9, false, 57, 0));
  CHECK(scenario_seed(9, false, 3, 0) != scenario_seed(9, false, 3, 1));
  CHECK(scenario_seed(9, false, 3, 0) != scenario_seed(10, false, 3, 0));
}

TEST_CASE("genome evaluation averages rollouts and composes fitness") {
  const SimConfig sim = tiny_sim();
  TrainConfig train;
  train.scenarios = 2;
  train.age_fitness_scale = 5e-8;
  const std::vector<double> genome = random_genome(sim, 13);
  const std::vector<std::uint64_t> seeds{111, 222};

  RolloutOptions opt;
  opt.parallel = false;
  const RolloutMetrics m1 = run_rollout(sim, genome, seeds[0], opt);
  const RolloutMetrics m2 = run_rollout(sim, genome, seeds[1], opt);

  const EvalResult r = evaluate_genome(sim, train, genome, seeds);
  CHECK(r.f_e == (m1.f_e + m2.f_e) / 2.0);
  CHECK(r.f_a == (m1.f_a + m2.f_a) / 2.0);
  CHECK(r.pos_exchange == (m1.pos_exchange + m2.pos_exchange) / 2.0);
  CHECK(r.f == r.f_e + 5e-8 * r.f_a);

  SUBCASE("a single scenario is the plain rollout") {
    const std::vector<std::uint64_t> one{111};
    const EvalResult r1 = evaluate_genome(sim, train, genome, one);
    CHECK(r1.f_e == m1.f_e);
    CHECK(r1.f_a == m1.f_a);
    CHECK(r1.pos_exchange == m1.pos_exchange);
  }
}

TEST_CASE("training loop bookkeeping with a stub evaluator") {
  Config cfg;
  cfg.sim = tiny_sim();
  cfg.train.groups = 8;
  cfg.train.scenarios = 1;
  cfg.train.elite_ratio = 0.5;
  cfg.train.sigma_init = 0.1;
  cfg.train.generations = 5;
  cfg.train.checkpoint_interval = 2;

  const Evaluator stub = [](std::span<const double> genome,
                            std::span<const std::uint64_t>) {
    EvalResult r;
    double acc = 0.0;
    for (double v : genome) acc += v * v;
    r.f_e = -acc;
    r.f_a = 100.0;
    r.f = r.f_e + 5e-8 * r.f_a;
    r.pos_exchange = 42.0;
    return r;
  };

  int gen_calls = 0;
  std::vector<int> checkpoint_gens;
  TrainCallbacks cb;
  cb.on_generation = [&](const GenerationRecord& rec) {
    CHECK(rec.generation == gen_calls);
    ++gen_calls;
    REQUIRE(rec.f.size() == 8);
    double best = rec.f[0], sum = 0.0;
    for (double v : rec.f) {
      best = std::max(best, v);
      sum += v;
    }
    CHECK(rec.best_f == best);
    CHECK(rec.mean_f == doctest::Approx(sum / 8.0).epsilon(1e-12));
    CHECK(rec.f[rec.best_index] == rec.best_f);
    // every candidate reports pos_exchange 42 over N_max=10, T=100 boid-steps
    CHECK(rec.e_eplus_mean == doctest::Approx(42.0 / (10.0 * 100.0)).epsilon(1e-12));
    CHECK(rec.warnings == 0);
    // the composed fitness always decomposes into its parts
    for (std::size_t k = 0; k < rec.f.size(); ++k) {
      CHECK(rec.f[k] == doctest::Approx(rec.f_e[k] + 5e-8 * rec.f_a[k]).epsilon(1e-12));
    }
  };
  cb.on_checkpoint = [&](const CmaEs&, std::span<const double> genome, double,
                         int generation) {
    checkpoint_gens.push_back(generation);
    CHECK(genome.size() == 101);  // 4 units, 3 rays, 1x2 MLP
  };

  const TrainResult result = train(cfg, 77, stub, cb, /*parallel=*/false);
  CHECK(gen_calls == 5);
  CHECK(result.records.size() == 5);
  CHECK(checkpoint_gens == std::vector<int>{2, 4, 5});
  CHECK(result.has_best);
  CHECK(result.best_genome.size() == 101);
  double best_seen = -std::numeric_limits<double>::infinity();
  for (const auto& rec : result.records) best_seen = std::max(best_seen, rec.best_f);
  CHECK(result.best_f == best_seen);

  SUBCASE("zero generations still emits one checkpoint of the prior mean") {
    cfg.train.generations = 0;
    checkpoint_gens.clear();
    gen_calls = 0;
    const TrainResult r0 = train(cfg, 77, stub, cb, false);
    CHECK(r0.records.empty());
    CHECK_FALSE(r0.has_best);
    CHECK(checkpoint_gens == std::vector<int>{0});
    for (double v : r0.best_genome) CHECK(v == 0.0);
  }
}

TEST_CASE("training records count non-finite candidates") {
  Config cfg;
  cfg.sim = tiny_sim();
  cfg.train.groups = 6;
  cfg.train.scenarios = 1;
  cfg.train.elite_ratio = 0.5;
  cfg.train.generations = 1;
  cfg.train.checkpoint_interval = 0;

  int calls = 0;
  const Evaluator stub = [&calls](std::span<const double>,
                                  std::span<const std::uint64_t>) {
    EvalResult r;
    r.f = (calls++ % 2 == 1) ? std::numeric_limits<double>::quiet_NaN() : 1.0;
    r.f_e = r.f;
    return r;
  };
  const TrainResult result = train(cfg, 5, stub, {}, false);
  REQUIRE(result.records.size() == 1);
  CHECK(result.records[0].warnings == 3);
  CHECK(result.has_best);
  CHECK(result.best_f == 1.0);
}
