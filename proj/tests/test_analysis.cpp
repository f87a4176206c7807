#include <doctest.h>

#include <array>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "mls/analysis.hpp"
#include "mls/csv.hpp"
#include "mls/engine.hpp"
#include "mls/rng.hpp"

using namespace mls;

namespace {

struct TempFile {
  std::string path;
  explicit TempFile(std::string p) : path(std::move(p)) {}
  ~TempFile() { std::remove(path.c_str()); }
};

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  out << content;
}

SimConfig tiny_config() {
  SimConfig cfg;
  cfg.units = 4;
  cfg.rays = 3;
  cfg.mlp_layers = 1;
  cfg.mlp_hidden = 2;
  cfg.n_max = 8;
  cfg.n_min = 3;
  cfg.steps = 120;
  return cfg;
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

TEST_CASE("role classification favours the strictly dominant channel") {
  CHECK(classify_role(2.0, 1.0, 0.5) == Role::kExchange);
  CHECK(classify_role(1.0, 3.0, 0.5) == Role::kGrazing);
  CHECK(classify_role(0.5, 0.2, 0.9) == Role::kSuboptimal);  // costs dominate
  SUBCASE("ties are never a named role") {
    CHECK(classify_role(1.0, 1.0, 0.5) == Role::kSuboptimal);
    CHECK(classify_role(1.0, 0.5, 1.0) == Role::kSuboptimal);
    CHECK(classify_role(0.0, 0.0, 0.0) == Role::kSuboptimal);
  }
  SUBCASE("positive rescaling never changes the label") {
    const rng::Stream stream(2, rng::Tag::kInit, 0, 0);
    for (int k = 0; k < 50; ++k) {
      const double a = stream.uniform(4 * k);
      const double b = stream.uniform(4 * k + 1);
      const double c = stream.uniform(4 * k + 2);
      const double scale = stream.uniform(4 * k + 3, 0.1, 10.0);
      CHECK(classify_role(a, b, c) ==
            classify_role(scale * a, scale * b, scale * c));
    }
  }
  CHECK(role_char(Role::kExchange) == 'E');
  CHECK(role_char(Role::kGrazing) == 'G');
  CHECK(role_char(Role::kSuboptimal) == 'S');
}

TEST_CASE("role proportions count only active slots") {
  const std::array<char, 4> mixed{'E', 'G', 'S', '-'};
  const RoleProportions p = proportions_of(mixed);
  CHECK(p.exchange == doctest::Approx(1.0 / 3.0));
  CHECK(p.grazing == doctest::Approx(1.0 / 3.0));
  CHECK(p.suboptimal == doctest::Approx(1.0 / 3.0));
  CHECK(p.exchange + p.grazing + p.suboptimal == doctest::Approx(1.0).epsilon(1e-12));

  const std::array<char, 4> skew{'E', 'E', 'G', '-'};
  const RoleProportions q = proportions_of(skew);
  CHECK(q.exchange == doctest::Approx(2.0 / 3.0));
  CHECK(q.grazing == doctest::Approx(1.0 / 3.0));
  CHECK(q.suboptimal == 0.0);

  const std::array<char, 3> empty{'-', '-', '-'};
  const RoleProportions z = proportions_of(empty);
  CHECK(z.exchange == 0.0);
  CHECK(z.grazing == 0.0);
  CHECK(z.suboptimal == 0.0);
}

TEST_CASE("trailing smoother") {
  const std::vector<double> series{1, 2, 3, 4, 5};
  SUBCASE("hand-checked window of three") {
    const std::vector<double> s = smooth_trailing(series, 3);
    REQUIRE(s.size() == 5);
    CHECK(s[0] == doctest::Approx(1.0));
    CHECK(s[1] == doctest::Approx(1.5));
    CHECK(s[2] == doctest::Approx(2.0));
    CHECK(s[3] == doctest::Approx(3.0));
    CHECK(s[4] == doctest::Approx(4.0));
  }
  SUBCASE("window of one is the identity") {
    CHECK(smooth_trailing(series, 1) == series);
  }
  SUBCASE("window beyond the length is the running mean") {
    const std::vector<double> s = smooth_trailing(series, 100);
    CHECK(s[4] == doctest::Approx(3.0));
    CHECK(s[1] == doctest::Approx(1.5));
  }
  SUBCASE("matches a brute-force windowed mean on random data") {
    const rng::Stream stream(8, rng::Tag::kInit, 1, 0);
    std::vector<double> data(200);
    for (std::size_t i = 0; i < data.size(); ++i) data[i] = stream.gaussian(i);
    for (const int bins : {1, 7, 50}) {
      const std::vector<double> fast = smooth_trailing(data, bins);
      for (std::size_t t = 0; t < data.size(); ++t) {
        double acc = 0.0;
        int count = 0;
        for (std::size_t k = t + 1 > static_cast<std::size_t>(bins)
                                 ? t + 1 - static_cast<std::size_t>(bins)
                                 : 0;
             k <= t; ++k) {
          acc += data[k];
          ++count;
        }
        CHECK(fast[t] == doctest::Approx(acc / count).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("generation-level positive exchange normalizes per boid-step") {
  const std::vector<double> one{4.0};
  CHECK(generation_exchange_metric(one, 50, 4000) ==
        doctest::Approx(2e-5).epsilon(1e-12));
  const std::vector<double> two{2.0, 2.0};
  CHECK(generation_exchange_metric(two, 50, 4000) ==
        doctest::Approx(1e-5).epsilon(1e-12));
  CHECK(generation_exchange_metric({}, 50, 4000) == 0.0);
}

namespace {

const char* kTrajectoryHeader = "step,slot,active,x,y,theta,e,e_g,e_e,e_c,m,role";

std::string sample_log() {
  std::string s(kTrajectoryHeader);
  s += "\n";
  s += "0,0,1,1.5,-2,0.25,30,0.2,1.25,0.05,0.1,E\n";
  s += "0,1,1,0,0,0,10,0,-0.5,0.05,0,S\n";
  s += "0,2,0,0,0,0,0,0,0,0,0,-\n";
  s += "1,0,1,1.5,-2,0.25,31,0.2,-1,0.05,0.1,G\n";
  return s;
}

}  // namespace

TEST_CASE("trajectory logs parse back to their exact fields") {
  TempFile tmp("analysis_test_log.csv");
  write_file(tmp.path, sample_log());
  const std::vector<TrajectoryRow> rows = load_trajectory_csv(tmp.path);
  REQUIRE(rows.size() == 4);
  CHECK(rows[0].step == 0);
  CHECK(rows[0].slot == 0);
  CHECK(rows[0].active);
  CHECK(rows[0].x == 1.5);
  CHECK(rows[0].y == -2.0);
  CHECK(rows[0].theta == 0.25);
  CHECK(rows[0].e == 30.0);
  CHECK(rows[0].e_g == 0.2);
  CHECK(rows[0].e_e == 1.25);
  CHECK(rows[0].e_c == 0.05);
  CHECK(rows[0].m == 0.1);
  CHECK(rows[0].role == 'E');
  CHECK_FALSE(rows[2].active);
  CHECK(rows[2].role == '-');
  CHECK(rows[3].step == 1);

  SUBCASE("recomputed aggregates match hand arithmetic") {
    CHECK(recompute_pos_exchange(rows) == doctest::Approx(1.25).epsilon(1e-15));
    const std::vector<double> net = net_resource_series(rows, 10);
    REQUIRE(net.size() == 2);
    CHECK(net[0] == doctest::Approx(0.01).epsilon(1e-12));
    CHECK(net[1] == doctest::Approx(0.015).epsilon(1e-12));
    const std::vector<RoleProportions> props = role_proportions_series(rows);
    REQUIRE(props.size() == 2);
    CHECK(props[0].exchange == doctest::Approx(0.5));
    CHECK(props[0].suboptimal == doctest::Approx(0.5));
    CHECK(props[1].grazing == doctest::Approx(1.0));
  }
}

TEST_CASE("malformed trajectory logs are rejected") {
  TempFile tmp("analysis_test_bad.csv");
  SUBCASE("wrong header") {
    write_file(tmp.path, "step,slot\n0,0\n");
    CHECK_THROWS_AS((void)load_trajectory_csv(tmp.path), std::runtime_error);
  }
  SUBCASE("missing fields") {
    write_file(tmp.path, std::string(kTrajectoryHeader) + "\n0,0,1,0,0\n");
    CHECK_THROWS_AS((void)load_trajectory_csv(tmp.path), std::runtime_error);
  }
  SUBCASE("non-numeric value") {
    write_file(tmp.path,
               std::string(kTrajectoryHeader) + "\n0,0,1,oops,0,0,0,0,0,0,0,E\n");
    CHECK_THROWS_AS((void)load_trajectory_csv(tmp.path), std::runtime_error);
  }
  SUBCASE("missing file") {
    CHECK_THROWS_AS((void)load_trajectory_csv("does_not_exist.csv"), std::runtime_error);
  }
}

namespace {

class CsvSink : public StepSink {
 public:
  explicit CsvSink(const std::string& path)
      : writer_(path, kTrajectoryHeader) {}

  void on_step(const World& w, std::span<const char> roles) override {
    for (int i = 0; i < w.cfg.n_max; ++i) {
      const Boid& b = w.boids[i];
      std::string row;
      row += std::to_string(w.t);
      row += ',';
      row += std::to_string(i);
      row += b.active ? ",1," : ",0,";
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
      writer_.write_row(row);
    }
  }

  void finish() { writer_.flush(); }

 private:
  CsvWriter writer_;
};

}  // namespace

TEST_CASE("offline recomputation agrees exactly with the streaming metrics") {
  SimConfig cfg = tiny_config();
  cfg.steps = 60;
  const std::vector<double> genome = random_genome(cfg, 97);
  TempFile tmp("analysis_test_rollout.csv");
  RolloutMetrics metrics;
  {
    CsvSink sink(tmp.path);
    RolloutOptions opt;
    opt.parallel = false;
    opt.sink = &sink;
    opt.log_every = 1;
    opt.record_series = true;
    opt.track_roles = true;
    metrics = run_rollout(cfg, genome, 123, opt);
    sink.finish();
  }
  const std::vector<TrajectoryRow> rows = load_trajectory_csv(tmp.path);
  REQUIRE(rows.size() == static_cast<std::size_t>(cfg.steps) * cfg.n_max);

  // shortest-roundtrip formatting makes the offline recomputation exact
  CHECK(recompute_pos_exchange(rows) == metrics.pos_exchange);
  const std::vector<double> net = net_resource_series(rows, cfg.n_max);
  REQUIRE(net.size() == metrics.e_plus.size());
  for (std::size_t t = 0; t < net.size(); ++t) CHECK(net[t] == metrics.e_plus[t]);

  std::array<std::int64_t, 3> buckets{0, 0, 0};
  for (const TrajectoryRow& r : rows) {
    if (!r.active) continue;
    if (r.role == 'E') ++buckets[0];
    if (r.role == 'G') ++buckets[1];
    if (r.role == 'S') ++buckets[2];
  }
  CHECK(buckets == metrics.role_steps);
}

TEST_CASE("ablation sweep shapes, order, and determinism") {
  const SimConfig cfg = tiny_config();
  const std::vector<double> genome = random_genome(cfg, 41);
  const std::vector<std::uint64_t> seeds{5, 6};
  const auto series =
      run_ablation(cfg, genome, seeds, /*smooth_bins=*/10, /*uniform_bound=*/0.03,
                   /*random_sigma=*/0.1, /*parallel=*/false);
  REQUIRE(series.size() == 6);
  const AblationSetting expect_setting[6] = {
      AblationSetting::kFull,          AblationSetting::kFull,
      AblationSetting::kSubstrateOnly, AblationSetting::kSubstrateOnly,
      AblationSetting::kRandomAll,     AblationSetting::kRandomAll};
  for (int i = 0; i < 6; ++i) {
    CHECK(series[i].setting == expect_setting[i]);
    CHECK(series[i].seed == seeds[i % 2]);
    CHECK(series[i].e_plus.size() == static_cast<std::size_t>(cfg.steps));
    CHECK(series[i].e_eplus.size() == static_cast<std::size_t>(cfg.steps));
    // the running-sum smoother can leave ~1e-18 dust where the raw value is 0
    for (double v : series[i].e_eplus) CHECK(v >= -1e-12);
  }
  // same trained substrate, different mutation operator: identical until the
  // first birth, diverging after — never identical over a full rollout here
  CHECK(series[0].seed == series[2].seed);

  SUBCASE("repeat runs are bit-identical") {
    const auto again = run_ablation(cfg, genome, seeds, 10, 0.03, 0.1, false);
    for (int i = 0; i < 6; ++i) {
      CHECK(series[i].mean_e_plus == again[i].mean_e_plus);
      CHECK(series[i].mean_e_eplus == again[i].mean_e_eplus);
      CHECK(series[i].e_plus == again[i].e_plus);
    }
  }
  SUBCASE("parallel scheduling does not change the numbers") {
    const auto par = run_ablation(cfg, genome, seeds, 10, 0.03, 0.1, true);
    for (int i = 0; i < 6; ++i) {
      CHECK(series[i].mean_e_plus == par[i].mean_e_plus);
      CHECK(series[i].e_eplus == par[i].e_eplus);
    }
  }
  SUBCASE("random-substrate rollouts differ from the trained ones") {
    CHECK(series[0].e_plus != series[4].e_plus);
  }
  SUBCASE("wrong genome length is rejected") {
    std::vector<double> bad(genome.begin(), genome.end() - 1);
    CHECK_THROWS_AS(
        (void)run_ablation(cfg, bad, seeds, 10, 0.03, 0.1, false),
        std::invalid_argument);
  }
}

TEST_CASE("ablation settings expose stable names") {
  CHECK(std::string(ablation_name(AblationSetting::kFull)) == "full");
  CHECK(std::string(ablation_name(AblationSetting::kSubstrateOnly)) == "substrate_only");
  CHECK(std::string(ablation_name(AblationSetting::kRandomAll)) == "random_all");
}
