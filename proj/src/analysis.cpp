#include "mls/analysis.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <stdexcept>

#include "mls/engine.hpp"
#include "mls/rng.hpp"

namespace mls {

RoleProportions proportions_of(std::span<const char> roles) {
  int counts[3] = {0, 0, 0};
  int total = 0;
  for (char c : roles) {
    switch (c) {
      case 'E': ++counts[0]; ++total; break;
      case 'G': ++counts[1]; ++total; break;
      case 'S': ++counts[2]; ++total; break;
      default: break;
    }
  }
  if (total == 0) return {};
  return {static_cast<double>(counts[0]) / total, static_cast<double>(counts[1]) / total,
          static_cast<double>(counts[2]) / total};
}

std::vector<double> smooth_trailing(std::span<const double> series, int bins) {
  std::vector<double> out(series.size());
  double acc = 0.0;
  for (std::size_t t = 0; t < series.size(); ++t) {
    acc += series[t];
    if (t >= static_cast<std::size_t>(bins)) acc -= series[t - bins];
    const std::size_t window = std::min(t + 1, static_cast<std::size_t>(bins));
    out[t] = acc / static_cast<double>(window);
  }
  return out;
}

double generation_exchange_metric(std::span<const double> pos_exchange_sums,
                                  int n_max, int steps) {
  double total = 0.0;
  for (double v : pos_exchange_sums) total += v;
  const double z = static_cast<double>(pos_exchange_sums.size()) *
                   static_cast<double>(n_max) * static_cast<double>(steps);
  return z > 0.0 ? total / z : 0.0;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return fields;
}

double parse_double(const std::string& s, const std::string& context) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) {
    throw std::runtime_error("bad numeric field \"" + s + "\" in " + context);
  }
  return v;
}

int parse_int(const std::string& s, const std::string& context) {
  int v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) {
    throw std::runtime_error("bad integer field \"" + s + "\" in " + context);
  }
  return v;
}

}  // namespace

std::vector<TrajectoryRow> load_trajectory_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open trajectory log: " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty trajectory log: " + path);
  const std::string expected = "step,slot,active,x,y,theta,e,e_g,e_e,e_c,m,role";
  if (line != expected) {
    throw std::runtime_error("unexpected trajectory header in " + path + ": " + line);
  }
  std::vector<TrajectoryRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != 12) {
      throw std::runtime_error("expected 12 fields per row in " + path);
    }
    TrajectoryRow r;
    r.step = parse_int(fields[0], path);
    r.slot = parse_int(fields[1], path);
    r.active = parse_int(fields[2], path) != 0;
    r.x = parse_double(fields[3], path);
    r.y = parse_double(fields[4], path);
    r.theta = parse_double(fields[5], path);
    r.e = parse_double(fields[6], path);
    r.e_g = parse_double(fields[7], path);
    r.e_e = parse_double(fields[8], path);
    r.e_c = parse_double(fields[9], path);
    r.m = parse_double(fields[10], path);
    r.role = fields[11].empty() ? '-' : fields[11][0];
    rows.push_back(r);
  }
  return rows;
}

double recompute_pos_exchange(std::span<const TrajectoryRow> rows) {
  // Per-step subtotals first: the streaming accumulator adds one step at a
  // time, and matching its grouping keeps the recomputation bit-identical.
  double total = 0.0;
  std::size_t i = 0;
  while (i < rows.size()) {
    const int step = rows[i].step;
    double step_total = 0.0;
    for (; i < rows.size() && rows[i].step == step; ++i) {
      if (rows[i].active) step_total += std::max(0.0, rows[i].e_e);
    }
    total += step_total;
  }
  return total;
}

std::vector<double> net_resource_series(std::span<const TrajectoryRow> rows, int n_max) {
  std::vector<double> out;
  std::size_t i = 0;
  while (i < rows.size()) {
    const int step = rows[i].step;
    double acc = 0.0;
    for (; i < rows.size() && rows[i].step == step; ++i) {
      if (rows[i].active) acc += rows[i].e_g - rows[i].e_c;
    }
    out.push_back(acc / static_cast<double>(n_max));
  }
  return out;
}

std::vector<RoleProportions> role_proportions_series(std::span<const TrajectoryRow> rows) {
  std::vector<RoleProportions> out;
  std::vector<char> step_roles;
  std::size_t i = 0;
  while (i < rows.size()) {
    const int step = rows[i].step;
    step_roles.clear();
    for (; i < rows.size() && rows[i].step == step; ++i) {
      step_roles.push_back(rows[i].active ? rows[i].role : '-');
    }
    out.push_back(proportions_of(step_roles));
  }
  return out;
}

const char* ablation_name(AblationSetting s) {
  switch (s) {
    case AblationSetting::kFull: return "full";
    case AblationSetting::kSubstrateOnly: return "substrate_only";
    case AblationSetting::kRandomAll: return "random_all";
  }
  return "?";
}

namespace {

double series_mean(std::span<const double> v) {
  if (v.empty()) return 0.0;
  double acc = 0.0;
  for (double x : v) acc += x;
  return acc / static_cast<double>(v.size());
}

}  // namespace

std::vector<AblationSeries> run_ablation(const SimConfig& cfg,
                                         std::span<const double> genome,
                                         std::span<const std::uint64_t> seeds,
                                         int smooth_bins, double uniform_bound,
                                         double random_sigma, bool parallel) {
  const GenomeLayout layout =
      GenomeLayout::make(cfg.units, cfg.rays, cfg.mlp_layers, cfg.mlp_hidden);
  if (static_cast<int>(genome.size()) != layout.total_length()) {
    throw std::invalid_argument("ablation genome length mismatch");
  }
  constexpr AblationSetting kSettings[3] = {
      AblationSetting::kFull, AblationSetting::kSubstrateOnly,
      AblationSetting::kRandomAll};
  struct Task {
    AblationSetting setting;
    std::uint64_t seed;
  };
  std::vector<Task> tasks;
  for (const AblationSetting setting : kSettings) {
    for (const std::uint64_t seed : seeds) tasks.push_back({setting, seed});
  }
  std::vector<AblationSeries> out(tasks.size());
#pragma omp parallel for schedule(dynamic) if (parallel)
  for (int ti = 0; ti < static_cast<int>(tasks.size()); ++ti) {
    const Task& task = tasks[ti];
    RolloutOptions opt;
    opt.parallel = false;  // the tasks themselves run concurrently
    opt.record_series = true;
    std::vector<double> local_genome(genome.begin(), genome.end());
    if (task.setting != AblationSetting::kFull) {
      opt.mutation = MutationMode::kUniform;
      opt.uniform_bound = uniform_bound;
    }
    if (task.setting == AblationSetting::kRandomAll) {
      // Substrate drawn from the optimizer's initial search distribution;
      // the mutation-net part is irrelevant under the uniform operator.
      const rng::Stream prior(task.seed, rng::Tag::kSubstratePrior, 0, 0);
      for (int k = 0; k < layout.substrate_length(); ++k) {
        local_genome[k] = random_sigma * prior.gaussian(static_cast<std::uint64_t>(k));
      }
    }
    const RolloutMetrics metrics = run_rollout(cfg, local_genome, task.seed, opt);
    AblationSeries series;
    series.setting = task.setting;
    series.seed = task.seed;
    series.mean_e_plus = series_mean(metrics.e_plus);
    series.mean_e_eplus = series_mean(metrics.e_eplus);
    series.e_plus = smooth_trailing(metrics.e_plus, smooth_bins);
    series.e_eplus = smooth_trailing(metrics.e_eplus, smooth_bins);
    out[ti] = std::move(series);
  }
  return out;
}

}  // namespace mls
