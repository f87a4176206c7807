#include "mls/engine.hpp"

#include <algorithm>
#include <cmath>

#include "mls/ecology.hpp"
#include "mls/rng.hpp"

namespace mls {

int World::active_count() const {
  int c = 0;
  for (const Boid& b : boids) c += b.active ? 1 : 0;
  return c;
}

World init_rollout(const SimConfig& cfg, std::uint64_t seed) {
  World w;
  w.cfg = cfg;
  w.seed = seed;
  const int n = cfg.units;
  const int nmax = cfg.n_max;
  const std::size_t nm = static_cast<std::size_t>(nmax);
  w.boids.assign(nm, Boid{});
  w.z.assign(nm * n, 0.0);
  w.zbar.assign(nm * n, 0.0);
  w.J.assign(nm * n * n, 0.0);
  w.obs.assign(nm * cfg.obs_dim(), 0.0);
  w.sig.assign(nm * n, 0.0);
  w.rays_scratch.assign(nm * cfg.rays, RayReading{});
  w.snap_x.assign(nm, 0.0);
  w.snap_y.assign(nm, 0.0);
  w.snap_e.assign(nm, 0.0);
  w.snap_active.assign(nm, 0);
  w.flow_x.assign(nm, 0.0);
  w.flow_y.assign(nm, 0.0);
  w.flow_e.assign(nm, 0.0);
  w.role_row.assign(nm, '-');
  w.mutation_noise.assign(static_cast<std::size_t>(n) * n, 0.0);
  for (int i = 0; i < cfg.n_min; ++i) {
    rng::Stream init(seed, rng::Tag::kInit, static_cast<std::uint64_t>(i), 0);
    Boid& b = w.boids[i];
    b.kin.x = init.uniform(0, -50.0, 50.0);
    b.kin.y = init.uniform(1, -50.0, 50.0);
    b.kin.theta = init.angle(2);
    b.e = init.uniform(3, 20.0, 50.0);
    b.ebar = b.e;
    b.active = true;
    b.immortal = true;
    double* j_row = w.J_row(i);
    for (int k = 0; k < n * n; ++k) {
      j_row[k] = init.uniform(4 + static_cast<std::uint64_t>(k), -1.0, 1.0);
    }
  }
  return w;
}

void spawn_child(World& w, int parent, int slot, const Substrate& sub,
                 const MutationNet& net, const RolloutOptions& opt) {
  (void)sub;
  const SimConfig& cfg = w.cfg;
  const int n = cfg.units;
  Boid& p = w.boids[parent];
  rng::Stream spawn(w.seed, rng::Tag::kSpawn, static_cast<std::uint64_t>(w.t),
                    static_cast<std::uint64_t>(parent));
  Boid c{};
  // Uniform over the spawn disk: area-weighted radius, uniform direction.
  const double radius = cfg.d_spawn * std::sqrt(spawn.uniform(0));
  const double dir = spawn.angle(1);
  c.kin.x = p.kin.x + radius * std::cos(dir);
  c.kin.y = p.kin.y + radius * std::sin(dir);
  clamp_norm(c.kin.x, c.kin.y, cfg.q_max);
  c.kin.theta = spawn.angle(2);
  c.e = p.e / 2.0;
  c.ebar = c.e;  // moving averages start at their instantaneous values
  c.active = true;
  c.birth_step = w.t;

  double* j_child = w.J_row(slot);
  const double* j_parent = w.J_row(parent);
  if (opt.mutation == MutationMode::kLearned) {
    for (int k = 0; k < n * n; ++k) {
      w.mutation_noise[k] = spawn.gaussian(3 + static_cast<std::uint64_t>(k));
    }
    const MutationStats stats{p.ebar, p.ebar_g, p.ebar_e, p.ebar_c, p.m};
    mutate_recurrent(j_parent, w.zbar_row(parent), n, net, stats, cfg.eta,
                     w.mutation_noise.data(), j_child);
  } else {
    for (int k = 0; k < n * n; ++k) {
      j_child[k] = j_parent[k] + spawn.uniform(3 + static_cast<std::uint64_t>(k),
                                               -opt.uniform_bound, opt.uniform_bound);
    }
  }
  double* z = w.z_row(slot);
  double* zbar = w.zbar_row(slot);
  std::fill(z, z + n, 0.0);
  std::fill(zbar, zbar + n, 0.0);
  w.boids[slot] = c;

  p.e /= 2.0;
  p.birth_streak = 0;
}

void step(World& w, const Substrate& sub, const MutationNet& net,
          const RolloutOptions& opt, RolloutMetrics* metrics) {
  const SimConfig& cfg = w.cfg;
  const int nmax = cfg.n_max;
  const int obs_dim = cfg.obs_dim();
  const int t = w.t;

  // Phase 1: freeze the step's snapshot and the observation-time movement
  // mean. Serial so the reduction order is fixed.
  double m_sum = 0.0;
  int n_active = 0;
  for (int i = 0; i < nmax; ++i) {
    const Boid& b = w.boids[i];
    w.snap_x[i] = b.kin.x;
    w.snap_y[i] = b.kin.y;
    w.snap_e[i] = b.e;
    w.snap_active[i] = b.active ? 1 : 0;
    if (b.active) {
      m_sum += b.m;
      ++n_active;
    }
  }
  const double m_n_obs = n_active > 0 ? m_sum / n_active : 0.0;
  const Scene scene{std::span<const double>(w.snap_x), std::span<const double>(w.snap_y),
                    std::span<const double>(w.snap_e),
                    std::span<const std::uint8_t>(w.snap_active), 0.5 * cfg.d_b};

  if (!opt.reference_impl) w.grid.build(scene, cfg.d_b);

  // Phases 2-5a fused per boid: sense, control, move, movement filter. Each
  // iteration reads the shared snapshot and writes only its own slot, so the
  // schedule cannot change results.
#pragma omp parallel for schedule(static) if (opt.parallel)
  for (int i = 0; i < nmax; ++i) {
    if (!w.snap_active[i]) continue;
    Boid& b = w.boids[i];

    RayReading* readings = w.rays_scratch.data() + static_cast<std::size_t>(i) * cfg.rays;
    if (opt.reference_impl) {
      cast_rays_brute(scene, i, b.kin.theta, cfg.fov, cfg.rays, cfg.d_max, readings);
    } else {
      w.grid.cast_rays(scene, i, b.kin.theta, cfg.fov, cfg.rays, cfg.d_max, readings);
    }
    b.overlaps = count_overlaps(scene, i, cfg.d_b);
    const double body[10] = {b.kin.vx, b.kin.vy,  b.kin.omega, b.m,
                             m_n_obs,  b.e,       b.e_g,       b.e_e,
                             b.e_c,    static_cast<double>(b.overlaps)};
    double* obs = w.obs.data() + static_cast<std::size_t>(i) * obs_dim;
    assemble_observation(readings, cfg.rays, body, obs);

    ctrnn_step(w.z_row(i), w.zbar_row(i), w.J_row(i), sub, obs, cfg.dt, cfg.tau_zbar,
               w.sig.data() + static_cast<std::size_t>(i) * cfg.units);
    double a_s = 0.0, a_u = 0.0;
    readout(w.z_row(i), sub, a_s, a_u);
    const rng::Stream ctl(w.seed, rng::Tag::kControl, static_cast<std::uint64_t>(t),
                          static_cast<std::uint64_t>(i));
    const ControlSignal c =
        apply_control(a_s, a_u, ctl.gaussian(0), ctl.gaussian(1), cfg.epsilon, cfg.d_b);
    b.s_ctl = c.s;
    b.u_ctl = c.u;

    b.kin = integrate_step(b.kin, c, cfg.dt, cfg.damping, cfg.q_max, cfg.v_max,
                           cfg.omega_max);
    b.m = update_movement(b.m, b.kin.vx, b.kin.vy, b.kin.omega, cfg.tau_m, cfg.dt);
  }

  // Phase 5b: grazing baseline, serial fixed-order mean.
  double m_graze_sum = 0.0;
  for (int i = 0; i < nmax; ++i) {
    if (w.snap_active[i]) m_graze_sum += w.boids[i].m;
  }
  const double m_n_graze = n_active > 0 ? m_graze_sum / n_active : 0.0;

  // Phase 6a: exchange over the depot snapshot; overlap positions are
  // post-move by default, config-switchable to the snapshot.
  for (int i = 0; i < nmax; ++i) {
    if (cfg.exchange_post_move) {
      w.flow_x[i] = w.boids[i].kin.x;
      w.flow_y[i] = w.boids[i].kin.y;
    } else {
      w.flow_x[i] = w.snap_x[i];
      w.flow_y[i] = w.snap_y[i];
    }
  }
  exchange_flows(std::span<const double>(w.snap_e), std::span<const double>(w.flow_x),
                 std::span<const double>(w.flow_y),
                 std::span<const std::uint8_t>(w.snap_active), cfg.d_b, cfg.k_e,
                 cfg.e_e_max, cfg.exchange_clip_nonnegative, std::span<double>(w.flow_e));

  // Phases 6b-7: remaining channels, simultaneous depot update, moving
  // averages. All inputs are this step's values or the snapshot.
#pragma omp parallel for schedule(static) if (opt.parallel)
  for (int i = 0; i < nmax; ++i) {
    if (!w.snap_active[i]) continue;
    Boid& b = w.boids[i];
    const double e_g = grazing_gain(b.m, m_n_graze, cfg.k_g, cfg.e_g_max);
    const double e_e = w.flow_e[i];
    const double e_c =
        metabolic_cost(b.s_ctl, b.u_ctl, w.snap_e[i], cfg.k_cs, cfg.k_cu, cfg.gamma);
    b.e_g = e_g;
    b.e_e = e_e;
    b.e_c = e_c;
    b.e = apply_depot_update(w.snap_e[i], e_g, e_e, e_c, cfg.e_max);
    b.ebar = filter_step(b.ebar, w.snap_e[i], cfg.tau_ebar, cfg.dt);
    b.ebar_g = filter_step(b.ebar_g, e_g, cfg.tau_ebar, cfg.dt);
    b.ebar_e = filter_step(b.ebar_e, e_e, cfg.tau_ebar, cfg.dt);
    b.ebar_c = filter_step(b.ebar_c, e_c, cfg.tau_ebar, cfg.dt);
    b.ebar_e_plus = filter_step(b.ebar_e_plus, std::max(0.0, e_e), cfg.tau_ebar, cfg.dt);
  }

  // Phase 8: metrics and logging, serial fixed order. Boids dying later in
  // this step still contribute; this step's newborns do not exist yet.
  double step_fe = 0.0;
  double step_fa = 0.0;
  double step_pos = 0.0;
  for (int i = 0; i < nmax; ++i) {
    if (!w.snap_active[i]) continue;
    const Boid& b = w.boids[i];
    step_fe += b.e_g - b.e_c;
    step_fa += static_cast<double>(b.age);
    step_pos += std::max(0.0, b.e_e);
  }
  if (metrics) {
    metrics->f_e += step_fe;
    metrics->f_a += step_fa;
    metrics->pos_exchange += step_pos;
    metrics->steps += 1;
    if (opt.record_series) {
      metrics->e_plus.push_back(step_fe / nmax);
      metrics->e_eplus.push_back(step_pos / nmax);
      metrics->active_count.push_back(n_active);
    }
  }
  const bool want_roles =
      opt.track_roles || (opt.sink && opt.log_every > 0 && t % opt.log_every == 0);
  if (want_roles) {
    for (int i = 0; i < nmax; ++i) {
      const Boid& b = w.boids[i];
      if (!w.snap_active[i]) {
        w.role_row[i] = '-';
        continue;
      }
      const Role role = classify_role(b.ebar_e_plus, b.ebar_g, b.ebar_c);
      w.role_row[i] = role_char(role);
      if (metrics && opt.track_roles) {
        metrics->role_steps[static_cast<int>(role)] += 1;
      }
    }
  }
  if (opt.sink && opt.log_every > 0 && t % opt.log_every == 0) {
    opt.sink->on_step(w, std::span<const char>(w.role_row));
  }

  // Phase 9: streaks on the updated depots, then births in ascending slot
  // order. A full cap defers the birth: the streak simply keeps running.
  for (int i = 0; i < nmax; ++i) {
    if (!w.snap_active[i]) continue;
    Boid& b = w.boids[i];
    b.birth_streak = b.e >= cfg.e_birth ? b.birth_streak + 1 : 0;
    b.death_streak = b.e <= cfg.e_death ? b.death_streak + 1 : 0;
  }
  int free_slot = 0;
  for (int parent = 0; parent < nmax; ++parent) {
    if (!w.snap_active[parent]) continue;
    if (w.boids[parent].birth_streak < cfg.t_birth) continue;
    while (free_slot < nmax && w.boids[free_slot].active) ++free_slot;
    if (free_slot >= nmax) break;
    spawn_child(w, parent, free_slot, sub, net, opt);
  }

  // Phase 10: starvation deaths.
  for (int i = 0; i < nmax; ++i) {
    Boid& b = w.boids[i];
    if (!w.snap_active[i] || b.immortal) continue;
    if (b.death_streak >= cfg.t_death) b.active = false;
  }

  // Phase 11: old-age elimination, one Bernoulli trial per eligible boid.
  for (int i = 0; i < nmax; ++i) {
    Boid& b = w.boids[i];
    if (!w.snap_active[i] || !b.active || b.immortal) continue;
    const double p = old_age_probability(b.age, cfg.a_min_old, cfg.a_max_old);
    if (p <= 0.0) continue;
    const rng::Stream draw(w.seed, rng::Tag::kOldAge, static_cast<std::uint64_t>(t),
                           static_cast<std::uint64_t>(i));
    if (draw.uniform(0) < p) b.active = false;
  }

  // Phase 12: survivors age; this step's newborns start aging next step.
  for (int i = 0; i < nmax; ++i) {
    Boid& b = w.boids[i];
    if (b.active && b.birth_step < t) ++b.age;
  }
  ++w.t;
}

RolloutMetrics run_rollout(const SimConfig& cfg, const Substrate& sub,
                           const MutationNet& net, std::uint64_t seed,
                           const RolloutOptions& opt) {
  World w = init_rollout(cfg, seed);
  RolloutMetrics metrics;
  if (opt.record_series) {
    metrics.e_plus.reserve(cfg.steps);
    metrics.e_eplus.reserve(cfg.steps);
    metrics.active_count.reserve(cfg.steps);
  }
  for (int t = 0; t < cfg.steps; ++t) {
    step(w, sub, net, opt, &metrics);
  }
  return metrics;
}

RolloutMetrics run_rollout(const SimConfig& cfg, std::span<const double> genome,
                           std::uint64_t seed, const RolloutOptions& opt) {
  const GenomeLayout layout =
      GenomeLayout::make(cfg.units, cfg.rays, cfg.mlp_layers, cfg.mlp_hidden);
  auto [sub, net] = unflatten(genome, layout);
  return run_rollout(cfg, sub, net, seed, opt);
}

}  // namespace mls
