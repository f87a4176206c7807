#include "mls/sensing.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace mls {

namespace {

// Candidate comparison shared by both paths: nearer hit wins, equal
// distances fall to the lower slot.
inline bool better_hit(double t, int slot, double best_t, int best_slot) {
  return t < best_t || (t == best_t && slot < best_slot);
}

}  // namespace

double ray_circle(double ox, double oy, double dx, double dy, double cx, double cy,
                  double radius) {
  const double mx = ox - cx;
  const double my = oy - cy;
  const double c = mx * mx + my * my - radius * radius;
  if (c < 0.0) return 0.0;  // origin inside the body
  const double b = mx * dx + my * dy;  // half of the quadratic's linear term
  const double disc = b * b - c;
  if (disc < 0.0) return -1.0;
  const double t = -b - std::sqrt(disc);
  return t >= 0.0 ? t : -1.0;
}

void cast_rays_brute(const Scene& scene, int self, double heading, double fov,
                     int rays, double d_max, RayReading* out) {
  const int n = scene.count();
  for (int k = 0; k < rays; ++k) {
    const double a = ray_angle(heading, fov, rays, k);
    const double dx = std::cos(a);
    const double dy = std::sin(a);
    double best_t = std::numeric_limits<double>::infinity();
    int best_slot = -1;
    for (int j = 0; j < n; ++j) {
      if (j == self || !scene.active[j]) continue;
      const double t = ray_circle(scene.x[self], scene.y[self], dx, dy, scene.x[j],
                                  scene.y[j], scene.radius);
      if (t >= 0.0 && t <= d_max && better_hit(t, j, best_t, best_slot)) {
        best_t = t;
        best_slot = j;
      }
    }
    out[k] = best_slot >= 0 ? RayReading{best_t, scene.depot[best_slot]}
                            : RayReading{d_max, 0.0};
  }
}

int count_overlaps(const Scene& scene, int self, double d_b) {
  const int n = scene.count();
  const double limit = d_b * d_b;
  int w = 0;
  for (int j = 0; j < n; ++j) {
    if (j == self || !scene.active[j]) continue;
    const double dx = scene.x[j] - scene.x[self];
    const double dy = scene.y[j] - scene.y[self];
    if (dx * dx + dy * dy < limit) ++w;
  }
  return w;
}

void SpatialGrid::build(const Scene& scene, double cell_hint) {
  const int n = scene.count();
  double lo_x = 0.0, lo_y = 0.0, hi_x = 0.0, hi_y = 0.0;
  bool any = false;
  for (int i = 0; i < n; ++i) {
    if (!scene.active[i]) continue;
    if (!any) {
      lo_x = hi_x = scene.x[i];
      lo_y = hi_y = scene.y[i];
      any = true;
    } else {
      lo_x = std::min(lo_x, scene.x[i]);
      hi_x = std::max(hi_x, scene.x[i]);
      lo_y = std::min(lo_y, scene.y[i]);
      hi_y = std::max(hi_y, scene.y[i]);
    }
  }
  if (!any) {
    nx_ = ny_ = 0;
    cell_start_.assign(1, 0);
    entries_.clear();
    return;
  }
  lo_x -= scene.radius;
  lo_y -= scene.radius;
  hi_x += scene.radius;
  hi_y += scene.radius;
  // Cap the cell count so a scattered population cannot blow up the build.
  const double extent = std::max(hi_x - lo_x, hi_y - lo_y);
  cell_ = std::max(cell_hint, extent / 192.0);
  origin_x_ = lo_x;
  origin_y_ = lo_y;
  nx_ = static_cast<int>((hi_x - lo_x) / cell_) + 1;
  ny_ = static_cast<int>((hi_y - lo_y) / cell_) + 1;

  const auto cell_x = [this](double v) {
    return static_cast<int>(std::floor((v - origin_x_) / cell_));
  };
  const auto cell_y = [this](double v) {
    return static_cast<int>(std::floor((v - origin_y_) / cell_));
  };

  cell_start_.assign(static_cast<std::size_t>(nx_) * ny_ + 1, 0);
  // Two passes over the disks' bounding boxes: count, then fill. Slot order
  // stays ascending within each cell.
  for (int pass = 0; pass < 2; ++pass) {
    if (pass == 1) {
      int total = 0;
      for (std::size_t c = 0; c + 1 < cell_start_.size(); ++c) {
        const int count = cell_start_[c];
        cell_start_[c] = total;
        total += count;
      }
      cell_start_.back() = total;
      entries_.assign(total, -1);
    }
    std::vector<int> fill;
    if (pass == 1) fill.assign(cell_start_.begin(), cell_start_.end() - 1);
    for (int i = 0; i < n; ++i) {
      if (!scene.active[i]) continue;
      const int x0 = std::clamp(cell_x(scene.x[i] - scene.radius), 0, nx_ - 1);
      const int x1 = std::clamp(cell_x(scene.x[i] + scene.radius), 0, nx_ - 1);
      const int y0 = std::clamp(cell_y(scene.y[i] - scene.radius), 0, ny_ - 1);
      const int y1 = std::clamp(cell_y(scene.y[i] + scene.radius), 0, ny_ - 1);
      for (int cy = y0; cy <= y1; ++cy) {
        for (int cx = x0; cx <= x1; ++cx) {
          const std::size_t c = static_cast<std::size_t>(cy) * nx_ + cx;
          if (pass == 0) {
            ++cell_start_[c];
          } else {
            entries_[fill[c]++] = i;
          }
        }
      }
    }
  }
}

void SpatialGrid::cast_one(const Scene& scene, int self, double dirx, double diry,
                           double d_max, RayReading* out) const {
  const double ox = scene.x[self];
  const double oy = scene.y[self];
  double best_t = std::numeric_limits<double>::infinity();
  int best_slot = -1;

  // Clip the ray segment [0, d_max] against the grid box; everything
  // hittable lives inside it.
  double t_enter = 0.0;
  double t_exit = d_max;
  bool miss = nx_ == 0 || ny_ == 0;
  const double bounds[2][2] = {{origin_x_, origin_x_ + nx_ * cell_},
                               {origin_y_, origin_y_ + ny_ * cell_}};
  const double o[2] = {ox, oy};
  const double d[2] = {dirx, diry};
  for (int axis = 0; axis < 2 && !miss; ++axis) {
    if (d[axis] == 0.0) {
      if (o[axis] < bounds[axis][0] || o[axis] > bounds[axis][1]) miss = true;
    } else {
      double t0 = (bounds[axis][0] - o[axis]) / d[axis];
      double t1 = (bounds[axis][1] - o[axis]) / d[axis];
      if (t0 > t1) std::swap(t0, t1);
      t_enter = std::max(t_enter, t0);
      t_exit = std::min(t_exit, t1);
      if (t_enter > t_exit) miss = true;
    }
  }

  if (!miss) {
    const double inf = std::numeric_limits<double>::infinity();
    const double px = ox + t_enter * dirx;
    const double py = oy + t_enter * diry;
    int cx = std::clamp(static_cast<int>(std::floor((px - origin_x_) / cell_)), 0, nx_ - 1);
    int cy = std::clamp(static_cast<int>(std::floor((py - origin_y_) / cell_)), 0, ny_ - 1);
    const int step_x = dirx > 0.0 ? 1 : (dirx < 0.0 ? -1 : 0);
    const int step_y = diry > 0.0 ? 1 : (diry < 0.0 ? -1 : 0);
    // Ray parameter at the next vertical / horizontal cell boundary.
    double t_max_x = inf;
    double t_max_y = inf;
    double t_delta_x = inf;
    double t_delta_y = inf;
    if (step_x != 0) {
      const double edge = origin_x_ + (cx + (step_x > 0 ? 1 : 0)) * cell_;
      t_max_x = (edge - ox) / dirx;
      t_delta_x = cell_ / std::abs(dirx);
    }
    if (step_y != 0) {
      const double edge = origin_y_ + (cy + (step_y > 0 ? 1 : 0)) * cell_;
      t_max_y = (edge - oy) / diry;
      t_delta_y = cell_ / std::abs(diry);
    }
    while (true) {
      const int* begin = entries_.data() + cell_start_[static_cast<std::size_t>(cy) * nx_ + cx];
      const int* end = entries_.data() + cell_start_[static_cast<std::size_t>(cy) * nx_ + cx + 1];
      for (const int* it = begin; it != end; ++it) {
        const int j = *it;
        if (j == self) continue;
        const double t = ray_circle(ox, oy, dirx, diry, scene.x[j], scene.y[j],
                                    scene.radius);
        if (t >= 0.0 && t <= d_max && better_hit(t, j, best_t, best_slot)) {
          best_t = t;
          best_slot = j;
        }
      }
      const double t_next = std::min(t_max_x, t_max_y);
      // Remaining cells start at t_next; nothing there can beat a strictly
      // nearer hit. The margin absorbs rounding in the accumulated boundary
      // parameters: visiting an extra cell is harmless, skipping one is not.
      const double margin = 1e-6 * (1.0 + t_next);
      if (t_next > t_exit + margin || best_t < t_next - margin) break;
      if (t_max_x <= t_max_y) {
        cx += step_x;
        t_max_x += t_delta_x;
        if (cx < 0 || cx >= nx_) break;
      } else {
        cy += step_y;
        t_max_y += t_delta_y;
        if (cy < 0 || cy >= ny_) break;
      }
    }
  }

  *out = best_slot >= 0 ? RayReading{best_t, scene.depot[best_slot]}
                        : RayReading{d_max, 0.0};
}

void SpatialGrid::cast_rays(const Scene& scene, int self, double heading, double fov,
                            int rays, double d_max, RayReading* out) const {
  for (int k = 0; k < rays; ++k) {
    const double a = ray_angle(heading, fov, rays, k);
    cast_one(scene, self, std::cos(a), std::sin(a), d_max, &out[k]);
  }
}

void assemble_observation(const RayReading* readings, int rays,
                          const double body[10], double* out) {
  for (int k = 0; k < rays; ++k) {
    out[2 * k] = readings[k].d;
    out[2 * k + 1] = readings[k].e_hit;
  }
  for (int k = 0; k < 10; ++k) {
    out[2 * rays + k] = body[k];
  }
}

}  // namespace mls
