#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace mls {

// One ray's two channels: distance to the nearest struck boid and that
// boid's depot. No hit reads (d_max, 0).
struct RayReading {
  double d = 0.0;
  double e_hit = 0.0;
};

// Frozen per-step view of the population used by the sensors. Spans index
// slots; inactive slots are never hit candidates.
struct Scene {
  std::span<const double> x;
  std::span<const double> y;
  std::span<const double> depot;
  std::span<const std::uint8_t> active;
  double radius = 10.0;  // body radius (d_b / 2)

  int count() const { return static_cast<int>(x.size()); }
};

// Direction of ray k out of `rays` spanning `fov` centered on `heading`,
// endpoints included; a single ray points along the heading. Both sensing
// paths must use this exact computation so their results match bitwise.
inline double ray_angle(double heading, double fov, int rays, int k) {
  if (rays == 1) return heading;
  return heading - 0.5 * fov + fov * static_cast<double>(k) / static_cast<double>(rays - 1);
}

// Smallest non-negative parameter t at which origin + t*(dx, dy) meets the
// circle (cx, cy, radius), with (dx, dy) unit length. Origins inside the
// circle give 0; no intersection gives a negative value. Deliberately not
// inline: a single compiled body keeps the grid and brute-force paths
// bit-identical.
double ray_circle(double ox, double oy, double dx, double dy, double cx, double cy,
                  double radius);

// O(N) reference: tests every active boid on every ray, nearest hit wins,
// ties broken toward the lower slot.
void cast_rays_brute(const Scene& scene, int self, double heading, double fov,
                     int rays, double d_max, RayReading* out);

// Number of other active boids whose center lies strictly within d_b.
int count_overlaps(const Scene& scene, int self, double d_b);

// Uniform-grid accelerator. Build once per step over the frozen scene, then
// cast from any thread. Results are bit-identical to cast_rays_brute.
class SpatialGrid {
 public:
  // cell_hint is the nominal cell edge (the boid diameter works well); the
  // actual edge grows when the population spreads out, to bound cell count.
  void build(const Scene& scene, double cell_hint);

  void cast_rays(const Scene& scene, int self, double heading, double fov,
                 int rays, double d_max, RayReading* out) const;

 private:
  void cast_one(const Scene& scene, int self, double dirx, double diry,
                double d_max, RayReading* out) const;

  double origin_x_ = 0.0;
  double origin_y_ = 0.0;
  double cell_ = 1.0;
  int nx_ = 0;
  int ny_ = 0;
  std::vector<int> cell_start_;  // CSR offsets, nx_*ny_ + 1
  std::vector<int> entries_;     // slot ids, ascending within each cell
};

// Interleaves r readings as [d_1, e_1, ..., d_r, e_r] and appends the ten
// body entries. out must hold 2*rays + 10 values.
void assemble_observation(const RayReading* readings, int rays,
                          const double body[10], double* out);

}  // namespace mls
