#pragma once

#include <span>
#include <utility>
#include <vector>

namespace mls {

// Shared controller parameters, tuned by group-level selection and common to
// every boid in a rollout. tau_raw holds the genome-space values; tau is the
// decoded, strictly positive rate vector.
struct Substrate {
  int units = 0;    // n
  int obs_dim = 0;  // 2r + 10
  std::vector<double> tau_raw;  // n
  std::vector<double> tau;      // n, softplus(tau_raw) + 1e-3
  std::vector<double> b;        // n
  std::vector<double> E;        // n x obs_dim, row-major
  std::vector<double> D;        // 2 x n, row-major
};

// Learned mutation operator: an MLP mapping the 8 birth-time statistics
// [zbar_x, zbar_y, J_xy, ebar, ebar_g, ebar_e, ebar_c, m] to one additive
// perturbation. tanh hidden layers, linear output.
struct MutationNet {
  int hidden = 0;  // h
  int layers = 0;  // l, number of hidden layers
  std::vector<std::vector<double>> weights;  // forward order, row-major out x in
  std::vector<std::vector<double>> biases;

  // scratch must hold 2 * hidden values; pass the same buffer across calls.
  double forward(const double in[8], double* scratch) const;
  double forward(const double in[8]) const;
};

// Numerically stable log(1 + exp(x)).
double softplus(double x);

// Offsets of the flat genome encoding: tau_raw, b, E (row-major), D
// (row-major), then MLP layers in forward order (weights row-major, then
// biases). This ordering is fixed; checkpoints depend on it.
struct GenomeLayout {
  int units = 0;
  int obs_dim = 0;
  int layers = 0;
  int hidden = 0;

  static GenomeLayout make(int units, int rays, int layers, int hidden);

  int substrate_length() const { return units * (2 + obs_dim) + 2 * units; }
  int mlp_length() const {
    return (8 * hidden + hidden) + (layers - 1) * (hidden * hidden + hidden) +
           (hidden + 1);
  }
  int total_length() const { return substrate_length() + mlp_length(); }
};

std::vector<double> flatten(const Substrate& sub, const MutationNet& net);

// Throws std::invalid_argument when genome.size() != layout.total_length().
std::pair<Substrate, MutationNet> unflatten(std::span<const double> genome,
                                            const GenomeLayout& layout);

// One Euler step of the recurrent controller:
//   zbar' = zbar + dt * tau_zbar * (z - zbar)        (uses the incoming z)
//   z'    = z + dt * tau ⊙ (J sigma(z + b) + E obs - z)
// sig_scratch must hold `units` values.
void ctrnn_step(double* z, double* zbar, const double* J, const Substrate& sub,
                const double* obs, double dt, double tau_zbar, double* sig_scratch);

// (a_s, a_u) = tanh(D z).
void readout(const double* z, const Substrate& sub, double& a_s, double& a_u);

// Parent statistics fed to the mutation operator, taken at the birth step.
struct MutationStats {
  double ebar = 0.0;
  double ebar_g = 0.0;
  double ebar_e = 0.0;
  double ebar_c = 0.0;
  double m = 0.0;
};

// J_child[x][y] = J_parent[x][y] + g(o_xy) * (1 + eta * noise[x][y]), where
// o_xy packs (zbar[x], zbar[y], J_parent[x][y], stats...). noise holds n*n
// i.i.d. standard Gaussian samples.
void mutate_recurrent(const double* J_parent, const double* zbar, int units,
                      const MutationNet& net, const MutationStats& stats,
                      double eta, const double* noise, double* J_child);

}  // namespace mls
