#include "mls/neural.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace mls {

double softplus(double x) {
  if (x > 30.0) return x;
  if (x < -30.0) return std::exp(x);
  return std::log1p(std::exp(x));
}

namespace {

inline double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline double decode_tau(double raw) { return softplus(raw) + 1e-3; }

}  // namespace

double MutationNet::forward(const double in[8], double* scratch) const {
  double* cur = scratch;
  double* next = scratch + hidden;
  for (int i = 0; i < hidden; ++i) {
    double acc = biases[0][i];
    const double* w = &weights[0][static_cast<std::size_t>(i) * 8];
    for (int k = 0; k < 8; ++k) acc += w[k] * in[k];
    cur[i] = std::tanh(acc);
  }
  for (int layer = 1; layer < layers; ++layer) {
    for (int i = 0; i < hidden; ++i) {
      double acc = biases[layer][i];
      const double* w = &weights[layer][static_cast<std::size_t>(i) * hidden];
      for (int k = 0; k < hidden; ++k) acc += w[k] * cur[k];
      next[i] = std::tanh(acc);
    }
    std::swap(cur, next);
  }
  double acc = biases[layers][0];
  for (int k = 0; k < hidden; ++k) acc += weights[layers][k] * cur[k];
  return acc;
}

double MutationNet::forward(const double in[8]) const {
  std::vector<double> scratch(2 * static_cast<std::size_t>(hidden));
  return forward(in, scratch.data());
}

GenomeLayout GenomeLayout::make(int units, int rays, int layers, int hidden) {
  GenomeLayout l;
  l.units = units;
  l.obs_dim = 2 * rays + 10;
  l.layers = layers;
  l.hidden = hidden;
  return l;
}

std::vector<double> flatten(const Substrate& sub, const MutationNet& net) {
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(
      sub.units * (2 + sub.obs_dim) + 2 * sub.units));
  out.insert(out.end(), sub.tau_raw.begin(), sub.tau_raw.end());
  out.insert(out.end(), sub.b.begin(), sub.b.end());
  out.insert(out.end(), sub.E.begin(), sub.E.end());
  out.insert(out.end(), sub.D.begin(), sub.D.end());
  for (std::size_t layer = 0; layer < net.weights.size(); ++layer) {
    out.insert(out.end(), net.weights[layer].begin(), net.weights[layer].end());
    out.insert(out.end(), net.biases[layer].begin(), net.biases[layer].end());
  }
  return out;
}

std::pair<Substrate, MutationNet> unflatten(std::span<const double> genome,
                                            const GenomeLayout& layout) {
  if (static_cast<int>(genome.size()) != layout.total_length()) {
    throw std::invalid_argument(
        "genome length " + std::to_string(genome.size()) + " does not match layout (" +
        std::to_string(layout.total_length()) + " expected)");
  }
  Substrate sub;
  sub.units = layout.units;
  sub.obs_dim = layout.obs_dim;
  const int n = layout.units;
  std::size_t pos = 0;
  const auto take = [&genome, &pos](std::vector<double>& dst, int count) {
    dst.assign(genome.begin() + pos, genome.begin() + pos + count);
    pos += count;
  };
  take(sub.tau_raw, n);
  take(sub.b, n);
  take(sub.E, n * layout.obs_dim);
  take(sub.D, 2 * n);
  sub.tau.resize(n);
  for (int i = 0; i < n; ++i) sub.tau[i] = decode_tau(sub.tau_raw[i]);

  MutationNet net;
  net.hidden = layout.hidden;
  net.layers = layout.layers;
  net.weights.resize(layout.layers + 1);
  net.biases.resize(layout.layers + 1);
  take(net.weights[0], 8 * layout.hidden);
  take(net.biases[0], layout.hidden);
  for (int layer = 1; layer < layout.layers; ++layer) {
    take(net.weights[layer], layout.hidden * layout.hidden);
    take(net.biases[layer], layout.hidden);
  }
  take(net.weights[layout.layers], layout.hidden);
  take(net.biases[layout.layers], 1);
  return {std::move(sub), std::move(net)};
}

void ctrnn_step(double* z, double* zbar, const double* J, const Substrate& sub,
                const double* obs, double dt, double tau_zbar, double* sig_scratch) {
  const int n = sub.units;
  for (int i = 0; i < n; ++i) {
    sig_scratch[i] = logistic(z[i] + sub.b[i]);
  }
  for (int i = 0; i < n; ++i) {
    double acc = 0.0;
    const double* j_row = J + static_cast<std::size_t>(i) * n;
    for (int k = 0; k < n; ++k) acc += j_row[k] * sig_scratch[k];
    const double* e_row = sub.E.data() + static_cast<std::size_t>(i) * sub.obs_dim;
    for (int k = 0; k < sub.obs_dim; ++k) acc += e_row[k] * obs[k];
    zbar[i] += dt * tau_zbar * (z[i] - zbar[i]);
    z[i] += dt * sub.tau[i] * (acc - z[i]);
  }
}

void readout(const double* z, const Substrate& sub, double& a_s, double& a_u) {
  const int n = sub.units;
  double acc_s = 0.0;
  double acc_u = 0.0;
  for (int k = 0; k < n; ++k) {
    acc_s += sub.D[k] * z[k];
    acc_u += sub.D[static_cast<std::size_t>(n) + k] * z[k];
  }
  a_s = std::tanh(acc_s);
  a_u = std::tanh(acc_u);
}

void mutate_recurrent(const double* J_parent, const double* zbar, int units,
                      const MutationNet& net, const MutationStats& stats,
                      double eta, const double* noise, double* J_child) {
  std::vector<double> scratch(2 * static_cast<std::size_t>(net.hidden));
  double in[8];
  in[3] = stats.ebar;
  in[4] = stats.ebar_g;
  in[5] = stats.ebar_e;
  in[6] = stats.ebar_c;
  in[7] = stats.m;
  for (int x = 0; x < units; ++x) {
    in[0] = zbar[x];
    for (int y = 0; y < units; ++y) {
      const std::size_t idx = static_cast<std::size_t>(x) * units + y;
      in[1] = zbar[y];
      in[2] = J_parent[idx];
      const double g = net.forward(in, scratch.data());
      J_child[idx] = J_parent[idx] + g * (1.0 + eta * noise[idx]);
    }
  }
}

}  // namespace mls
