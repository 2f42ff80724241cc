#pragma once

#include <chrono>
#include <cmath>
#include <span>
#include <vector>

#include "cascade_recon/cascade.hpp"
#include "cascade_recon/dmp_grad.hpp"
#include "cascade_recon/errors.hpp"
#include "cascade_recon/grouping.hpp"
#include "cascade_recon/network.hpp"
#include "cascade_recon/optimize.hpp"

namespace cascade_recon {

struct FitResult {
  Couplings couplings;
  int iterations = 0;
  std::vector<double> free_energy_trajectory;  // accepted steps only
  std::vector<IterationRecord> history;
  bool converged = false;
  double wall_time = 0.0;  // seconds
};

/// Minimizes the DMP free energy of the observed cascades over the couplings,
/// starting from the constant alpha_init.
inline FitResult dmprec_fit(std::span<const ObservedCascade> dataset, const Network& net, const FitConfig& config) {
  config.validate();
  const auto start = std::chrono::steady_clock::now();
  const auto data = compile_dataset(dataset, net.node_count());
  const std::size_t threads = config.threads;

  const auto value = [&](const std::vector<double>& x) {
    const double f = free_energy_value<double>(data, net, x, threads);
    if (!std::isfinite(f)) throw DatasetError("free energy is not finite; input data is corrupt");
    return f;
  };
  const auto value_grad = [&](const std::vector<double>& x, std::vector<double>& g) {
    g = free_energy_with_gradient(data, net, Couplings(x), threads).gradient;
  };
  auto opt = projected_gradient_descent(value, value_grad, std::vector<double>(net.edge_count(), config.alpha_init),
                                        config.alpha_min, config.alpha_max, config);

  FitResult out;
  out.couplings = Couplings(std::move(opt.x));
  out.iterations = opt.iterations;
  for (const auto& h : opt.history) out.free_energy_trajectory.push_back(h.value);
  out.history = std::move(opt.history);
  out.converged = opt.converged;
  out.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

/// Edges whose coupling the data can constrain: everything except the
/// in-edges of hidden nodes without out-edges.
inline std::vector<EdgeId> identifiable_edges(const Network& net, const MaskSpec& mask) {
  std::vector<char> hidden(net.node_count(), 0);
  for (NodeId h : mask.hidden) {
    if (h >= net.node_count()) throw RangeError("hidden node index out of range");
    hidden[h] = 1;
  }
  std::vector<EdgeId> out;
  for (EdgeId e = 0; e < net.edge_count(); ++e) {
    const NodeId s = net.edge(e).dst;
    if (hidden[s] && net.out_edges(s).empty()) continue;
    out.push_back(e);
  }
  return out;
}

// Nodes hidden in every cascade of the dataset.
inline std::vector<NodeId> always_hidden_nodes(std::span<const ObservedCascade> dataset, std::size_t node_count) {
  std::vector<NodeId> out;
  for (NodeId i = 0; i < node_count; ++i) {
    bool hidden = !dataset.empty();
    for (const auto& obs : dataset) hidden = hidden && std::holds_alternative<Hidden>(obs.status[i]);
    if (hidden) out.push_back(i);
  }
  return out;
}

/// Mean absolute coupling error over `included` edges.
inline double l1_coupling_error(const Couplings& estimate, const Couplings& truth, std::span<const EdgeId> included) {
  if (included.empty()) throw RangeError("no edges included in the error metric");
  if (estimate.size() != truth.size()) throw RangeError("estimate and truth differ in size");
  double sum = 0.0;
  for (EdgeId e : included) {
    if (e >= truth.size()) throw RangeError("edge index out of range");
    sum += std::abs(estimate[e] - truth[e]);
  }
  return sum / static_cast<double>(included.size());
}

}  // namespace cascade_recon
