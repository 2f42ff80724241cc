#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <span>
#include <utility>
#include <vector>

#include "cascade_recon/cascade.hpp"
#include "cascade_recon/dmp.hpp"
#include "cascade_recon/errors.hpp"
#include "cascade_recon/grouping.hpp"
#include "cascade_recon/network.hpp"
#include "cascade_recon/parallel.hpp"

namespace cascade_recon {

// Floor applied to every probability before taking its logarithm.
inline constexpr double kLogFloor = 1e-12;

enum class GradStorage {
  full,            // p and q kept for every time step
  marginals_only,  // only dP_S is kept; p and q use two rolling slices
};

/// Derivatives of the DMP messages and marginals with respect to a set of
/// tracked couplings ("parameters"). Parameter slot f refers to edge params[f].
struct GradTrace {
  int horizon = 0;
  std::size_t nodes = 0;
  std::size_t edges = 0;
  std::vector<EdgeId> params;
  std::vector<double> p_;    // [(t * edges + e) * F + f], empty unless GradStorage::full
  std::vector<double> q_;
  std::vector<double> dps_;  // [(t * nodes + i) * F + f]

  std::size_t param_count() const { return params.size(); }

  double p(EdgeId e, std::size_t f, int t) const { return p_[(static_cast<std::size_t>(t) * edges + e) * params.size() + f]; }
  double q(EdgeId e, std::size_t f, int t) const { return q_[(static_cast<std::size_t>(t) * edges + e) * params.size() + f]; }
  double dps(NodeId i, std::size_t f, int t) const {
    return dps_[(static_cast<std::size_t>(t) * nodes + i) * params.size() + f];
  }
  // d m^i(t) / d alpha_f; zero at t = 0 where m does not depend on the couplings.
  double dm(NodeId i, std::size_t f, int t) const { return t == 0 ? 0.0 : dps(i, f, t - 1) - dps(i, f, t); }

  const double* dps_row(NodeId i, int t) const {
    return &dps_[(static_cast<std::size_t>(t) * nodes + i) * params.size()];
  }
};

/// Forward-mode derivative messages p = d theta / d alpha and q = d phi / d alpha,
/// run alongside the DMP recursions.
///
/// Within a step all p(t) are formed before any q(t), since the q update uses
/// the derivative of the cavity product at both t-1 and t. Cavity products and
/// their derivatives are prefix/suffix products of (theta, p) dual numbers.
inline std::pair<DmpTrace, GradTrace> dmp_forward_with_gradients(const Network& net, const Couplings& couplings,
                                                                 const InitialCondition& init, int horizon,
                                                                 std::span<const EdgeId> params,
                                                                 GradStorage storage = GradStorage::full) {
  DmpTrace tr = dmp_forward(net, couplings, init, horizon);
  const std::size_t N = net.node_count(), E = net.edge_count(), F = params.size();
  const auto T = static_cast<std::size_t>(horizon);
  const CavityIndex cavity(net);
  const auto alpha = couplings.values();

  constexpr std::size_t none = std::numeric_limits<std::size_t>::max();
  std::vector<std::size_t> slot(E, none);
  for (std::size_t f = 0; f < F; ++f) {
    if (params[f] >= E) throw RangeError("parameter edge out of range");
    slot[params[f]] = f;
  }

  GradTrace g;
  g.horizon = horizon;
  g.nodes = N;
  g.edges = E;
  g.params.assign(params.begin(), params.end());
  g.dps_.assign((T + 1) * N * F, 0.0);
  const bool keep = storage == GradStorage::full;
  if (keep) {
    g.p_.assign((T + 1) * E * F, 0.0);
    g.q_.assign((T + 1) * E * F, 0.0);
  }

  std::vector<double> p_roll[2], q_roll[2];
  if (!keep)
    for (int b = 0; b < 2; ++b) {
      p_roll[b].assign(E * F, 0.0);
      q_roll[b].assign(E * F, 0.0);
    }
  const auto p_slice = [&](std::size_t t) -> double* { return keep ? &g.p_[t * E * F] : p_roll[t & 1].data(); };
  const auto q_slice = [&](std::size_t t) -> double* { return keep ? &g.q_[t * E * F] : q_roll[t & 1].data(); };

  // Derivative of the cavity product (in-neighbors of k except i) for edge (k -> i).
  std::vector<double> cd_prev(E * F, 0.0), cd_cur(E * F, 0.0);
  std::vector<double> pre_val, suf_val, pre_der, suf_der;

  for (std::size_t t = 1; t <= T; ++t) {
    const double* p_prev = p_slice(t - 1);
    const double* q_prev = q_slice(t - 1);
    double* p_cur = p_slice(t);
    double* q_cur = q_slice(t);

    for (EdgeId e = 0; e < E; ++e) {
      const double a = alpha[e];
      const double* pp = p_prev + e * F;
      const double* qp = q_prev + e * F;
      double* pc = p_cur + e * F;
      for (std::size_t f = 0; f < F; ++f) pc[f] = pp[f] - a * qp[f];
      if (slot[e] != none) pc[slot[e]] -= tr.phi(e, static_cast<int>(t - 1));
    }

    for (NodeId k = 0; k < N; ++k) {
      const auto in = net.in_edges(k);
      const std::size_t d = in.size();
      pre_val.assign(d + 1, 1.0);
      suf_val.assign(d + 1, 1.0);
      pre_der.assign((d + 1) * F, 0.0);
      suf_der.assign((d + 1) * F, 0.0);
      for (std::size_t j = 0; j < d; ++j) {
        const double th = tr.theta(in[j], static_cast<int>(t));
        const double* pj = p_cur + in[j] * F;
        pre_val[j + 1] = pre_val[j] * th;
        for (std::size_t f = 0; f < F; ++f) pre_der[(j + 1) * F + f] = pre_der[j * F + f] * th + pre_val[j] * pj[f];
      }
      for (std::size_t j = d; j-- > 0;) {
        const double th = tr.theta(in[j], static_cast<int>(t));
        const double* pj = p_cur + in[j] * F;
        suf_val[j] = suf_val[j + 1] * th;
        for (std::size_t f = 0; f < F; ++f) suf_der[j * F + f] = suf_der[(j + 1) * F + f] * th + suf_val[j + 1] * pj[f];
      }
      const double ps0 = init.susceptible[k];
      double* dps = &g.dps_[(t * N + k) * F];
      for (std::size_t f = 0; f < F; ++f) dps[f] = ps0 * pre_der[d * F + f];
      for (EdgeId e : net.out_edges(k)) {
        const auto pos = cavity.reverse_pos[e];
        double* cd = &cd_cur[e * F];
        if (pos == CavityIndex::npos) {
          std::copy_n(&pre_der[d * F], F, cd);
        } else {
          for (std::size_t f = 0; f < F; ++f)
            cd[f] = pre_der[pos * F + f] * suf_val[pos + 1] + pre_val[pos] * suf_der[(pos + 1) * F + f];
        }
      }
    }

    for (EdgeId e = 0; e < E; ++e) {
      const double a = alpha[e];
      const double ps0 = init.susceptible[net.edge(e).src];
      const double* qp = q_prev + e * F;
      const double* cp = &cd_prev[e * F];
      const double* cc = &cd_cur[e * F];
      double* qc = q_cur + e * F;
      for (std::size_t f = 0; f < F; ++f) qc[f] = (1.0 - a) * qp[f] + ps0 * (cp[f] - cc[f]);
      if (slot[e] != none) qc[slot[e]] -= tr.phi(e, static_cast<int>(t - 1));
    }
    std::swap(cd_prev, cd_cur);
  }
  return {std::move(tr), std::move(g)};
}

inline std::vector<EdgeId> all_edges(const Network& net) {
  std::vector<EdgeId> out(net.edge_count());
  std::iota(out.begin(), out.end(), EdgeId{0});
  return out;
}

inline std::pair<DmpTrace, GradTrace> dmp_forward_with_gradients(const Network& net, const Couplings& couplings,
                                                                 const InitialCondition& init, int horizon) {
  const auto params = all_edges(net);
  return dmp_forward_with_gradients(net, couplings, init, horizon, params);
}

// Probability of an activation window under a trace; hi == T means "still
// susceptible at lo".
template <class Trace>
auto window_probability(const Trace& tr, NodeId i, int lo, int hi) {
  return hi < tr.horizon ? tr.ps(i, lo) - tr.ps(i, hi) : tr.ps(i, lo);
}

struct FreeEnergyReport {
  double value = 0.0;
  std::vector<double> gradient;  // per edge
  std::vector<double> per_node;  // contribution of each node; 0 for never-observed nodes
};

/// Approximate negative log-likelihood of a compiled dataset. Templated on the
/// scalar so the same evaluation can run in extended precision.
template <class Real>
Real free_energy_value(const CompiledDataset& data, const Network& net, std::span<const Real> alpha,
                       std::size_t threads = 1, std::vector<Real>* per_node = nullptr) {
  const std::size_t G = data.groups.size();
  std::vector<std::vector<Real>> node_sums(G, std::vector<Real>(data.nodes, Real(0)));
  parallel_for(G, threads, [&](std::size_t gi) {
    const auto& grp = data.groups[gi];
    const auto tr = dmp_forward<Real>(net, alpha, grp.init, data.horizon);
    for (const auto& w : grp.terms) {
      const Real prob = window_probability(tr, w.node, w.lo, w.hi);
      node_sums[gi][w.node] -= Real(w.count) * std::log(std::max(prob, Real(kLogFloor)));
    }
  });
  std::vector<Real> nodes(data.nodes, Real(0));
  for (std::size_t gi = 0; gi < G; ++gi)
    for (std::size_t i = 0; i < data.nodes; ++i) nodes[i] += node_sums[gi][i];
  Real total(0);
  for (const Real v : nodes) total += v;
  if (per_node) *per_node = std::move(nodes);
  return total;
}

enum class GradientMode {
  full,       // one pass per group tracking every coupling at once
  streaming,  // one pass per (group, coupling), O(|E| T) memory
};

/// Free energy and its gradient. Groups run in parallel; their contributions
/// are reduced in group order, so the result does not depend on `threads`.
inline FreeEnergyReport free_energy_with_gradient(const CompiledDataset& data, const Network& net,
                                                  const Couplings& couplings, std::size_t threads = 1,
                                                  GradientMode mode = GradientMode::full) {
  const std::size_t G = data.groups.size(), E = net.edge_count(), N = data.nodes;
  std::vector<std::vector<double>> grads(G, std::vector<double>(E, 0.0));
  std::vector<std::vector<double>> node_sums(G, std::vector<double>(N, 0.0));

  const auto accumulate = [&](std::size_t gi, const DmpTrace& tr, const GradTrace& gt, bool with_value) {
    const std::size_t F = gt.param_count();
    auto& grad = grads[gi];
    for (const auto& w : data.groups[gi].terms) {
      const double prob = window_probability(tr, w.node, w.lo, w.hi);
      const double denom = std::max(prob, kLogFloor);
      if (with_value) node_sums[gi][w.node] -= w.count * std::log(denom);
      const double* lo_row = gt.dps_row(w.node, w.lo);
      const double scale = -w.count / denom;
      if (w.hi < data.horizon) {
        const double* hi_row = gt.dps_row(w.node, w.hi);
        for (std::size_t f = 0; f < F; ++f) grad[gt.params[f]] += scale * (lo_row[f] - hi_row[f]);
      } else {
        for (std::size_t f = 0; f < F; ++f) grad[gt.params[f]] += scale * lo_row[f];
      }
    }
  };

  parallel_for(G, threads, [&](std::size_t gi) {
    const auto& grp = data.groups[gi];
    if (mode == GradientMode::full) {
      const auto params = all_edges(net);
      const auto [tr, gt] = dmp_forward_with_gradients(net, couplings, grp.init, data.horizon, params,
                                                       GradStorage::marginals_only);
      accumulate(gi, tr, gt, true);
    } else {
      for (EdgeId f = 0; f < E; ++f) {
        const auto [tr, gt] = dmp_forward_with_gradients(net, couplings, grp.init, data.horizon,
                                                         std::span<const EdgeId>(&f, 1), GradStorage::marginals_only);
        accumulate(gi, tr, gt, f == 0);
      }
      if (E == 0) {
        const auto tr = dmp_forward(net, couplings, grp.init, data.horizon);
        accumulate(gi, tr, GradTrace{}, true);
      }
    }
  });

  FreeEnergyReport rep;
  rep.gradient.assign(E, 0.0);
  rep.per_node.assign(N, 0.0);
  for (std::size_t gi = 0; gi < G; ++gi) {
    for (std::size_t e = 0; e < E; ++e) rep.gradient[e] += grads[gi][e];
    for (std::size_t i = 0; i < N; ++i) rep.per_node[i] += node_sums[gi][i];
  }
  for (double v : rep.per_node) rep.value += v;
  return rep;
}

/// Free energy of observed cascades (value only). Source nodes are conditioned
/// on and do not contribute; hidden nodes contribute nothing.
inline double observed_negative_log_likelihood(std::span<const ObservedCascade> dataset, const Network& net,
                                               const Couplings& couplings, std::size_t threads = 1) {
  if (couplings.size() != net.edge_count()) throw RangeError("couplings size does not match edge count");
  const auto data = compile_dataset(dataset, net.node_count());
  return free_energy_value<double>(data, net, couplings.values(), threads);
}

inline FreeEnergyReport free_energy_gradient(std::span<const ObservedCascade> dataset, const Network& net,
                                             const Couplings& couplings, std::size_t threads = 1,
                                             GradientMode mode = GradientMode::full) {
  if (couplings.size() != net.edge_count()) throw RangeError("couplings size does not match edge count");
  const auto data = compile_dataset(dataset, net.node_count());
  return free_energy_with_gradient(data, net, couplings, threads, mode);
}

struct PopulationFreeEnergy {
  double value = 0.0;
  std::vector<double> gradient;
};

/// Infinite-sample limit of the free energy for cascades generated under
/// `truth` from `init`, evaluated at `couplings`. `observed` lists the nodes
/// entering the sum (default: every non-source node).
inline PopulationFreeEnergy population_free_energy(const Network& net, const Couplings& truth,
                                                   const Couplings& couplings, const InitialCondition& init,
                                                   int horizon, std::span<const NodeId> observed = {}) {
  const auto star = dmp_forward(net, truth, init, horizon);
  const auto [tr, gt] = dmp_forward_with_gradients(net, couplings, init, horizon);
  std::vector<NodeId> nodes(observed.begin(), observed.end());
  if (nodes.empty())
    for (NodeId i = 0; i < net.node_count(); ++i)
      if (init.susceptible[i] != 0.0) nodes.push_back(i);

  const std::size_t E = net.edge_count();
  PopulationFreeEnergy out{0.0, std::vector<double>(E, 0.0)};
  const auto add = [&](double weight, double prob, auto derivative) {
    if (weight == 0.0) return;
    const double denom = std::max(prob, kLogFloor);
    out.value -= weight * std::log(denom);
    for (std::size_t f = 0; f < E; ++f) out.gradient[gt.params[f]] -= weight * derivative(f) / denom;
  };
  for (NodeId i : nodes) {
    if (init.susceptible[i] == 0.0) continue;
    for (int t = 1; t <= horizon - 1; ++t)
      add(star.m(i, t), tr.m(i, t), [&](std::size_t f) { return gt.dm(i, f, t); });
    add(star.ps(i, horizon - 1), tr.ps(i, horizon - 1), [&](std::size_t f) { return gt.dps(i, f, horizon - 1); });
  }
  return out;
}

}  // namespace cascade_recon
