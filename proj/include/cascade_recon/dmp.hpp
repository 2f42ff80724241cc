#pragma once

#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "cascade_recon/errors.hpp"
#include "cascade_recon/network.hpp"

namespace cascade_recon {

/// Probability that each node is susceptible at t = 0. Entries are 0 for
/// sources and 1 otherwise.
struct InitialCondition {
  std::vector<double> susceptible;

  static InitialCondition from_sources(std::size_t node_count, std::span<const NodeId> sources) {
    InitialCondition ic{std::vector<double>(node_count, 1.0)};
    for (NodeId s : sources) {
      if (s >= node_count) throw RangeError("source index " + std::to_string(s) + " out of range");
      ic.susceptible[s] = 0.0;
    }
    return ic;
  }

  void validate(std::size_t node_count) const {
    if (susceptible.size() != node_count) throw RangeError("initial condition has wrong length");
    bool any_source = false;
    for (double v : susceptible) {
      if (v != 0.0 && v != 1.0) throw RangeError("initial susceptibility must be 0 or 1");
      any_source |= v == 0.0;
    }
    if (!any_source) throw RangeError("initial condition has no source");
  }
};

/// Position of the reverse edge (i -> k) among the in-edges of k, for every
/// edge e = (k -> i); `npos` when the reverse edge does not exist. Cavity
/// products over "in-neighbors of k except i" skip that position.
struct CavityIndex {
  static constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();
  std::vector<std::size_t> reverse_pos;

  explicit CavityIndex(const Network& net) : reverse_pos(net.edge_count(), npos) {
    for (EdgeId e = 0; e < net.edge_count(); ++e) {
      const auto [k, i] = net.edge(e);
      if (const auto rev = net.edge_id(i, k)) {
        const auto in = net.in_edges(k);
        for (std::size_t pos = 0; pos < in.size(); ++pos)
          if (in[pos] == *rev) reverse_pos[e] = pos;
      }
    }
  }
};

/// Full time history of the DMP messages and marginals, time-major.
template <class Real>
struct BasicDmpTrace {
  int horizon = 0;
  std::size_t nodes = 0;
  std::size_t edges = 0;
  std::vector<Real> theta_;  // [t * edges + e]
  std::vector<Real> phi_;
  std::vector<Real> ps_;  // [t * nodes + i]
  std::vector<Real> m_;

  Real theta(EdgeId e, int t) const { return theta_[static_cast<std::size_t>(t) * edges + e]; }
  Real phi(EdgeId e, int t) const { return phi_[static_cast<std::size_t>(t) * edges + e]; }
  Real ps(NodeId i, int t) const { return ps_[static_cast<std::size_t>(t) * nodes + i]; }
  Real m(NodeId i, int t) const { return m_[static_cast<std::size_t>(t) * nodes + i]; }
};

using DmpTrace = BasicDmpTrace<double>;

/// Forward DMP recursions for the SI model.
///
/// At each step all theta(t) are updated first, then the node marginals and
/// cavity products at t, then phi(t), which needs both theta(t-1) and theta(t).
/// Cavity products are built from prefix/suffix products; nothing is divided.
template <class Real>
BasicDmpTrace<Real> dmp_forward(const Network& net, std::span<const Real> alpha, const InitialCondition& init,
                                int horizon) {
  if (horizon < 1) throw RangeError("horizon must be at least 1");
  if (alpha.size() != net.edge_count()) throw RangeError("couplings size does not match edge count");
  init.validate(net.node_count());
  const std::size_t N = net.node_count(), E = net.edge_count();
  const auto T = static_cast<std::size_t>(horizon);
  const CavityIndex cavity(net);

  BasicDmpTrace<Real> tr;
  tr.horizon = horizon;
  tr.nodes = N;
  tr.edges = E;
  tr.theta_.assign((T + 1) * E, Real(0));
  tr.phi_.assign((T + 1) * E, Real(0));
  tr.ps_.assign((T + 1) * N, Real(0));
  tr.m_.assign((T + 1) * N, Real(0));

  for (EdgeId e = 0; e < E; ++e) {
    tr.theta_[e] = Real(1);
    tr.phi_[e] = Real(1) - Real(init.susceptible[net.edge(e).src]);
  }
  for (NodeId i = 0; i < N; ++i) {
    tr.ps_[i] = Real(init.susceptible[i]);
    tr.m_[i] = Real(1) - Real(init.susceptible[i]);
  }

  std::vector<Real> cav_prev(E, Real(1)), cav_cur(E);
  std::vector<Real> prefix, suffix;
  for (std::size_t t = 1; t <= T; ++t) {
    const Real* th_prev = &tr.theta_[(t - 1) * E];
    const Real* ph_prev = &tr.phi_[(t - 1) * E];
    Real* th = &tr.theta_[t * E];
    Real* ph = &tr.phi_[t * E];
    for (EdgeId e = 0; e < E; ++e) th[e] = th_prev[e] - alpha[e] * ph_prev[e];

    for (NodeId k = 0; k < N; ++k) {
      const auto in = net.in_edges(k);
      const std::size_t d = in.size();
      prefix.assign(d + 1, Real(1));
      suffix.assign(d + 1, Real(1));
      for (std::size_t j = 0; j < d; ++j) prefix[j + 1] = prefix[j] * th[in[j]];
      for (std::size_t j = d; j-- > 0;) suffix[j] = suffix[j + 1] * th[in[j]];
      const Real ps0 = Real(init.susceptible[k]);
      tr.ps_[t * N + k] = ps0 * prefix[d];
      tr.m_[t * N + k] = tr.ps_[(t - 1) * N + k] - tr.ps_[t * N + k];
      for (EdgeId e : net.out_edges(k)) {
        const auto pos = cavity.reverse_pos[e];
        cav_cur[e] = pos == CavityIndex::npos ? prefix[d] : prefix[pos] * suffix[pos + 1];
      }
    }
    for (EdgeId e = 0; e < E; ++e) {
      const Real ps0 = Real(init.susceptible[net.edge(e).src]);
      ph[e] = (Real(1) - alpha[e]) * ph_prev[e] + ps0 * (cav_prev[e] - cav_cur[e]);
    }
    std::swap(cav_prev, cav_cur);
  }
  return tr;
}

inline DmpTrace dmp_forward(const Network& net, const Couplings& couplings, const InitialCondition& init,
                            int horizon) {
  return dmp_forward<double>(net, couplings.values(), init, horizon);
}

/// Probability that node i activates exactly at time t.
template <class Real>
Real activation_marginal(const BasicDmpTrace<Real>& trace, NodeId i, int t) {
  if (t < 0 || t > trace.horizon) throw RangeError("time " + std::to_string(t) + " outside [0, T]");
  if (i >= trace.nodes) throw RangeError("node index out of range");
  return trace.m(i, t);
}

}  // namespace cascade_recon
