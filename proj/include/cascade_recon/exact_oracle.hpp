#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "cascade_recon/dmp.hpp"
#include "cascade_recon/errors.hpp"
#include "cascade_recon/network.hpp"

namespace cascade_recon {

inline constexpr std::size_t kMaxOracleNodes = 20;

/// Transition law of the synchronous SI chain over infected subsets.
class SubsetChain {
 public:
  SubsetChain(const Network& net, const Couplings& couplings) : net_(net), couplings_(couplings) {
    if (net.node_count() > kMaxOracleNodes)
      throw CapacityError("subset-state oracle supports at most " + std::to_string(kMaxOracleNodes) + " nodes, got " +
                          std::to_string(net.node_count()));
    if (couplings.size() != net.edge_count()) throw RangeError("couplings size does not match edge count");
  }

  // Per-node infection probability for every susceptible node, given infected set `I`.
  std::vector<std::pair<NodeId, double>> infection_probabilities(std::uint32_t I) const {
    std::vector<std::pair<NodeId, double>> out;
    for (NodeId j = 0; j < net_.node_count(); ++j) {
      if (I >> j & 1u) continue;
      double escape = 1.0;
      for (EdgeId e : net_.in_edges(j))
        if (I >> net_.edge(e).src & 1u) escape *= 1.0 - couplings_[e];
      if (escape < 1.0) out.emplace_back(j, 1.0 - escape);
    }
    return out;
  }

  // Full next-state distribution from `I` as (subset, probability) pairs.
  std::vector<std::pair<std::uint32_t, double>> successors(std::uint32_t I) const {
    std::vector<std::pair<std::uint32_t, double>> out{{I, 1.0}};
    for (const auto& [j, pi] : infection_probabilities(I)) {
      const std::uint32_t bit = 1u << j;
      if (pi >= 1.0) {
        for (auto& o : out) o.first |= bit;
        continue;
      }
      const std::size_t n = out.size();
      for (std::size_t k = 0; k < n; ++k) {
        out.emplace_back(out[k].first | bit, out[k].second * pi);
        out[k].second *= 1.0 - pi;
      }
    }
    return out;
  }

  // Probability of moving from `from` to exactly `to` in one step.
  double transition(std::uint32_t from, std::uint32_t to) const {
    if ((from & to) != from) return 0.0;
    double p = 1.0;
    for (NodeId j = 0; j < net_.node_count(); ++j) {
      if (from >> j & 1u) continue;
      double escape = 1.0;
      for (EdgeId e : net_.in_edges(j))
        if (from >> net_.edge(e).src & 1u) escape *= 1.0 - couplings_[e];
      p *= (to >> j & 1u) ? 1.0 - escape : escape;
    }
    return p;
  }

 private:
  const Network& net_;
  const Couplings& couplings_;
};

struct ExactMarginals {
  int horizon = 0;
  std::size_t nodes = 0;
  std::vector<double> ps_;  // [t * nodes + i]

  double ps(NodeId i, int t) const { return ps_[static_cast<std::size_t>(t) * nodes + i]; }
};

inline std::uint32_t source_mask(const InitialCondition& init) {
  std::uint32_t mask = 0;
  for (std::size_t i = 0; i < init.susceptible.size(); ++i)
    if (init.susceptible[i] == 0.0) mask |= 1u << i;
  return mask;
}

/// Exact susceptibility marginals by evolving the distribution over infected
/// subsets. Cost grows as 3^N per step.
inline ExactMarginals exact_marginals_oracle(const Network& net, const Couplings& couplings,
                                             const InitialCondition& init, int horizon) {
  const SubsetChain chain(net, couplings);
  init.validate(net.node_count());
  if (horizon < 1) throw RangeError("horizon must be at least 1");
  const std::size_t N = net.node_count();
  const std::size_t states = std::size_t{1} << N;

  ExactMarginals out{horizon, N, std::vector<double>((static_cast<std::size_t>(horizon) + 1) * N, 0.0)};
  std::vector<double> dist(states, 0.0), next(states, 0.0);
  dist[source_mask(init)] = 1.0;
  const auto record = [&](int t) {
    for (std::size_t I = 0; I < states; ++I) {
      if (dist[I] == 0.0) continue;
      for (std::size_t i = 0; i < N; ++i)
        if (!(I >> i & 1u)) out.ps_[static_cast<std::size_t>(t) * N + i] += dist[I];
    }
  };
  record(0);
  for (int t = 1; t <= horizon; ++t) {
    std::fill(next.begin(), next.end(), 0.0);
    for (std::size_t I = 0; I < states; ++I) {
      if (dist[I] == 0.0) continue;
      for (const auto& [J, p] : chain.successors(static_cast<std::uint32_t>(I))) next[J] += dist[I] * p;
    }
    std::swap(dist, next);
    record(t);
  }
  return out;
}

}  // namespace cascade_recon
