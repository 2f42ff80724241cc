#pragma once

#include <algorithm>
#include <cstdint>
#include <random>
#include <set>
#include <utility>
#include <vector>

#include "cascade_recon/network.hpp"

namespace cascade_recon::gen {

// Undirected pairs become two directed edges, or one edge lower -> higher.
inline Network from_pairs(std::size_t n, const std::set<std::pair<NodeId, NodeId>>& pairs, bool bidirectional) {
  std::vector<Edge> edges;
  for (const auto& [a, b] : pairs) {
    edges.push_back({a, b});
    if (bidirectional) edges.push_back({b, a});
  }
  return Network::from_edges(n, std::move(edges));
}

/// Uniform random recursive tree: node i attaches to a uniform earlier node.
inline Network random_tree(std::size_t n, std::mt19937_64& rng, bool bidirectional = true) {
  std::set<std::pair<NodeId, NodeId>> pairs;
  for (NodeId i = 1; i < n; ++i) {
    std::uniform_int_distribution<NodeId> pick(0, i - 1);
    pairs.emplace(pick(rng), i);
  }
  return from_pairs(n, pairs, bidirectional);
}

inline Network star(std::size_t n, bool bidirectional = false) {
  std::set<std::pair<NodeId, NodeId>> pairs;
  for (NodeId i = 1; i < n; ++i) pairs.emplace(0, i);
  return from_pairs(n, pairs, bidirectional);
}

/// Random tree plus `extra` distinct chords, so the graph is connected and has loops.
inline Network random_loopy(std::size_t n, std::size_t extra, std::mt19937_64& rng, bool bidirectional = true) {
  std::set<std::pair<NodeId, NodeId>> pairs;
  for (NodeId i = 1; i < n; ++i) {
    std::uniform_int_distribution<NodeId> pick(0, i - 1);
    pairs.emplace(pick(rng), i);
  }
  const std::size_t max_pairs = n * (n - 1) / 2;
  std::uniform_int_distribution<NodeId> any(0, static_cast<NodeId>(n - 1));
  std::size_t target = std::min(max_pairs, pairs.size() + extra);
  while (pairs.size() < target) {
    NodeId a = any(rng), b = any(rng);
    if (a == b) continue;
    if (a > b) std::swap(a, b);
    pairs.emplace(a, b);
  }
  return from_pairs(n, pairs, bidirectional);
}

/// Preferential attachment: each new node links to `m` distinct existing
/// nodes chosen proportionally to degree. Connected, heavy-tailed degrees,
/// short loops when m >= 2.
inline Network power_law(std::size_t n, std::size_t m, std::mt19937_64& rng, bool bidirectional = true) {
  std::set<std::pair<NodeId, NodeId>> pairs;
  std::vector<NodeId> ends;  // each node repeated once per incident edge
  const std::size_t core = m + 1;
  for (NodeId a = 0; a < core && a < n; ++a)
    for (NodeId b = a + 1; b < core && b < n; ++b) {
      pairs.emplace(a, b);
      ends.push_back(a);
      ends.push_back(b);
    }
  for (NodeId v = static_cast<NodeId>(core); v < n; ++v) {
    std::set<NodeId> targets;
    while (targets.size() < m) {
      std::uniform_int_distribution<std::size_t> pick(0, ends.size() - 1);
      targets.insert(ends[pick(rng)]);
    }
    for (NodeId u : targets) {
      pairs.emplace(u, v);
      ends.push_back(u);
      ends.push_back(v);
    }
  }
  return from_pairs(n, pairs, bidirectional);
}

inline std::vector<double> uniform_couplings(std::size_t edges, std::mt19937_64& rng, double lo = 0.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> out(edges);
  for (auto& a : out) a = u(rng);
  return out;
}

}  // namespace cascade_recon::gen
