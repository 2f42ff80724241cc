#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "cascade_recon/errors.hpp"
#include "cascade_recon/network.hpp"
#include "cascade_recon/parallel.hpp"
#include "cascade_recon/rng.hpp"

namespace cascade_recon {

/// One realization of the SI dynamics. tau[i] == horizon means "activated at
/// the horizon or later" (censored).
struct Cascade {
  int horizon = 0;
  std::vector<int> tau;
  std::vector<NodeId> sources;

  friend bool operator==(const Cascade&, const Cascade&) = default;
};

struct Exact {
  int t = 0;
  friend bool operator==(const Exact&, const Exact&) = default;
};
struct CensoredAtHorizon {
  friend bool operator==(const CensoredAtHorizon&, const CensoredAtHorizon&) = default;
};
// Activation time in (lo, hi].
struct Interval {
  int lo = 0;
  int hi = 0;
  friend bool operator==(const Interval&, const Interval&) = default;
};
struct Hidden {
  friend bool operator==(const Hidden&, const Hidden&) = default;
};

using NodeStatus = std::variant<Exact, CensoredAtHorizon, Interval, Hidden>;

struct ObservedCascade {
  int horizon = 0;
  std::vector<NodeStatus> status;
  std::vector<NodeId> sources;

  friend bool operator==(const ObservedCascade&, const ObservedCascade&) = default;
};

/// Observation mask: hidden nodes, plus the monitoring times (nullopt = every step).
struct MaskSpec {
  std::vector<NodeId> hidden;
  std::optional<std::vector<int>> snapshots;
};

/// The observed event as an activation window (lo, hi]. A window with
/// hi == horizon means "not active at lo", whatever happens afterwards.
/// Returns nullopt for hidden nodes and for Exact(0) (sources).
inline std::optional<std::pair<int, int>> activation_window(const NodeStatus& s, int horizon) {
  if (const auto* e = std::get_if<Exact>(&s)) {
    if (e->t == 0) return std::nullopt;
    return std::pair{e->t - 1, e->t};
  }
  if (std::holds_alternative<CensoredAtHorizon>(s)) return std::pair{horizon - 1, horizon};
  if (const auto* iv = std::get_if<Interval>(&s)) return std::pair{iv->lo, iv->hi};
  return std::nullopt;
}

inline bool is_consistent(const NodeStatus& s, int tau, int horizon) {
  if (const auto* e = std::get_if<Exact>(&s)) return tau == e->t;
  if (std::holds_alternative<CensoredAtHorizon>(s)) return tau == horizon;
  if (const auto* iv = std::get_if<Interval>(&s)) return tau > iv->lo && tau <= iv->hi;
  return true;
}

inline void validate_status(const NodeStatus& s, int horizon) {
  if (const auto* e = std::get_if<Exact>(&s)) {
    if (e->t < 0 || e->t >= horizon) throw RangeError("exact time " + std::to_string(e->t) + " outside [0, T)");
  } else if (const auto* iv = std::get_if<Interval>(&s)) {
    if (iv->lo < 0 || iv->lo >= iv->hi || iv->hi > horizon)
      throw RangeError("interval (" + std::to_string(iv->lo) + "," + std::to_string(iv->hi) + "] invalid for T=" +
                       std::to_string(horizon));
  }
}

// Every node activated strictly inside the window has an in-neighbor active
// at least one step earlier.
inline bool is_realizable(const Network& net, std::span<const int> tau, int horizon) {
  for (NodeId i = 0; i < net.node_count(); ++i) {
    if (tau[i] <= 0 || tau[i] >= horizon) continue;
    bool ok = false;
    for (EdgeId e : net.in_edges(i))
      if (tau[net.edge(e).src] <= tau[i] - 1) {
        ok = true;
        break;
      }
    if (!ok) return false;
  }
  return true;
}

/// Synchronous discrete-time SI cascade. An infected node k attempts each
/// susceptible out-neighbor j at every step t -> t+1 with probability
/// alpha_kj; draws are keyed by (step, edge) on `rng`.
inline Cascade simulate_cascade(const Network& net, const Couplings& couplings, std::span<const NodeId> sources,
                                int horizon, const CounterRng& rng) {
  if (sources.empty()) throw RangeError("empty source set");
  if (horizon < 1) throw RangeError("horizon must be positive");
  if (couplings.size() != net.edge_count()) throw RangeError("couplings size does not match edge count");
  const std::size_t n = net.node_count();
  Cascade c{horizon, std::vector<int>(n, horizon), {}};
  std::vector<NodeId> infected;
  for (NodeId s : sources) {
    if (s >= n) throw RangeError("source index " + std::to_string(s) + " out of range");
    if (c.tau[s] != 0) {
      c.tau[s] = 0;
      infected.push_back(s);
    }
  }
  c.sources.assign(infected.begin(), infected.end());
  std::sort(c.sources.begin(), c.sources.end());

  for (int t = 0; t + 1 < horizon; ++t) {
    const std::size_t active = infected.size();
    for (std::size_t a = 0; a < active; ++a) {
      const NodeId k = infected[a];
      for (EdgeId e : net.out_edges(k)) {
        const NodeId j = net.edge(e).dst;
        if (c.tau[j] <= t + 1) continue;  // already infected, or hit earlier this step
        if (rng.uniform(static_cast<std::uint64_t>(t), e) < couplings[e]) {
          c.tau[j] = t + 1;
          infected.push_back(j);
        }
      }
    }
  }
  return c;
}

struct FixedSources {
  std::vector<NodeId> nodes;
};
// One source drawn uniformly from `candidates` (all nodes when empty).
struct RandomSingleSource {
  std::vector<NodeId> candidates;
};
using SourcePolicy = std::variant<FixedSources, RandomSingleSource>;

// Counter slot reserved for the source draw, out of reach of any time step.
inline constexpr std::uint64_t kSourceDrawStep = std::numeric_limits<std::uint64_t>::max();

inline std::vector<Cascade> generate_dataset(const Network& net, const Couplings& couplings, std::size_t count,
                                             const SourcePolicy& policy, int horizon, std::uint64_t seed,
                                             std::size_t threads = 1) {
  if (count == 0) throw RangeError("cascade count must be at least 1");
  const CounterRng root(seed);
  std::vector<Cascade> out(count);
  parallel_for(count, threads, [&](std::size_t c) {
    const auto stream = root.substream(c);
    if (const auto* fixed = std::get_if<FixedSources>(&policy)) {
      out[c] = simulate_cascade(net, couplings, fixed->nodes, horizon, stream);
    } else {
      const auto& cand = std::get<RandomSingleSource>(policy).candidates;
      const std::size_t pool = cand.empty() ? net.node_count() : cand.size();
      if (pool == 0) throw RangeError("no source candidates");
      const auto pick = stream.below(pool, kSourceDrawStep, 0);
      const NodeId src = cand.empty() ? static_cast<NodeId>(pick) : cand[pick];
      out[c] = simulate_cascade(net, couplings, std::span<const NodeId>(&src, 1), horizon, stream);
    }
  });
  return out;
}

inline void validate_mask(const MaskSpec& mask, std::size_t node_count, int horizon) {
  for (NodeId h : mask.hidden)
    if (h >= node_count) throw RangeError("hidden node index " + std::to_string(h) + " out of range");
  if (mask.snapshots) {
    const auto& s = *mask.snapshots;
    for (std::size_t k = 0; k < s.size(); ++k) {
      if (s[k] < 0 || s[k] > horizon) throw RangeError("snapshot time " + std::to_string(s[k]) + " outside [0, T]");
      if (k > 0 && s[k] <= s[k - 1]) throw RangeError("snapshot times must be strictly increasing");
    }
  }
}

/// Applies hidden nodes and snapshot times to a ground-truth cascade. Sources
/// are copied as-is, even when hidden.
inline ObservedCascade apply_mask(const Cascade& cascade, const MaskSpec& mask) {
  const int T = cascade.horizon;
  const std::size_t n = cascade.tau.size();
  validate_mask(mask, n, T);
  ObservedCascade obs{T, std::vector<NodeStatus>(n), cascade.sources};
  std::vector<char> hidden(n, 0);
  for (NodeId h : mask.hidden) hidden[h] = 1;

  for (std::size_t i = 0; i < n; ++i) {
    const int tau = cascade.tau[i];
    if (hidden[i]) {
      obs.status[i] = Hidden{};
    } else if (tau == 0) {
      obs.status[i] = Exact{0};
    } else if (!mask.snapshots) {
      obs.status[i] = tau < T ? NodeStatus{Exact{tau}} : NodeStatus{CensoredAtHorizon{}};
    } else {
      const auto& snaps = *mask.snapshots;
      // lo: last snapshot before tau (0 when none); hi: first snapshot at or after tau.
      int lo = 0;
      int hi = T;
      for (int s : snaps) {
        if (s < tau) lo = std::max(lo, s);
        if (s >= tau && s < T) {
          hi = s;
          break;
        }
      }
      if (tau == T) hi = T;
      if (tau == T && lo == T - 1)
        obs.status[i] = CensoredAtHorizon{};
      else if (hi == lo + 1 && hi < T)
        obs.status[i] = Exact{hi};
      else
        obs.status[i] = Interval{lo, hi};
    }
  }
  return obs;
}

/// `count` distinct nodes drawn uniformly (partial Fisher-Yates), sorted.
inline std::vector<NodeId> select_hidden(std::size_t node_count, std::size_t count, std::uint64_t mask_seed) {
  if (count > node_count) throw RangeError("cannot hide more nodes than the network has");
  std::vector<NodeId> pool(node_count);
  for (std::size_t i = 0; i < node_count; ++i) pool[i] = static_cast<NodeId>(i);
  const CounterRng rng(mask_seed);
  for (std::size_t k = 0; k < count; ++k) {
    const auto j = k + rng.below(node_count - k, k, 0);
    std::swap(pool[k], pool[j]);
  }
  pool.resize(count);
  std::sort(pool.begin(), pool.end());
  return pool;
}

}  // namespace cascade_recon
