#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "cascade_recon/cascade.hpp"
#include "cascade_recon/errors.hpp"
#include "cascade_recon/grouping.hpp"
#include "cascade_recon/network.hpp"
#include "cascade_recon/optimize.hpp"
#include "cascade_recon/parallel.hpp"
#include "cascade_recon/reconstruct.hpp"
#include "cascade_recon/rng.hpp"

namespace cascade_recon {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

/// Exact log-likelihood of a complete cascade given the initial condition.
/// Sources contribute nothing; unrealizable cascades give -inf.
inline double full_log_likelihood(std::span<const int> tau, int horizon, const Network& net,
                                  const Couplings& couplings) {
  if (tau.size() != net.node_count()) throw RangeError("cascade length does not match the network");
  double ll = 0.0;
  for (NodeId i = 0; i < net.node_count(); ++i) {
    const int ti = tau[i];
    if (ti == 0) continue;
    double escape = 1.0;  // no transmission at step ti-1 -> ti
    for (EdgeId e : net.in_edges(i)) {
      const int tk = tau[net.edge(e).src];
      const double a = couplings[e];
      // Failed attempts at steps t' = tk .. ti-2.
      if (tk <= ti - 2) {
        if (a >= 1.0) return kNegInf;
        ll += static_cast<double>(ti - 1 - tk) * std::log1p(-a);
      }
      if (tk <= ti - 1) escape *= 1.0 - a;
    }
    if (ti < horizon) {
      const double p = 1.0 - escape;
      if (!(p > 0.0)) return kNegInf;
      ll += std::log(p);
    }
  }
  return ll;
}

inline double full_log_likelihood(const Cascade& cascade, const Network& net, const Couplings& couplings) {
  return full_log_likelihood(cascade.tau, cascade.horizon, net, couplings);
}

inline Cascade to_complete(const ObservedCascade& obs) {
  Cascade c{obs.horizon, std::vector<int>(obs.status.size()), obs.sources};
  for (std::size_t i = 0; i < obs.status.size(); ++i) {
    if (const auto* e = std::get_if<Exact>(&obs.status[i]))
      c.tau[i] = e->t;
    else if (std::holds_alternative<CensoredAtHorizon>(obs.status[i]))
      c.tau[i] = obs.horizon;
    else
      throw DatasetError("cascade has hidden or interval-censored entries; complete data required");
  }
  return c;
}

inline double full_log_likelihood(const ObservedCascade& observed, const Network& net, const Couplings& couplings) {
  return full_log_likelihood(to_complete(observed), net, couplings);
}

namespace detail {

// Sufficient statistics of the per-node likelihood of complete cascades.
struct NodeLikelihood {
  NodeId node = 0;
  std::vector<EdgeId> in;               // in-edges of the node
  std::vector<double> exposure;         // failed attempts per in-edge
  std::vector<std::pair<std::vector<std::uint32_t>, double>> activations;  // active in-edge positions, count

  double value(std::span<const double> a) const {
    double f = 0.0;
    for (std::size_t j = 0; j < in.size(); ++j)
      if (exposure[j] > 0.0) f -= exposure[j] * std::log1p(-a[j]);
    for (const auto& [set, count] : activations) {
      double escape = 1.0;
      for (auto j : set) escape *= 1.0 - a[j];
      f -= count * std::log(std::max(1.0 - escape, kLogFloor));
    }
    return f;
  }

  void gradient(std::span<const double> a, std::span<double> g) const {
    for (std::size_t j = 0; j < in.size(); ++j) g[j] = exposure[j] / (1.0 - a[j]);
    for (const auto& [set, count] : activations) {
      double escape = 1.0;
      for (auto j : set) escape *= 1.0 - a[j];
      const double denom = std::max(1.0 - escape, kLogFloor);
      for (std::size_t u = 0; u < set.size(); ++u) {
        double others = 1.0;
        for (std::size_t v = 0; v < set.size(); ++v)
          if (v != u) others *= 1.0 - a[set[v]];
        g[set[u]] -= count * others / denom;
      }
    }
  }
};

inline std::vector<NodeLikelihood> node_likelihoods(std::span<const Cascade> cascades, const Network& net) {
  std::vector<NodeLikelihood> nodes(net.node_count());
  std::vector<std::map<std::vector<std::uint32_t>, double>> sets(net.node_count());
  for (NodeId i = 0; i < net.node_count(); ++i) {
    nodes[i].node = i;
    const auto in = net.in_edges(i);
    nodes[i].in.assign(in.begin(), in.end());
    nodes[i].exposure.assign(in.size(), 0.0);
  }
  for (std::size_t c = 0; c < cascades.size(); ++c) {
    const auto& cas = cascades[c];
    if (cas.tau.size() != net.node_count()) throw DatasetError("cascade length does not match the network");
    if (cas.horizon != cascades.front().horizon) throw DatasetError("cascades have different horizons");
    for (NodeId i = 0; i < net.node_count(); ++i) {
      const int ti = cas.tau[i];
      if (ti == 0) continue;
      auto& nl = nodes[i];
      std::vector<std::uint32_t> active;
      for (std::uint32_t j = 0; j < nl.in.size(); ++j) {
        const int tk = cas.tau[net.edge(nl.in[j]).src];
        if (tk <= ti - 2) nl.exposure[j] += ti - 1 - tk;
        if (tk <= ti - 1) active.push_back(j);
      }
      if (ti < cas.horizon) {
        if (active.empty())
          throw DatasetError("cascade " + std::to_string(c) + " is not realizable at node " + net.label(i));
        sets[i][active] += 1.0;
      }
    }
  }
  for (NodeId i = 0; i < net.node_count(); ++i)
    nodes[i].activations.assign(sets[i].begin(), sets[i].end());
  return nodes;
}

}  // namespace detail

/// Full-information maximum likelihood, solved independently per node on its
/// in-coupling block. Edges flagged in `frozen` keep alpha_init.
inline FitResult netrate_fit(std::span<const Cascade> cascades, const Network& net, const FitConfig& config,
                             std::span<const char> frozen = {}) {
  config.validate();
  if (cascades.empty()) throw DatasetError("empty dataset");
  const auto start = std::chrono::steady_clock::now();
  const auto blocks = detail::node_likelihoods(cascades, net);
  std::vector<double> alpha(net.edge_count(), config.alpha_init);
  std::vector<OptimizeResult> results(blocks.size());
  FitConfig local = config;
  local.threads = 1;

  parallel_for(blocks.size(), config.threads, [&](std::size_t b) {
    const auto& nl = blocks[b];
    if (nl.in.empty()) return;
    std::vector<char> block_frozen(nl.in.size(), 0);
    if (!frozen.empty())
      for (std::size_t j = 0; j < nl.in.size(); ++j) block_frozen[j] = frozen[nl.in[j]];
    const auto value = [&](const std::vector<double>& a) { return nl.value(a); };
    const auto value_grad = [&](const std::vector<double>& a, std::vector<double>& g) { nl.gradient(a, g); };
    results[b] = projected_gradient_descent(value, value_grad, std::vector<double>(nl.in.size(), config.alpha_init),
                                            config.alpha_min, config.alpha_max, local, block_frozen);
  });

  FitResult out;
  std::size_t longest = 0;
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    for (std::size_t j = 0; j < blocks[b].in.size(); ++j) alpha[blocks[b].in[j]] = results[b].x[j];
    longest = std::max(longest, results[b].history.size());
    out.iterations = std::max(out.iterations, results[b].iterations);
  }
  // Total objective per iteration, each block frozen at its final value once done.
  out.converged = true;
  for (std::size_t k = 0; k < longest; ++k) {
    IterationRecord rec{static_cast<int>(k), 0.0, 0.0, 0.0};
    for (const auto& r : results) {
      if (r.history.empty()) continue;
      const auto& h = r.history[std::min(k, r.history.size() - 1)];
      rec.value += h.value;
      rec.grad_inf_norm = std::max(rec.grad_inf_norm, h.grad_inf_norm);
      if (k < r.history.size()) rec.step = std::max(rec.step, h.step);
    }
    out.history.push_back(rec);
    out.free_energy_trajectory.push_back(rec.value);
  }
  for (const auto& r : results)
    if (!r.history.empty()) out.converged = out.converged && r.converged;
  out.couplings = Couplings(std::move(alpha));
  out.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

inline FitResult netrate_fit(std::span<const ObservedCascade> dataset, const Network& net, const FitConfig& config) {
  std::vector<Cascade> complete;
  complete.reserve(dataset.size());
  for (const auto& obs : dataset) complete.push_back(to_complete(obs));
  return netrate_fit(complete, net, config);
}

inline constexpr double kMaxMarginalizedStates = 1e6;

/// Log-probability of the observations, summing the exact likelihood over
/// every completion of hidden and interval-censored activation times.
inline double marginalized_likelihood(const ObservedCascade& observed, const Network& net, const Couplings& couplings) {
  const std::size_t N = net.node_count();
  if (observed.status.size() != N) throw RangeError("cascade length does not match the network");
  const int T = observed.horizon;
  std::vector<int> tau(N, 0);
  std::vector<NodeId> free_nodes;
  std::vector<std::pair<int, int>> range;  // inclusive
  std::vector<char> is_source(N, 0);
  for (NodeId s : observed.sources) is_source[s] = 1;
  double states = 1.0;
  for (NodeId i = 0; i < N; ++i) {
    const auto& s = observed.status[i];
    if (std::holds_alternative<Hidden>(s)) {
      if (is_source[i]) throw DatasetError("source node " + net.label(i) + " is hidden");
      free_nodes.push_back(i);
      range.emplace_back(1, T);
      states *= T;
    } else if (const auto* iv = std::get_if<Interval>(&s)) {
      free_nodes.push_back(i);
      range.emplace_back(iv->lo + 1, iv->hi);
      states *= iv->hi - iv->lo;
    } else if (const auto* e = std::get_if<Exact>(&s)) {
      tau[i] = e->t;
    } else {
      tau[i] = T;
    }
  }
  if (states > kMaxMarginalizedStates)
    throw CapacityError("marginalized likelihood would enumerate " + std::to_string(states) +
                        " completions (limit 1e6); use the HTS heuristic instead");

  for (std::size_t k = 0; k < free_nodes.size(); ++k) tau[free_nodes[k]] = range[k].first;
  double max_ll = kNegInf, scaled_sum = 0.0;
  for (;;) {
    const double ll = full_log_likelihood(tau, T, net, couplings);
    if (ll > kNegInf) {
      if (ll > max_ll) {
        scaled_sum = scaled_sum * std::exp(max_ll - ll) + 1.0;
        max_ll = ll;
      } else {
        scaled_sum += std::exp(ll - max_ll);
      }
    }
    std::size_t k = 0;
    for (; k < free_nodes.size(); ++k) {
      auto& t = tau[free_nodes[k]];
      if (t < range[k].second) {
        ++t;
        break;
      }
      t = range[k].first;
    }
    if (k == free_nodes.size()) break;
  }
  return max_ll == kNegInf ? kNegInf : max_ll + std::log(scaled_sum);
}

struct HtsConfig {
  std::size_t samples = 1000;  // auxiliary cascades per observed cascade
  int outer_rounds = 10;
  double param_tol = 1e-3;     // stop when no coupling moves more than this between rounds
  std::uint64_t seed = 0;
  FitConfig inner;
  std::size_t threads = 1;

  void validate() const {
    if (samples < 1) throw RangeError("HTS needs at least one auxiliary sample");
    if (outer_rounds < 1) throw RangeError("HTS needs at least one round");
    inner.validate();
  }
};

/// Imputed activation times for the hidden and interval-censored nodes of one cascade.
struct Completion {
  std::vector<std::pair<NodeId, int>> imputed;
  bool fallback = false;  // no auxiliary sample matched the observations
};

inline Cascade apply_completion(const ObservedCascade& obs, const Completion& completion) {
  Cascade c{obs.horizon, std::vector<int>(obs.status.size(), obs.horizon), obs.sources};
  for (std::size_t i = 0; i < obs.status.size(); ++i)
    if (const auto* e = std::get_if<Exact>(&obs.status[i])) c.tau[i] = e->t;
  for (const auto& [node, t] : completion.imputed) c.tau[node] = t;
  return c;
}

namespace detail {

// Earliest activation times for free nodes compatible with the fixed ones;
// always realizable when the observations came from a real cascade.
inline std::vector<int> earliest_completion(const ObservedCascade& obs, const Network& net,
                                            std::span<const NodeId> free_nodes) {
  const int T = obs.horizon;
  std::vector<int> tau(obs.status.size(), T);
  for (std::size_t i = 0; i < obs.status.size(); ++i)
    if (const auto* e = std::get_if<Exact>(&obs.status[i])) tau[i] = e->t;
  for (NodeId h : free_nodes)
    if (const auto* iv = std::get_if<Interval>(&obs.status[h])) tau[h] = iv->hi;
  for (bool changed = true; changed;) {
    changed = false;
    for (NodeId h : free_nodes) {
      int earliest = T;
      for (EdgeId e : net.in_edges(h)) earliest = std::min(earliest, tau[net.edge(e).src] + 1);
      int t = earliest;
      if (const auto* iv = std::get_if<Interval>(&obs.status[h])) t = std::clamp(earliest, iv->lo + 1, iv->hi);
      if (t < tau[h]) {
        tau[h] = t;
        changed = true;
      }
    }
  }
  return tau;
}

}  // namespace detail

/// Monte Carlo completion: for each cascade, draw `samples` auxiliary cascades
/// from its sources under `couplings`, keep those matching every observation,
/// and impute the times of the most likely one. Sample streams depend only on
/// (seed, cascade index, sample index).
inline std::vector<Completion> hts_complete(std::span<const ObservedCascade> dataset, const Network& net,
                                            const Couplings& couplings, const HtsConfig& config) {
  config.validate();
  validate_dataset(dataset, net.node_count());
  const CounterRng root(config.seed);
  std::vector<Completion> out(dataset.size());
  parallel_for(dataset.size(), config.threads, [&](std::size_t c) {
    const auto& obs = dataset[c];
    const int T = obs.horizon;
    std::vector<NodeId> free_nodes;
    for (NodeId i = 0; i < obs.status.size(); ++i)
      if (std::holds_alternative<Hidden>(obs.status[i]) || std::holds_alternative<Interval>(obs.status[i]))
        free_nodes.push_back(i);
    if (free_nodes.empty()) return;

    const auto stream = root.substream(c);
    double best_ll = kNegInf;
    std::vector<int> best;
    std::size_t fewest_violations = std::numeric_limits<std::size_t>::max();
    std::vector<int> closest;
    for (std::size_t s = 0; s < config.samples; ++s) {
      auto sample = simulate_cascade(net, couplings, obs.sources, T, stream.substream(s));
      std::size_t violations = 0;
      for (NodeId i = 0; i < obs.status.size(); ++i) violations += !is_consistent(obs.status[i], sample.tau[i], T);
      if (violations == 0) {
        const double ll = full_log_likelihood(sample, net, couplings);
        if (best.empty() || ll > best_ll) {
          best_ll = ll;
          best = std::move(sample.tau);
        }
      } else if (best.empty() && violations < fewest_violations) {
        fewest_violations = violations;
        closest = std::move(sample.tau);
      }
    }

    Completion comp;
    if (best.empty()) {
      // Fixed nodes from the observations, free nodes from the closest sample
      // (clamped into their windows); repaired if that is not realizable.
      comp.fallback = true;
      Completion trial;
      for (NodeId h : free_nodes) {
        int t = closest.empty() ? T : closest[h];
        if (const auto* iv = std::get_if<Interval>(&obs.status[h])) t = std::clamp(t, iv->lo + 1, iv->hi);
        trial.imputed.emplace_back(h, t);
      }
      const auto candidate = apply_completion(obs, trial);
      if (is_realizable(net, candidate.tau, T)) {
        best = candidate.tau;
      } else {
        best = detail::earliest_completion(obs, net, free_nodes);
      }
    }
    for (NodeId h : free_nodes) comp.imputed.emplace_back(h, best[h]);
    out[c] = std::move(comp);
  });
  return out;
}

/// Heuristic two-stage fit: alternate Monte Carlo completion of the missing
/// times and full-information maximum likelihood on the completed data.
/// In-edges of always-hidden leaves are not fitted and keep alpha_init.
inline FitResult hts_fit(std::span<const ObservedCascade> dataset, const Network& net, const HtsConfig& config) {
  config.validate();
  validate_dataset(dataset, net.node_count());
  const auto start = std::chrono::steady_clock::now();

  const MaskSpec hidden_mask{always_hidden_nodes(dataset, net.node_count()), std::nullopt};
  std::vector<char> frozen(net.edge_count(), 1);
  for (EdgeId e : identifiable_edges(net, hidden_mask)) frozen[e] = 0;

  FitConfig inner = config.inner;
  inner.threads = config.threads;
  HtsConfig complete_cfg = config;

  Couplings alpha = Couplings::constant(net.edge_count(), config.inner.alpha_init);
  FitResult out;
  out.couplings = alpha;
  for (int round = 1; round <= config.outer_rounds; ++round) {
    const auto completions = hts_complete(dataset, net, alpha, complete_cfg);
    std::vector<Cascade> completed;
    completed.reserve(dataset.size());
    for (std::size_t c = 0; c < dataset.size(); ++c) completed.push_back(apply_completion(dataset[c], completions[c]));

    auto fit = netrate_fit(completed, net, inner, frozen);
    double change = 0.0;
    for (EdgeId e = 0; e < net.edge_count(); ++e) change = std::max(change, std::abs(fit.couplings[e] - alpha[e]));
    alpha = fit.couplings;
    const double nll = fit.free_energy_trajectory.empty() ? 0.0 : fit.free_energy_trajectory.back();
    out.history.push_back({round, nll, 0.0, change});
    out.free_energy_trajectory.push_back(nll);
    out.iterations = round;
    if (change < config.param_tol) {
      out.converged = true;
      break;
    }
  }
  out.couplings = alpha;
  out.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

}  // namespace cascade_recon
