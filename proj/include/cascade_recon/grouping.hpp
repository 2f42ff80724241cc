#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <tuple>
#include <variant>
#include <vector>

#include "cascade_recon/cascade.hpp"
#include "cascade_recon/dmp.hpp"
#include "cascade_recon/errors.hpp"
#include "cascade_recon/network.hpp"

namespace cascade_recon {

struct CascadeGroup {
  std::vector<NodeId> sources;
  std::vector<std::size_t> members;  // indices into the dataset
};

// Checks shared horizon and node count, and that every source is observed at time 0.
inline void validate_dataset(std::span<const ObservedCascade> dataset, std::size_t node_count) {
  if (dataset.empty()) throw DatasetError("empty dataset");
  const int T = dataset.front().horizon;
  for (std::size_t c = 0; c < dataset.size(); ++c) {
    const auto& obs = dataset[c];
    const auto where = "cascade " + std::to_string(c);
    if (obs.horizon != T) throw DatasetError(where + ": horizon " + std::to_string(obs.horizon) + " differs from " + std::to_string(T));
    if (obs.status.size() != node_count) throw DatasetError(where + ": node count does not match the network");
    if (obs.sources.empty()) throw DatasetError(where + ": no observed source");
    for (NodeId s : obs.sources) {
      if (s >= node_count) throw DatasetError(where + ": source index out of range");
      const auto* e = std::get_if<Exact>(&obs.status[s]);
      if (!e || e->t != 0) throw DatasetError(where + ": source node " + std::to_string(s) + " is hidden or not observed at t=0");
    }
    for (std::size_t i = 0; i < node_count; ++i) {
      validate_status(obs.status[i], T);
      if (const auto* e = std::get_if<Exact>(&obs.status[i]); e && e->t == 0) {
        bool is_source = false;
        for (NodeId s : obs.sources) is_source |= s == i;
        if (!is_source) throw DatasetError(where + ": node " + std::to_string(i) + " active at t=0 but not a source");
      }
    }
  }
}

/// Partitions the dataset by source set; groups are ordered by source set.
inline std::vector<CascadeGroup> group_cascades(std::span<const ObservedCascade> dataset, std::size_t node_count) {
  validate_dataset(dataset, node_count);
  std::map<std::vector<NodeId>, std::vector<std::size_t>> by_sources;
  for (std::size_t c = 0; c < dataset.size(); ++c) by_sources[dataset[c].sources].push_back(c);
  std::vector<CascadeGroup> groups;
  groups.reserve(by_sources.size());
  for (auto& [src, members] : by_sources) groups.push_back({src, std::move(members)});
  return groups;
}

// count * -ln(P(activation in (lo, hi])) for one node.
struct WindowTerm {
  NodeId node = 0;
  int lo = 0;
  int hi = 0;
  double count = 0.0;
};

struct CompiledGroup {
  InitialCondition init;
  std::vector<WindowTerm> terms;
};

/// Dataset reduced to per-group histograms of observed activation windows.
struct CompiledDataset {
  int horizon = 0;
  std::size_t nodes = 0;
  std::size_t cascades = 0;
  std::vector<CompiledGroup> groups;
};

inline CompiledDataset compile_dataset(std::span<const ObservedCascade> dataset, std::size_t node_count) {
  const auto groups = group_cascades(dataset, node_count);
  CompiledDataset out{dataset.front().horizon, node_count, dataset.size(), {}};
  for (const auto& g : groups) {
    std::map<std::tuple<NodeId, int, int>, double> hist;
    for (std::size_t c : g.members) {
      const auto& obs = dataset[c];
      for (NodeId i = 0; i < node_count; ++i)
        if (const auto w = activation_window(obs.status[i], out.horizon)) hist[{i, w->first, w->second}] += 1.0;
    }
    CompiledGroup cg{InitialCondition::from_sources(node_count, g.sources), {}};
    cg.terms.reserve(hist.size());
    for (const auto& [key, count] : hist) cg.terms.push_back({std::get<0>(key), std::get<1>(key), std::get<2>(key), count});
    out.groups.push_back(std::move(cg));
  }
  return out;
}

}  // namespace cascade_recon
