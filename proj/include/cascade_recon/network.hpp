#pragma once

#include <algorithm>
#include <compare>
#include <cstdint>
#include <istream>
#include <iterator>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "cascade_recon/errors.hpp"
#include "cascade_recon/text.hpp"

namespace cascade_recon {

using NodeId = std::uint32_t;
using EdgeId = std::uint32_t;

struct Edge {
  NodeId src = 0;
  NodeId dst = 0;
  friend auto operator<=>(const Edge&, const Edge&) = default;
};

enum class Direction { in, out };

// Canonical label order: labels that are unsigned integers sort numerically
// and come first, everything else follows in byte order.
inline bool label_less(std::string_view a, std::string_view b) {
  const bool ia = text::is_unsigned_integer(a);
  const bool ib = text::is_unsigned_integer(b);
  if (ia != ib) return ia;
  if (ia) {
    const auto strip = [](std::string_view s) {
      const auto p = s.find_first_not_of('0');
      return p == std::string_view::npos ? std::string_view("0") : s.substr(p);
    };
    const auto sa = strip(a), sb = strip(b);
    if (sa.size() != sb.size()) return sa.size() < sb.size();
    if (sa != sb) return sa < sb;
    return a < b;
  }
  return a < b;
}

/// Immutable directed graph with dense node and edge indices.
///
/// Nodes are indexed by their rank in `label_less` order; edges are indexed
/// by lexicographic (src, dst) order, so edge ids increase with the pair.
class Network {
 public:
  Network() = default;

  // Nodes "0".."n-1", no isolated-node restriction.
  static Network from_edges(std::size_t node_count, std::vector<Edge> edges) {
    std::vector<std::string> labels(node_count);
    for (std::size_t i = 0; i < node_count; ++i) labels[i] = std::to_string(i);
    return Network(std::move(labels), std::move(edges));
  }

  // Labels may appear in any order; isolated nodes may be listed in `extra_nodes`.
  static Network from_labeled_edges(const std::vector<std::pair<std::string, std::string>>& edges,
                                    const std::vector<std::string>& extra_nodes = {}) {
    std::vector<std::string> labels;
    labels.reserve(2 * edges.size() + extra_nodes.size());
    for (const auto& [s, d] : edges) {
      labels.push_back(s);
      labels.push_back(d);
    }
    labels.insert(labels.end(), extra_nodes.begin(), extra_nodes.end());
    std::sort(labels.begin(), labels.end(), [](const auto& a, const auto& b) { return label_less(a, b); });
    labels.erase(std::unique(labels.begin(), labels.end()), labels.end());

    std::unordered_map<std::string, NodeId> index;
    for (std::size_t i = 0; i < labels.size(); ++i) index.emplace(labels[i], static_cast<NodeId>(i));
    std::vector<Edge> dense;
    dense.reserve(edges.size());
    for (const auto& [s, d] : edges) dense.push_back({index.at(s), index.at(d)});
    return Network(std::move(labels), std::move(dense));
  }

  std::size_t node_count() const { return labels_.size(); }
  std::size_t edge_count() const { return edges_.size(); }

  const std::vector<std::string>& labels() const { return labels_; }
  const std::string& label(NodeId i) const { return labels_.at(i); }

  std::optional<NodeId> find_node(std::string_view label) const {
    const auto it = index_.find(std::string(label));
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  NodeId node_or_throw(std::string_view label) const {
    if (auto i = find_node(label)) return *i;
    throw RangeError("unknown node label '" + std::string(label) + "'");
  }

  const std::vector<Edge>& edges() const { return edges_; }
  const Edge& edge(EdgeId e) const { return edges_.at(e); }

  std::optional<EdgeId> edge_id(NodeId src, NodeId dst) const {
    const Edge key{src, dst};
    const auto it = std::lower_bound(edges_.begin(), edges_.end(), key);
    if (it == edges_.end() || *it != key) return std::nullopt;
    return static_cast<EdgeId>(it - edges_.begin());
  }

  // Edge ids (k -> i), ordered by k.
  std::span<const EdgeId> in_edges(NodeId i) const {
    return {in_edges_.data() + in_offsets_[i], in_offsets_[i + 1] - in_offsets_[i]};
  }
  // Edge ids (i -> j), ordered by j.
  std::span<const EdgeId> out_edges(NodeId i) const {
    return {out_edges_.data() + out_offsets_[i], out_offsets_[i + 1] - out_offsets_[i]};
  }

  std::vector<NodeId> neighbors(NodeId i, Direction direction) const {
    if (i >= node_count()) throw RangeError("node index " + std::to_string(i) + " out of range");
    std::vector<NodeId> out;
    if (direction == Direction::in) {
      for (EdgeId e : in_edges(i)) out.push_back(edges_[e].src);
    } else {
      for (EdgeId e : out_edges(i)) out.push_back(edges_[e].dst);
    }
    return out;
  }

  friend bool operator==(const Network& a, const Network& b) {
    return a.labels_ == b.labels_ && a.edges_ == b.edges_;
  }

 private:
  Network(std::vector<std::string> labels, std::vector<Edge> edges)
      : labels_(std::move(labels)), edges_(std::move(edges)) {
    const std::size_t n = labels_.size();
    for (std::size_t i = 0; i < n; ++i) index_.emplace(labels_[i], static_cast<NodeId>(i));
    for (const auto& e : edges_) {
      if (e.src >= n || e.dst >= n) throw RangeError("edge endpoint out of range");
      if (e.src == e.dst) throw ParseError("self-loop on node '" + labels_[e.src] + "'");
    }
    std::sort(edges_.begin(), edges_.end());
    for (std::size_t k = 1; k < edges_.size(); ++k)
      if (edges_[k] == edges_[k - 1])
        throw ParseError("duplicate edge " + labels_[edges_[k].src] + " -> " + labels_[edges_[k].dst]);

    in_offsets_.assign(n + 1, 0);
    out_offsets_.assign(n + 1, 0);
    for (const auto& e : edges_) {
      ++in_offsets_[e.dst + 1];
      ++out_offsets_[e.src + 1];
    }
    for (std::size_t i = 0; i < n; ++i) {
      in_offsets_[i + 1] += in_offsets_[i];
      out_offsets_[i + 1] += out_offsets_[i];
    }
    in_edges_.resize(edges_.size());
    out_edges_.resize(edges_.size());
    auto in_fill = in_offsets_, out_fill = out_offsets_;
    for (std::size_t k = 0; k < edges_.size(); ++k) {
      in_edges_[in_fill[edges_[k].dst]++] = static_cast<EdgeId>(k);
      out_edges_[out_fill[edges_[k].src]++] = static_cast<EdgeId>(k);
    }
  }

  std::vector<std::string> labels_;
  std::unordered_map<std::string, NodeId> index_;
  std::vector<Edge> edges_;
  std::vector<std::size_t> in_offsets_{0}, out_offsets_{0};
  std::vector<EdgeId> in_edges_, out_edges_;
};

/// Transmission probabilities indexed by edge id.
class Couplings {
 public:
  Couplings() = default;
  explicit Couplings(std::vector<double> values) : values_(std::move(values)) {
    for (std::size_t e = 0; e < values_.size(); ++e)
      if (!(values_[e] >= 0.0 && values_[e] <= 1.0))
        throw RangeError("coupling on edge " + std::to_string(e) + " outside [0,1]");
  }
  static Couplings constant(std::size_t edge_count, double value) {
    return Couplings(std::vector<double>(edge_count, value));
  }

  std::size_t size() const { return values_.size(); }
  double operator[](EdgeId e) const { return values_[e]; }
  std::span<const double> values() const { return values_; }

  friend bool operator==(const Couplings&, const Couplings&) = default;

 private:
  std::vector<double> values_;
};

struct EdgeList {
  Network network;
  std::optional<Couplings> couplings;
};

/// Reads the tab-separated edge list format: `src dst [alpha]` per line,
/// `#` comments and blank lines ignored. The third column must be present on
/// all edge lines or on none.
inline EdgeList parse_edge_list(std::istream& in) {
  std::vector<std::pair<std::string, std::string>> pairs;
  std::vector<double> alphas;
  std::optional<bool> with_alpha;
  std::string line;
  std::size_t line_no = 0;
  std::unordered_map<std::string, std::size_t> seen;  // "src\tdst" -> line
  while (std::getline(in, line)) {
    ++line_no;
    const auto body = text::trim(line);
    if (body.empty() || body.front() == '#') continue;
    const auto fields = text::split_ws(body);
    const auto where = "line " + std::to_string(line_no);
    if (fields.size() != 2 && fields.size() != 3)
      throw ParseError(where + ": expected 2 or 3 columns, got " + std::to_string(fields.size()));
    const bool has_alpha = fields.size() == 3;
    if (with_alpha && *with_alpha != has_alpha)
      throw ParseError(where + ": coupling column present on some lines but not others");
    with_alpha = has_alpha;

    std::string src(fields[0]), dst(fields[1]);
    if (src == dst) throw ParseError(where + ": self-loop on node '" + src + "'");
    const auto [it, fresh] = seen.emplace(src + '\t' + dst, line_no);
    if (!fresh)
      throw ParseError(where + ": duplicate edge " + src + " -> " + dst + " (first on line " +
                       std::to_string(it->second) + ")");
    if (has_alpha) {
      const auto a = text::parse_double(fields[2]);
      if (!a) throw ParseError(where + ": cannot parse coupling '" + std::string(fields[2]) + "'");
      if (*a < 0.0 || *a > 1.0) throw RangeError(where + ": coupling " + std::string(fields[2]) + " outside [0,1]");
      alphas.push_back(*a);
    }
    pairs.emplace_back(std::move(src), std::move(dst));
  }
  if (pairs.empty()) throw ParseError("empty network: no edges found");

  EdgeList result{Network::from_labeled_edges(pairs), std::nullopt};
  if (*with_alpha) {
    std::vector<double> values(pairs.size());
    const auto& net = result.network;
    for (std::size_t k = 0; k < pairs.size(); ++k) {
      const auto e = net.edge_id(*net.find_node(pairs[k].first), *net.find_node(pairs[k].second));
      values[*e] = alphas[k];
    }
    result.couplings = Couplings(std::move(values));
  }
  return result;
}

inline EdgeList parse_edge_list(std::string_view text_in) {
  std::istringstream in{std::string(text_in)};
  return parse_edge_list(in);
}

inline std::string serialize_edge_list(const Network& net, const Couplings* couplings = nullptr) {
  if (couplings && couplings->size() != net.edge_count())
    throw RangeError("couplings size does not match edge count");
  std::string out;
  for (EdgeId e = 0; e < net.edge_count(); ++e) {
    const auto& edge = net.edge(e);
    out += net.label(edge.src);
    out += '\t';
    out += net.label(edge.dst);
    if (couplings) {
      out += '\t';
      out += text::format_double((*couplings)[e]);
    }
    out += '\n';
  }
  return out;
}

inline std::vector<NodeId> neighbors(const Network& net, NodeId i, Direction direction) {
  return net.neighbors(i, direction);
}

}  // namespace cascade_recon
