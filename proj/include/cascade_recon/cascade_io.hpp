#pragma once

#include <cstdint>
#include <istream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "cascade_recon/cascade.hpp"
#include "cascade_recon/errors.hpp"
#include "cascade_recon/network.hpp"
#include "cascade_recon/text.hpp"

namespace cascade_recon {

// Cascade files:
//   T=<int>
//   <id>\t<label>:<t>,<label>:<T>+,<label>:(<lo>,<hi>],...
// Nodes missing from a record are hidden.

inline std::string format_status_token(const std::string& label, const NodeStatus& s, int horizon) {
  if (const auto* e = std::get_if<Exact>(&s)) return label + ':' + std::to_string(e->t);
  if (std::holds_alternative<CensoredAtHorizon>(s)) return label + ':' + std::to_string(horizon) + '+';
  if (const auto* iv = std::get_if<Interval>(&s))
    return label + ":(" + std::to_string(iv->lo) + ',' + std::to_string(iv->hi) + ']';
  return {};
}

inline std::string serialize_observed_cascades(const Network& net, const std::vector<ObservedCascade>& cascades) {
  if (cascades.empty()) throw DatasetError("no cascades to write");
  const int T = cascades.front().horizon;
  std::string out = "T=" + std::to_string(T) + '\n';
  for (std::size_t c = 0; c < cascades.size(); ++c) {
    const auto& obs = cascades[c];
    if (obs.horizon != T) throw DatasetError("cascades with different horizons cannot share a file");
    out += std::to_string(c);
    out += '\t';
    bool first = true;
    for (NodeId i = 0; i < obs.status.size(); ++i) {
      if (std::holds_alternative<Hidden>(obs.status[i])) continue;
      if (!first) out += ',';
      out += format_status_token(net.label(i), obs.status[i], T);
      first = false;
    }
    out += '\n';
  }
  return out;
}

inline ObservedCascade to_observed(const Cascade& c) {
  ObservedCascade obs{c.horizon, std::vector<NodeStatus>(c.tau.size()), c.sources};
  for (std::size_t i = 0; i < c.tau.size(); ++i)
    obs.status[i] = c.tau[i] < c.horizon ? NodeStatus{Exact{c.tau[i]}} : NodeStatus{CensoredAtHorizon{}};
  return obs;
}

inline std::string serialize_cascades(const Network& net, const std::vector<Cascade>& cascades) {
  std::vector<ObservedCascade> obs;
  obs.reserve(cascades.size());
  for (const auto& c : cascades) obs.push_back(to_observed(c));
  return serialize_observed_cascades(net, obs);
}

namespace detail {

// Splits a record on commas that are not inside "(...]".
inline std::vector<std::string_view> split_tokens(std::string_view s) {
  std::vector<std::string_view> out;
  int depth = 0;
  std::size_t start = 0;
  for (std::size_t k = 0; k < s.size(); ++k) {
    if (s[k] == '(') ++depth;
    if (s[k] == ']' && depth > 0) --depth;
    if (s[k] == ',' && depth == 0) {
      out.push_back(s.substr(start, k - start));
      start = k + 1;
    }
  }
  if (start < s.size()) out.push_back(s.substr(start));
  return out;
}

inline NodeStatus parse_status(std::string_view v, int horizon, const std::string& where) {
  const auto bad = [&] { return ParseError(where + ": cannot parse time '" + std::string(v) + "'"); };
  if (v.empty()) throw bad();
  if (v.front() == '(') {
    if (v.back() != ']') throw bad();
    const auto parts = text::split(v.substr(1, v.size() - 2), ',');
    if (parts.size() != 2) throw bad();
    const auto lo = text::parse_int<int>(text::trim(parts[0]));
    const auto hi = text::parse_int<int>(text::trim(parts[1]));
    if (!lo || !hi) throw bad();
    return Interval{*lo, *hi};
  }
  if (v.back() == '+') {
    const auto head = v.substr(0, v.size() - 1);
    if (head == "T") return CensoredAtHorizon{};
    const auto t = text::parse_int<int>(head);
    if (!t || *t != horizon) throw ParseError(where + ": censoring token must name the horizon T=" + std::to_string(horizon));
    return CensoredAtHorizon{};
  }
  const auto t = text::parse_int<int>(v);
  if (!t) throw bad();
  if (*t == horizon) return CensoredAtHorizon{};
  return Exact{*t};
}

}  // namespace detail

struct ObservedDataset {
  int horizon = 0;
  std::vector<ObservedCascade> cascades;
};

/// Parses an observed cascade file. The source set of each record is the set
/// of nodes observed at time 0.
inline ObservedDataset parse_observed_cascades(std::istream& in, const Network& net) {
  ObservedDataset ds;
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    const auto body = text::trim(line);
    if (body.empty() || body.front() == '#') continue;
    const auto where = "line " + std::to_string(line_no);
    if (!have_header) {
      if (body.substr(0, 2) != "T=") throw ParseError(where + ": expected 'T=<int>' header");
      const auto T = text::parse_int<int>(text::trim(body.substr(2)));
      if (!T || *T < 1) throw ParseError(where + ": invalid horizon");
      ds.horizon = *T;
      have_header = true;
      continue;
    }
    const auto tab = body.find('\t');
    const auto id = text::trim(body.substr(0, tab == std::string_view::npos ? body.size() : tab));
    if (!text::parse_int<long long>(id)) throw ParseError(where + ": missing cascade id");
    const auto rest = tab == std::string_view::npos ? std::string_view{} : text::trim(body.substr(tab + 1));

    ObservedCascade obs{ds.horizon, std::vector<NodeStatus>(net.node_count(), Hidden{}), {}};
    std::vector<char> seen(net.node_count(), 0);
    for (auto token : detail::split_tokens(rest)) {
      token = text::trim(token);
      if (token.empty()) continue;
      const auto colon = token.find(':');
      if (colon == std::string_view::npos) throw ParseError(where + ": token '" + std::string(token) + "' lacks ':'");
      const auto label = token.substr(0, colon);
      const auto node = net.find_node(label);
      if (!node) throw ParseError(where + ": unknown node '" + std::string(label) + "'");
      if (seen[*node]) throw ParseError(where + ": node '" + std::string(label) + "' listed twice");
      seen[*node] = 1;
      obs.status[*node] = detail::parse_status(token.substr(colon + 1), ds.horizon, where);
      try {
        validate_status(obs.status[*node], ds.horizon);
      } catch (const RangeError& e) {
        throw ParseError(where + ": " + e.what());
      }
      if (const auto* e = std::get_if<Exact>(&obs.status[*node]); e && e->t == 0) obs.sources.push_back(*node);
    }
    std::sort(obs.sources.begin(), obs.sources.end());
    ds.cascades.push_back(std::move(obs));
  }
  if (!have_header) throw ParseError("cascade file is empty (missing 'T=<int>' header)");
  return ds;
}

/// Ground-truth cascades: every node listed, exact or censored only.
inline std::vector<Cascade> parse_cascades(std::istream& in, const Network& net) {
  const auto ds = parse_observed_cascades(in, net);
  std::vector<Cascade> out;
  out.reserve(ds.cascades.size());
  for (std::size_t c = 0; c < ds.cascades.size(); ++c) {
    const auto& obs = ds.cascades[c];
    Cascade cas{ds.horizon, std::vector<int>(net.node_count()), obs.sources};
    for (std::size_t i = 0; i < obs.status.size(); ++i) {
      const auto& s = obs.status[i];
      if (const auto* e = std::get_if<Exact>(&s))
        cas.tau[i] = e->t;
      else if (std::holds_alternative<CensoredAtHorizon>(s))
        cas.tau[i] = ds.horizon;
      else
        throw ParseError("cascade " + std::to_string(c) + ": ground truth must give an exact or censored time for node '" +
                         net.label(static_cast<NodeId>(i)) + "'");
    }
    if (cas.sources.empty()) throw ParseError("cascade " + std::to_string(c) + " has no source");
    out.push_back(std::move(cas));
  }
  return out;
}

// Mask spec files:
//   hidden=<labels,...>|<count>
//   snapshots=all|<t1,t2,...>
//   mask_seed=<int>
// A lone integer in `hidden` is a count only when mask_seed is given.
struct MaskSpecFile {
  std::vector<std::string> hidden_labels;
  std::optional<std::size_t> hidden_count;
  std::optional<std::vector<int>> snapshots;
  std::optional<std::uint64_t> mask_seed;
};

inline std::optional<std::vector<int>> parse_snapshots(std::string_view v) {
  v = text::trim(v);
  if (v == "all") return std::nullopt;
  std::vector<int> out;
  for (auto tok : text::split(v, ',')) {
    tok = text::trim(tok);
    if (tok.empty()) continue;
    const auto t = text::parse_int<int>(tok);
    if (!t) throw ParseError("invalid snapshot time '" + std::string(tok) + "'");
    out.push_back(*t);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

inline MaskSpecFile parse_mask_spec(std::istream& in) {
  MaskSpecFile spec;
  std::string hidden_raw;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto body = text::trim(line);
    if (body.empty() || body.front() == '#') continue;
    const auto eq = body.find('=');
    const auto where = "line " + std::to_string(line_no);
    if (eq == std::string_view::npos) throw ParseError(where + ": expected key=value");
    const auto key = text::trim(body.substr(0, eq));
    const auto value = text::trim(body.substr(eq + 1));
    if (key == "hidden") {
      hidden_raw = std::string(value);
    } else if (key == "snapshots") {
      spec.snapshots = parse_snapshots(value);
    } else if (key == "mask_seed") {
      const auto s = text::parse_int<std::uint64_t>(value);
      if (!s) throw ParseError(where + ": invalid mask_seed");
      spec.mask_seed = *s;
    } else {
      throw ParseError(where + ": unknown key '" + std::string(key) + "'");
    }
  }
  const auto parts = text::split(hidden_raw, ',');
  if (spec.mask_seed && parts.size() == 1 && text::is_unsigned_integer(text::trim(parts[0]))) {
    spec.hidden_count = *text::parse_int<std::size_t>(text::trim(parts[0]));
  } else {
    for (auto p : parts) {
      p = text::trim(p);
      if (!p.empty()) spec.hidden_labels.emplace_back(p);
    }
  }
  return spec;
}

inline MaskSpec resolve_mask(const MaskSpecFile& file, const Network& net) {
  MaskSpec mask;
  if (file.hidden_count) {
    mask.hidden = select_hidden(net.node_count(), *file.hidden_count, file.mask_seed.value_or(0));
  } else {
    for (const auto& l : file.hidden_labels) mask.hidden.push_back(net.node_or_throw(l));
    std::sort(mask.hidden.begin(), mask.hidden.end());
    mask.hidden.erase(std::unique(mask.hidden.begin(), mask.hidden.end()), mask.hidden.end());
  }
  mask.snapshots = file.snapshots;
  return mask;
}

}  // namespace cascade_recon
