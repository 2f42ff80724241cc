#pragma once

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "cascade_recon/cascade_recon.hpp"

namespace cascade_recon::cli {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Options {
  std::string network, couplings, cascades, mask, out, truth, diagnostics, config;
  std::string method = "dmprec";
  std::string sources = "random";
  std::string hidden, snapshots;
  int horizon = 10;
  std::size_t num_cascades = 100;
  std::uint64_t seed = 0;
  std::optional<std::uint64_t> mask_seed;
  std::size_t threads = 0;
  bool deterministic = false;

  FitConfig fit;
  HtsConfig hts;
};

namespace detail {

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_output(const std::string& path, const std::string& body, std::ostream& fallback) {
  if (path.empty()) {
    fallback << body;
    return;
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write '" + path + "'");
  f << body;
  if (!f) throw std::runtime_error("write to '" + path + "' failed");
}

inline std::string require(const std::string& value, const char* flag) {
  if (value.empty()) throw UsageError(std::string("missing required flag ") + flag);
  return value;
}

// Always shows a decimal point, so a zero error prints as "0.0".
inline std::string decimal(double v) {
  auto s = text::format_double(v);
  if (std::isfinite(v) && s.find_first_of(".e") == std::string::npos) s += ".0";
  return s;
}

// Couplings for `net` read from an edge list with an alpha column. The edge
// set must match the network exactly.
inline Couplings couplings_from_file(const Network& net, const std::string& path) {
  const auto el = parse_edge_list(read_file(path));
  if (!el.couplings) throw ParseError("'" + path + "' has no coupling column");
  if (el.network.edge_count() != net.edge_count())
    throw DatasetError("'" + path + "' lists " + std::to_string(el.network.edge_count()) + " edges, network has " +
                       std::to_string(net.edge_count()));
  std::vector<double> values(net.edge_count(), 0.0);
  for (EdgeId e = 0; e < el.network.edge_count(); ++e) {
    const auto& edge = el.network.edge(e);
    const auto src = net.find_node(el.network.label(edge.src));
    const auto dst = net.find_node(el.network.label(edge.dst));
    const auto id = src && dst ? net.edge_id(*src, *dst) : std::nullopt;
    if (!id)
      throw DatasetError("edge " + el.network.label(edge.src) + "->" + el.network.label(edge.dst) + " in '" + path +
                         "' is not in the network");
    values[*id] = (*el.couplings)[e];
  }
  return Couplings(std::move(values));
}

struct Loaded {
  Network net;
  std::optional<Couplings> couplings;
};

inline Loaded load_network(const Options& o) {
  auto el = parse_edge_list(read_file(require(o.network, "--network")));
  Loaded l{std::move(el.network), std::move(el.couplings)};
  if (!o.couplings.empty()) l.couplings = couplings_from_file(l.net, o.couplings);
  return l;
}

inline const Couplings& need_couplings(const Loaded& l) {
  if (!l.couplings) throw UsageError("couplings required: pass --couplings or a network with an alpha column");
  return *l.couplings;
}

// Mask file first, then flags, so flags win key by key.
inline MaskSpec load_mask(const Options& o, const Network& net) {
  std::string spec;
  if (!o.mask.empty()) spec = read_file(o.mask) + "\n";
  if (!o.hidden.empty()) spec += "hidden=" + o.hidden + "\n";
  if (!o.snapshots.empty()) spec += "snapshots=" + o.snapshots + "\n";
  if (o.mask_seed) spec += "mask_seed=" + std::to_string(*o.mask_seed) + "\n";
  std::istringstream in(spec);
  return resolve_mask(parse_mask_spec(in), net);
}

inline std::vector<NodeId> parse_source_labels(const std::string& v, const Network& net) {
  std::vector<NodeId> out;
  for (auto tok : text::split(v, ',')) {
    tok = text::trim(tok);
    if (!tok.empty()) out.push_back(net.node_or_throw(tok));
  }
  if (out.empty()) throw UsageError("--sources needs at least one node label");
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

inline ObservedDataset load_observed(const Options& o, const Network& net) {
  std::istringstream in(read_file(require(o.cascades, "--cascades")));
  return parse_observed_cascades(in, net);
}

inline std::vector<Cascade> simulate_for(const Options& o, const Network& net, const Couplings& couplings) {
  SourcePolicy policy;
  if (o.sources == "random") {
    const auto mask = load_mask(o, net);
    RandomSingleSource r;
    for (NodeId i = 0; i < net.node_count(); ++i)
      if (!std::binary_search(mask.hidden.begin(), mask.hidden.end(), i)) r.candidates.push_back(i);
    if (r.candidates.empty()) throw RangeError("every node is hidden; no source candidates");
    policy = std::move(r);
  } else {
    policy = FixedSources{parse_source_labels(o.sources, net)};
  }
  return generate_dataset(net, couplings, o.num_cascades, policy, o.horizon, o.seed, o.threads);
}

inline std::string history_csv(const std::vector<IterationRecord>& history) {
  std::string s = "iter,free_energy,step_size,grad_inf_norm\n";
  for (const auto& h : history)
    s += std::to_string(h.iter) + ',' + text::format_double(h.value) + ',' + text::format_double(h.step) + ',' +
         text::format_double(h.grad_inf_norm) + '\n';
  return s;
}

inline std::string edge_name(const Network& net, EdgeId e) {
  return net.label(net.edge(e).src) + "->" + net.label(net.edge(e).dst);
}

// ---- subcommands ----

inline int cmd_simulate(const Options& o, std::ostream& out) {
  const auto l = load_network(o);
  const auto cascades = simulate_for(o, l.net, need_couplings(l));
  write_output(o.out, serialize_cascades(l.net, cascades), out);
  return 0;
}

inline int cmd_mask(const Options& o, std::ostream& out) {
  const auto l = load_network(o);
  std::istringstream in(read_file(require(o.cascades, "--cascades")));
  const auto truth = parse_cascades(in, l.net);
  const auto mask = load_mask(o, l.net);
  std::vector<ObservedCascade> observed;
  observed.reserve(truth.size());
  for (const auto& c : truth) observed.push_back(apply_mask(c, mask));
  write_output(o.out, serialize_observed_cascades(l.net, observed), out);
  return 0;
}

inline int cmd_fit(const Options& o, std::ostream& out) {
  const auto l = load_network(o);
  const auto data = load_observed(o, l.net);
  FitConfig cfg = o.fit;
  cfg.threads = o.threads;
  cfg.deterministic = o.deterministic;
  FitResult res;
  if (o.method == "dmprec") {
    res = dmprec_fit(data.cascades, l.net, cfg);
  } else if (o.method == "netrate") {
    res = netrate_fit(std::span<const ObservedCascade>(data.cascades), l.net, cfg);
  } else if (o.method == "hts") {
    HtsConfig h = o.hts;
    h.inner = cfg;
    h.seed = o.seed;
    h.threads = o.threads;
    res = hts_fit(data.cascades, l.net, h);
  } else {
    throw UsageError("unknown method '" + o.method + "'");
  }
  write_output(o.out, serialize_edge_list(l.net, &res.couplings), out);
  if (!o.diagnostics.empty()) write_output(o.diagnostics, history_csv(res.history), out);
  return 0;
}

inline int cmd_eval(const Options& o, std::ostream& out) {
  const auto l = load_network(o);
  const auto& est = need_couplings(l);
  const auto truth = couplings_from_file(l.net, require(o.truth, "--truth"));
  const auto included = identifiable_edges(l.net, load_mask(o, l.net));
  const double err = l1_coupling_error(est, truth, included);
  double residual = 0.0;
  std::string csv = "src,dst,alpha_true,alpha_est\n";
  for (EdgeId e : included) {
    const auto& edge = l.net.edge(e);
    residual += est[e] - truth[e];
    csv += l.net.label(edge.src) + ',' + l.net.label(edge.dst) + ',' + text::format_double(truth[e]) + ',' +
           text::format_double(est[e]) + '\n';
  }
  residual /= static_cast<double>(included.size());
  if (!o.out.empty()) write_output(o.out, csv, out);
  out << "normalized_l1_error " << decimal(err) << '\n';
  out << "mean_residual " << decimal(residual) << '\n';
  out << "edges " << included.size() << '\n';
  return 0;
}

inline int cmd_marginals(const Options& o, std::ostream& out) {
  const auto l = load_network(o);
  if (o.sources == "random") throw UsageError("marginals needs explicit --sources labels");
  const auto init = InitialCondition::from_sources(l.net.node_count(), parse_source_labels(o.sources, l.net));
  const auto tr = dmp_forward(l.net, need_couplings(l), init, o.horizon);
  std::string csv = "node,time,P_S,m\n";
  for (NodeId i = 0; i < l.net.node_count(); ++i)
    for (int t = 0; t <= o.horizon; ++t)
      csv += l.net.label(i) + ',' + std::to_string(t) + ',' + text::format_double(tr.ps(i, t)) + ',' +
             text::format_double(tr.m(i, t)) + '\n';
  write_output(o.out, csv, out);
  return 0;
}

inline int cmd_oracle(const Options& o, std::ostream& out) {
  const auto l = load_network(o);
  if (o.sources == "random") throw UsageError("oracle needs explicit --sources labels");
  const auto init = InitialCondition::from_sources(l.net.node_count(), parse_source_labels(o.sources, l.net));
  const auto ex = exact_marginals_oracle(l.net, need_couplings(l), init, o.horizon);
  std::string csv = "node,time,P_S\n";
  for (NodeId i = 0; i < l.net.node_count(); ++i)
    for (int t = 0; t <= o.horizon; ++t)
      csv += l.net.label(i) + ',' + std::to_string(t) + ',' + text::format_double(ex.ps(i, t)) + '\n';
  write_output(o.out, csv, out);
  return 0;
}

inline constexpr double kGradcheckStep = 1e-5;
inline constexpr double kGradcheckRel = 1e-5;
inline constexpr double kGradcheckAbs = 1e-8;

// Analytic free-energy gradient against central differences evaluated in
// extended precision. Without --cascades a dataset is simulated from the
// couplings and masked with the mask flags.
inline int cmd_gradcheck(const Options& o, std::ostream& out, std::ostream& err) {
  const auto l = load_network(o);
  const auto& alpha = need_couplings(l);
  std::vector<ObservedCascade> observed;
  if (!o.cascades.empty()) {
    observed = load_observed(o, l.net).cascades;
  } else {
    const auto mask = load_mask(o, l.net);
    for (const auto& c : simulate_for(o, l.net, alpha)) observed.push_back(apply_mask(c, mask));
  }
  const auto data = compile_dataset(observed, l.net.node_count());
  const auto analytic = free_energy_with_gradient(data, l.net, alpha, o.threads).gradient;

  std::vector<long double> x(alpha.values().begin(), alpha.values().end());
  std::string csv = "edge,analytic,numeric,rel_error\n";
  std::size_t bad = 0;
  for (EdgeId e = 0; e < l.net.edge_count(); ++e) {
    const long double x0 = x[e];
    x[e] = x0 + kGradcheckStep;
    const long double fp = free_energy_value<long double>(data, l.net, x, o.threads);
    x[e] = x0 - kGradcheckStep;
    const long double fm = free_energy_value<long double>(data, l.net, x, o.threads);
    x[e] = x0;
    const double numeric = static_cast<double>((fp - fm) / (2.0L * kGradcheckStep));
    const double a = analytic[e];
    const double diff = std::abs(a - numeric);
    const double scale = std::max(std::abs(a), std::abs(numeric));
    const double rel = scale > 0.0 ? diff / scale : 0.0;
    if (diff > std::max(kGradcheckRel * scale, kGradcheckAbs)) ++bad;
    csv += edge_name(l.net, e) + ',' + text::format_double(a) + ',' + text::format_double(numeric) + ',' +
           text::format_double(rel) + '\n';
  }
  write_output(o.out, csv, out);
  if (bad) {
    err << "gradcheck: " << bad << " coordinate(s) disagree with finite differences\n";
    return 1;
  }
  return 0;
}

inline std::size_t env_threads() {
  const char* v = std::getenv("CASCADE_RECON_THREADS");
  if (!v || !*v) return 0;
  const auto n = text::parse_int<std::size_t>(text::trim(v));
  if (!n) throw UsageError(std::string("CASCADE_RECON_THREADS must be a non-negative integer, got '") + v + "'");
  return *n;
}

inline std::map<std::string, std::string> parse_config(const std::string& path) {
  std::map<std::string, std::string> kv;
  std::istringstream in(read_file(path));
  std::string line;
  for (std::size_t no = 1; std::getline(in, line); ++no) {
    const auto body = text::trim(line);
    if (body.empty() || body.front() == '#') continue;
    const auto eq = body.find('=');
    if (eq == std::string_view::npos)
      throw UsageError(path + ":" + std::to_string(no) + ": expected 'key = value'");
    std::string key(text::trim(body.substr(0, eq)));
    std::replace(key.begin(), key.end(), '_', '-');
    kv[key] = std::string(text::trim(body.substr(eq + 1)));
  }
  return kv;
}

// The --config path, if one was passed.
inline std::optional<std::string> find_config(const std::vector<std::string>& args) {
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config") {
      if (i + 1 >= args.size()) throw UsageError("--config needs a file");
      return args[i + 1];
    }
    if (args[i].rfind("--config=", 0) == 0) return args[i].substr(9);
  }
  return std::nullopt;
}

}  // namespace detail

inline void add_options(CLI::App& sub, Options& o) {
  sub.add_option("--network", o.network, "edge list: src dst [alpha]");
  sub.add_option("--couplings", o.couplings, "edge list with an alpha column");
  sub.add_option("--cascades", o.cascades, "cascade file");
  sub.add_option("--mask", o.mask, "mask spec file");
  sub.add_option("--out", o.out, "output path (stdout when omitted)");
  sub.add_option("--truth", o.truth, "true couplings (eval)");
  sub.add_option("--diagnostics", o.diagnostics, "per-iteration CSV (fit)");
  sub.add_option("--method", o.method, "dmprec, hts or netrate")->check(CLI::IsMember({"dmprec", "hts", "netrate"}));
  sub.add_option("--horizon", o.horizon, "observation horizon T")->check(CLI::PositiveNumber);
  sub.add_option("--num-cascades", o.num_cascades, "number of cascades")->check(CLI::PositiveNumber);
  sub.add_option("--sources", o.sources, "'random' or comma-separated labels");
  sub.add_option("--seed", o.seed, "simulation / HTS seed");
  sub.add_option("--mask-seed", o.mask_seed, "seed for drawing a hidden-node count");
  sub.add_option("--hidden", o.hidden, "hidden labels, or a count together with --mask-seed");
  sub.add_option("--snapshots", o.snapshots, "'all' or t1,t2,...");
  sub.add_option("--threads", o.threads, "worker threads, 0 = all cores");
  sub.add_flag("--deterministic", o.deterministic, "fixed reduction order");
  sub.add_option("--config", o.config, "key = value file; flags override it");
  sub.add_option("--alpha-init", o.fit.alpha_init);
  sub.add_option("--alpha-min", o.fit.alpha_min);
  sub.add_option("--alpha-max", o.fit.alpha_max);
  sub.add_option("--max-iters", o.fit.max_iters);
  sub.add_option("--tol", o.fit.tol);
  sub.add_option("--samples", o.hts.samples, "HTS auxiliary cascades per observation");
  sub.add_option("--outer-rounds", o.hts.outer_rounds);
  sub.add_option("--param-tol", o.hts.param_tol);
}

/// Runs one subcommand. Returns 0 on success, 1 on a module error, 2 on a
/// usage error.
inline int run_command(std::vector<std::string> args, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Edge coupling reconstruction from partially observed SI cascades", "cascade_recon"};
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  app.require_subcommand(1);
  Options o;

  const std::vector<std::pair<const char*, const char*>> commands = {
      {"simulate", "network + couplings -> ground-truth cascades"},
      {"mask", "cascades + mask -> observed cascades"},
      {"fit", "observed cascades -> estimated couplings"},
      {"eval", "estimate vs truth -> L1 error and scatter CSV"},
      {"marginals", "DMP marginals CSV"},
      {"gradcheck", "analytic vs finite-difference gradient CSV"},
      {"oracle", "exact subset-state marginals CSV (small networks)"},
  };
  for (const auto& [name, help] : commands) add_options(*app.add_subcommand(name, help), o);

  try {
    o.threads = detail::env_threads();
    if (const auto path = detail::find_config(args)) {
      if (args.empty()) throw UsageError("missing subcommand");
      CLI::App* sub = app.get_subcommand_no_throw(args.front());
      if (!sub) throw UsageError("unknown subcommand '" + args.front() + "'");
      std::vector<std::string> injected;
      for (const auto& [key, value] : detail::parse_config(*path)) {
        if (key == "config" || !sub->get_option_no_throw("--" + key))
          throw UsageError("unknown config key '" + key + "'");
        if (key == "deterministic") {
          if (value == "true" || value == "1") injected.push_back("--deterministic");
          else if (value != "false" && value != "0") throw UsageError("deterministic must be true or false");
        } else {
          injected.push_back("--" + key);
          injected.push_back(value);
        }
      }
      args.insert(args.begin() + 1, injected.begin(), injected.end());
    }
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << '\n';
    return 2;
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }

  const std::string name = app.get_subcommands().front()->get_name();
  try {
    if (name == "simulate") return detail::cmd_simulate(o, out);
    if (name == "mask") return detail::cmd_mask(o, out);
    if (name == "fit") return detail::cmd_fit(o, out);
    if (name == "eval") return detail::cmd_eval(o, out);
    if (name == "marginals") return detail::cmd_marginals(o, out);
    if (name == "oracle") return detail::cmd_oracle(o, out);
    return detail::cmd_gradcheck(o, out, err);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

inline int run_command(int argc, char** argv) {
  return run_command(std::vector<std::string>(argv + 1, argv + argc));
}

}  // namespace cascade_recon::cli
