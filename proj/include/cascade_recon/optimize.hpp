#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "cascade_recon/errors.hpp"

namespace cascade_recon {

struct FitConfig {
  double alpha_init = 0.5;
  double alpha_min = 1e-6;
  double alpha_max = 1.0 - 1e-6;
  int max_iters = 2000;
  double tol = 1e-7;              // relative free-energy decrease that counts as converged
  double initial_step = 0.1;      // first trial step moves the largest coordinate by this much
  double shrink = 0.5;            // backtracking factor
  double sufficient_decrease = 1e-4;
  int max_backtracks = 60;
  bool deterministic = true;
  std::size_t threads = 1;

  void validate() const {
    if (!(0.0 < alpha_min && alpha_min < alpha_init && alpha_init < alpha_max && alpha_max < 1.0))
      throw RangeError("fit config requires 0 < alpha_min < alpha_init < alpha_max < 1");
    if (!(tol > 0.0)) throw RangeError("fit config requires tol > 0");
    if (max_iters < 0) throw RangeError("max_iters must be non-negative");
    if (!(shrink > 0.0 && shrink < 1.0)) throw RangeError("shrink factor must lie in (0,1)");
    if (!(initial_step > 0.0)) throw RangeError("initial step must be positive");
  }
};

struct IterationRecord {
  int iter = 0;
  double value = 0.0;
  double step = 0.0;
  double grad_inf_norm = 0.0;
};

struct OptimizeResult {
  std::vector<double> x;
  std::vector<IterationRecord> history;  // entry 0 is the starting point
  int iterations = 0;
  bool converged = false;
};

/// Projected gradient descent on a box with Armijo backtracking. The first
/// trial step of each iteration is the Barzilai-Borwein step from the last
/// accepted move. Only decreasing steps are accepted.
///
/// `value(x)` returns the objective; `value_grad(x, g)` fills the gradient.
/// Coordinates with frozen[k] set stay at their starting value.
template <class Value, class ValueGrad>
OptimizeResult projected_gradient_descent(Value&& value, ValueGrad&& value_grad, std::vector<double> x,
                                          double lo, double hi, const FitConfig& cfg,
                                          std::span<const char> frozen = {}) {
  const std::size_t n = x.size();
  const auto is_frozen = [&](std::size_t k) { return !frozen.empty() && frozen[k]; };
  for (std::size_t k = 0; k < n; ++k)
    if (!is_frozen(k)) x[k] = std::clamp(x[k], lo, hi);

  OptimizeResult res;
  std::vector<double> g(n), g_new(n), x_new(n);
  double f = value(x);
  if (!std::isfinite(f)) throw DatasetError("objective is not finite at the starting point");
  value_grad(x, g);
  for (std::size_t k = 0; k < n; ++k)
    if (is_frozen(k)) g[k] = 0.0;

  const auto inf_norm = [](const std::vector<double>& v) {
    double m = 0.0;
    for (double a : v) m = std::max(m, std::abs(a));
    return m;
  };
  res.history.push_back({0, f, 0.0, inf_norm(g)});

  double step = inf_norm(g) > 0.0 ? cfg.initial_step / inf_norm(g) : 0.0;
  for (int it = 1; it <= cfg.max_iters; ++it) {
    // Projected-gradient stationarity.
    double pg = 0.0;
    for (std::size_t k = 0; k < n; ++k) pg = std::max(pg, std::abs(std::clamp(x[k] - g[k], lo, hi) - x[k]));
    if (pg == 0.0 || step <= 0.0) {
      res.converged = true;
      break;
    }

    double eta = step, f_new = f;
    bool accepted = false;
    for (int b = 0; b <= cfg.max_backtracks; ++b, eta *= cfg.shrink) {
      double slope = 0.0, moved = 0.0;
      for (std::size_t k = 0; k < n; ++k) {
        x_new[k] = is_frozen(k) ? x[k] : std::clamp(x[k] - eta * g[k], lo, hi);
        slope += g[k] * (x_new[k] - x[k]);
        moved = std::max(moved, std::abs(x_new[k] - x[k]));
      }
      if (moved == 0.0) break;
      f_new = value(x_new);
      if (std::isfinite(f_new) && f_new <= f + cfg.sufficient_decrease * slope) {
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      res.converged = true;
      break;
    }

    value_grad(x_new, g_new);
    for (std::size_t k = 0; k < n; ++k)
      if (is_frozen(k)) g_new[k] = 0.0;
    double ss = 0.0, sy = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      const double s = x_new[k] - x[k];
      ss += s * s;
      sy += s * (g_new[k] - g[k]);
    }
    const double rel = (f - f_new) / std::max(std::abs(f), std::numeric_limits<double>::min());
    std::swap(x, x_new);
    std::swap(g, g_new);
    f = f_new;
    res.iterations = it;
    res.history.push_back({it, f, eta, inf_norm(g)});
    step = sy > 0.0 ? ss / sy : eta / cfg.shrink;
    step = std::min(step, 1e12);
    if (rel < cfg.tol) {
      res.converged = true;
      break;
    }
  }
  res.x = std::move(x);
  return res;
}

}  // namespace cascade_recon
