#pragma once

// Adaptive Gauss-Kronrod integration on finite intervals and fixed
// Gauss-Legendre rules.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <numbers>
#include <queue>
#include <span>
#include <vector>

#include "isoflow/errors.hpp"

namespace isoflow {

/// Tolerances and budget for adaptive integration.
struct QuadratureSpec {
  double rel_tol = 1e-10;
  double abs_tol = 1e-14;
  int max_intervals = 4000;
  // Infinite tails are cut where their dominating mass, inflated by a
  // polynomial factor (1+t^2)^tail_poly_degree / 2, drops below
  // tail_fraction * abs_tol.
  double tail_fraction = 0.1;
  int tail_poly_degree = 8;
};

struct QuadResult {
  double value = 0.0;
  double error = 0.0;
  int intervals = 0;
};

namespace detail {

// G7/K15 pair. Index 0 is the centre node; odd entries of kronrod_x are the
// Gauss nodes.
inline constexpr std::array<double, 8> kronrod_x = {
    0.000000000000000000000000000000000, 0.207784955007898467600689403773245,
    0.405845151377397166906606412076961, 0.586087235467691130294144845693013,
    0.741531185599394439863864773280788, 0.864864423359769072789712788640926,
    0.949107912342758524526189684047851, 0.991455371120812639206854697526329};
inline constexpr std::array<double, 8> kronrod_w = {
    0.209482141084727828012999174891714, 0.204432940075298892414161999234649,
    0.190350578064785409913256402421014, 0.169004726639267902826583426598550,
    0.140653259715525918745189590510238, 0.104790010322250183839876322541518,
    0.063092092629978553290700663189204, 0.022935322010529224963732008058970};
// Gauss weights for nodes 0, 2, 4, 6 of kronrod_x.
inline constexpr std::array<double, 4> gauss_w = {
    0.417959183673469387755102040816327, 0.381830050505118944950369775488975,
    0.279705391489276667901467771423780, 0.129484966168869693270611432679082};

struct Panel {
  double lo;
  double hi;
  double value;
  double error;
  double abs_value;
  std::size_t order;  // insertion counter, used to break ties deterministically
};

struct PanelLess {
  bool operator()(const Panel& l, const Panel& r) const {
    if (l.error != r.error) return l.error < r.error;
    return l.order > r.order;
  }
};

template <class F>
Panel kronrod_panel(F& f, double lo, double hi, std::size_t order) {
  const double mid = 0.5 * (lo + hi);
  const double half = 0.5 * (hi - lo);
  const double fc = f(mid);
  double k = kronrod_w[0] * fc;
  double g = gauss_w[0] * fc;
  double a = std::abs(k);
  for (std::size_t i = 1; i < 8; ++i) {
    const double dx = half * kronrod_x[i];
    const double f1 = f(mid - dx);
    const double f2 = f(mid + dx);
    k += kronrod_w[i] * (f1 + f2);
    a += kronrod_w[i] * (std::abs(f1) + std::abs(f2));
    if (i % 2 == 0) g += gauss_w[i / 2] * (f1 + f2);
  }
  return Panel{lo, hi, k * half, std::abs((k - g) * half), a * std::abs(half), order};
}

}  // namespace detail

/// Adaptive G7K15 integration of f over [lo, hi] (both finite).
///
/// The interval is first split at the given breakpoints (those strictly
/// inside it); the panel with the largest error estimate is bisected until
/// the summed error is below max(abs_tol, rel_tol*|I|) or the roundoff floor.
/// Throws ConvergenceError once max_intervals panels are in use.
template <class F>
QuadResult gauss_kronrod(F&& f, double lo, double hi, const QuadratureSpec& spec,
                         std::span<const double> breakpoints = {}) {
  if (!(std::isfinite(lo) && std::isfinite(hi)))
    throw DomainError("gauss_kronrod: endpoints must be finite");
  if (lo == hi) return {};
  double sign = 1.0;
  if (hi < lo) {
    std::swap(lo, hi);
    sign = -1.0;
  }

  std::vector<double> cuts{lo};
  for (double b : breakpoints)
    if (b > lo && b < hi) cuts.push_back(b);
  cuts.push_back(hi);
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

  std::priority_queue<detail::Panel, std::vector<detail::Panel>, detail::PanelLess> heap;
  std::size_t order = 0;
  double total = 0.0, total_err = 0.0, total_abs = 0.0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    auto p = detail::kronrod_panel(f, cuts[i], cuts[i + 1], order++);
    total += p.value;
    total_err += p.error;
    total_abs += p.abs_value;
    heap.push(p);
  }

  constexpr double eps = std::numeric_limits<double>::epsilon();
  auto tolerance = [&] {
    return std::max({spec.abs_tol, spec.rel_tol * std::abs(total), 50.0 * eps * total_abs});
  };

  while (total_err > tolerance()) {
    if (static_cast<int>(heap.size()) >= spec.max_intervals)
      throw ConvergenceError("gauss_kronrod: subdivision budget exhausted", sign * total,
                             total_err);
    auto worst = heap.top();
    const double mid = 0.5 * (worst.lo + worst.hi);
    if (!(mid > worst.lo && mid < worst.hi)) {
      // Panel cannot be split further in floating point.
      throw ConvergenceError("gauss_kronrod: panel width underflow", sign * total, total_err);
    }
    heap.pop();
    auto left = detail::kronrod_panel(f, worst.lo, mid, order++);
    auto right = detail::kronrod_panel(f, mid, worst.hi, order++);
    total += left.value + right.value - worst.value;
    total_err += left.error + right.error - worst.error;
    total_abs += left.abs_value + right.abs_value - worst.abs_value;
    heap.push(left);
    heap.push(right);
  }

  // Re-sum from the panels so that cancellation in the running sum does not
  // leak into the result.
  double value = 0.0, err = 0.0;
  const int count = static_cast<int>(heap.size());
  std::vector<detail::Panel> panels;
  panels.reserve(heap.size());
  while (!heap.empty()) {
    panels.push_back(heap.top());
    heap.pop();
  }
  std::sort(panels.begin(), panels.end(),
            [](const auto& l, const auto& r) { return l.lo < r.lo; });
  for (const auto& p : panels) {
    value += p.value;
    err += p.error;
  }
  return {sign * value, err, count};
}

/// Nodes and weights of the n-point Gauss-Legendre rule on [-1, 1].
struct GaussLegendreRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

inline GaussLegendreRule make_gauss_legendre(int n) {
  if (n < 1) throw ValidationError("make_gauss_legendre: n must be positive");
  GaussLegendreRule rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      if (n == 1) {
        p1 = x;
        p0 = 1.0;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    // recompute derivative at the converged node
    double p0 = 1.0, p1 = x;
    for (int k = 2; k <= n; ++k) {
      const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
      p0 = p1;
      p1 = p2;
    }
    dp = (n == 1) ? 1.0 : n * (x * p1 - p0) / (x * x - 1.0);
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    rule.nodes[i] = -x;
    rule.nodes[n - 1 - i] = x;
    rule.weights[i] = w;
    rule.weights[n - 1 - i] = w;
  }
  if (n % 2 == 1) rule.nodes[n / 2] = 0.0;
  return rule;
}

/// Cached rule; safe to call from several threads.
inline const GaussLegendreRule& gauss_legendre(int n) {
  static std::mutex mutex;
  static std::map<int, GaussLegendreRule> cache;
  std::lock_guard lock(mutex);
  auto it = cache.find(n);
  if (it == cache.end()) it = cache.emplace(n, make_gauss_legendre(n)).first;
  return it->second;
}

}  // namespace isoflow
