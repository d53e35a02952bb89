#pragma once

// Monotone rearrangement rho pushing alpha e^{-c s^2} ds onto
// beta e^{omega(t) - c t^2} dt, with contraction and perimeter checks.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <ostream>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <boost/math/special_functions/erf.hpp>

#include "isoflow/curve.hpp"
#include "isoflow/errors.hpp"
#include "isoflow/io.hpp"
#include "isoflow/quadrature.hpp"
#include "isoflow/roots.hpp"
#include "isoflow/weights.hpp"

namespace isoflow {

struct TransportGrid {
  int nodes = 801;
  double half_width = 0.0;  // 0 selects 7 / sqrt(2c)
  double clip = 1e-14;
  bool allow_nonconcave = false;
};

struct TransportMap {
  std::vector<double> s, rho, drho;
  Normalizers norm{};
  Density density;
  std::vector<std::string> warnings;
};

namespace detail {

// Tails are integrated to relative accuracy, so the abs floor is negligible.
inline QuadratureSpec transport_quadrature() {
  QuadratureSpec q;
  q.rel_tol = 1e-14;
  q.abs_tol = 1e-300;
  return q;
}

inline double gauss_cdf(double c, double s) { return 0.5 * std::erfc(-std::sqrt(c) * s); }
inline double gauss_sf(double c, double s) { return 0.5 * std::erfc(std::sqrt(c) * s); }

// Target lower/upper tail masses (normalized).
inline double target_cdf(const Density& d, double beta, double t, const QuadratureSpec& q) {
  if (t <= d.slab().lo) return 0.0;
  return beta * vertical_mass(d, d.slab().lo, std::min(t, d.slab().hi), q).value;
}
inline double target_sf(const Density& d, double beta, double t, const QuadratureSpec& q) {
  if (t >= d.slab().hi) return 0.0;
  return beta * vertical_mass(d, std::max(t, d.slab().lo), d.slab().hi, q).value;
}

// Solves CDF_2(t) = p (lower) or SF_2(t) = q (upper) inside [lo, hi].
inline double invert_target(const Density& d, double beta, double mass, bool upper, double lo,
                            double hi, const QuadratureSpec& q) {
  // Near a finite slab end the attainable accuracy is limited by the spacing
  // of doubles in t.
  const double end = upper ? d.slab().hi : d.slab().lo;
  double floor = 0.0;
  if (std::isfinite(end))
    floor = 16.0 * std::numeric_limits<double>::epsilon() * beta * d.vertical_density(end) *
            std::max(1.0, std::abs(end));
  const double tol = std::max(2e-12 * mass, floor);
  if (!upper) {
    auto eval = [&](double t) -> std::pair<double, double> {
      return {target_cdf(d, beta, t, q), beta * d.vertical_density(t)};
    };
    return solve_monotone(eval, mass, lo, hi, tol).x;
  }
  auto eval = [&](double t) -> std::pair<double, double> {
    return {-target_sf(d, beta, t, q), beta * d.vertical_density(t)};
  };
  return solve_monotone(eval, -mass, lo, hi, tol).x;
}

// (rho^{-1})'(t) = beta e^{omega(t) - c t^2} / (alpha e^{-c s^2}).
inline double inverse_slope(const TransportMap& m, double t, double s) {
  const double c = m.density.c();
  return m.norm.beta * m.density.vertical_density(t) / (m.norm.alpha * std::exp(-c * s * s));
}

}  // namespace detail

/// Samples rho = CDF_2^{-1} o CDF_1 on a uniform grid in s, with rho' from
/// alpha e^{-c s^2} = beta e^{omega(rho) - c rho^2} rho'.
inline TransportMap build_transport(const Density& d, const TransportGrid& grid = {}) {
  if (!grid.allow_nonconcave && !check_concavity(d.weight()).concave)
    throw ValidationError("build_transport: weight is not concave");
  if (grid.nodes < 2) throw ValidationError("build_transport: need at least two nodes");
  const double c = d.c();
  const auto q = detail::transport_quadrature();
  TransportMap m{{}, {}, {}, normalizers(d, q), d, {}};
  const double w = grid.half_width > 0 ? grid.half_width : 7.0 / std::sqrt(2.0 * c);
  const auto win = tail_window(d, q);

  m.s.resize(grid.nodes);
  m.rho.resize(grid.nodes);
  m.drho.resize(grid.nodes);
  std::size_t clipped = 0;
  double prev = win.lo;
  for (int i = 0; i < grid.nodes; ++i) {
    const double s = -w + 2.0 * w * i / (grid.nodes - 1);
    double p = detail::gauss_cdf(c, s);
    double r = detail::gauss_sf(c, s);
    if (p < grid.clip) p = grid.clip, ++clipped;
    if (r < grid.clip) r = grid.clip, ++clipped;
    const bool upper = r < p;
    double rho = detail::invert_target(d, m.norm.beta, upper ? r : p, upper, prev, win.hi, q);
    rho = std::max(rho, prev);
    m.s[i] = s;
    m.rho[i] = rho;
    m.drho[i] = m.norm.alpha * std::exp(-c * s * s) / (m.norm.beta * d.vertical_density(rho));
    prev = rho;
  }
  if (clipped > 0)
    m.warnings.push_back("quantiles clipped at " + format_double(grid.clip) + " for " +
                         std::to_string(clipped) + " node(s)");
  return m;
}

struct ContractionReport {
  bool certified;
  double max_drho;
  double argmax_s;
};

inline ContractionReport check_contraction(const TransportMap& m, double tol = 1e-6) {
  ContractionReport r{true, -kInf, 0.0};
  for (std::size_t i = 0; i < m.s.size(); ++i)
    if (m.drho[i] > r.max_drho) r.max_drho = m.drho[i], r.argmax_s = m.s[i];
  r.certified = r.max_drho <= 1.0 + tol;
  return r;
}

/// max_i |alpha e^{-c s_i^2} - beta e^{omega(rho_i) - c rho_i^2} rho'_i| / alpha.
inline double derivative_identity_residual(const TransportMap& m) {
  double worst = 0.0;
  const double c = m.density.c();
  for (std::size_t i = 0; i < m.s.size(); ++i) {
    const double lhs = m.norm.alpha * std::exp(-c * m.s[i] * m.s[i]);
    const double rhs = m.norm.beta * m.density.vertical_density(m.rho[i]) * m.drho[i];
    worst = std::max(worst, std::abs(lhs - rhs) / m.norm.alpha);
  }
  return worst;
}

/// rho^{-1}(t): Hermite cubic through (rho_i, s_i) with slopes 1/rho'_i inside
/// the sampled range, exact quantile inversion outside it.
inline double transport_inverse(const TransportMap& m, double t) {
  const auto& d = m.density;
  if (t <= d.slab().lo) return -kInf;
  if (t >= d.slab().hi) return kInf;
  if (t >= m.rho.front() && t <= m.rho.back() && m.rho.front() < m.rho.back()) {
    auto it = std::upper_bound(m.rho.begin(), m.rho.end(), t);
    std::size_t i = it == m.rho.begin() ? 0 : static_cast<std::size_t>(it - m.rho.begin()) - 1;
    i = std::min(i, m.rho.size() - 2);
    while (i + 1 < m.rho.size() && m.rho[i + 1] == m.rho[i]) ++i;
    const double h = m.rho[i + 1] - m.rho[i];
    if (h > 0) {
      const double u = (t - m.rho[i]) / h;
      const double u2 = u * u, u3 = u2 * u;
      const double d0 = h / m.drho[i], d1 = h / m.drho[i + 1];
      return (2 * u3 - 3 * u2 + 1) * m.s[i] + (u3 - 2 * u2 + u) * d0 +
             (-2 * u3 + 3 * u2) * m.s[i + 1] + (u3 - u2) * d1;
    }
  }
  const auto q = detail::transport_quadrature();
  const double sc = std::sqrt(d.c());
  const double p = detail::target_cdf(d, m.norm.beta, t, q);
  if (p <= 0.5) return -boost::math::erfc_inv(2.0 * p) / sc;
  return boost::math::erfc_inv(2.0 * detail::target_sf(d, m.norm.beta, t, q)) / sc;
}

struct PushforwardReport {
  double max_residual = 0.0;
  double worst_lo = 0.0, worst_hi = 0.0;
  std::size_t checked = 0;
};

/// For each D = (d1, d2): |mu_2(D) - mu_1(rho^{-1}(D))|.
inline PushforwardReport pushforward_check(const TransportMap& m,
                                           const std::vector<std::pair<double, double>>& intervals) {
  const auto q = detail::transport_quadrature();
  const auto& d = m.density;
  const double c = d.c();
  PushforwardReport r;
  for (auto [d1, d2] : intervals) {
    if (!(d1 < d2) || d1 < d.slab().lo || d2 > d.slab().hi)
      throw DomainError("pushforward_check: interval must satisfy a <= d1 < d2 <= b");
    const double mu2 = m.norm.beta * vertical_mass(d, d1, d2, q).value;
    const double s1 = transport_inverse(m, d1), s2 = transport_inverse(m, d2);
    const double mu1 = s2 <= 0 ? detail::gauss_cdf(c, s2) - detail::gauss_cdf(c, s1)
                               : detail::gauss_sf(c, s1) - detail::gauss_sf(c, s2);
    const double res = std::abs(mu2 - mu1);
    ++r.checked;
    if (res > r.max_residual) r.max_residual = res, r.worst_lo = d1, r.worst_hi = d2;
  }
  return r;
}

/// Random subintervals of the sampled range of rho.
inline std::vector<std::pair<double, double>> random_intervals(const TransportMap& m, std::size_t n,
                                                               std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(m.rho.front(), m.rho.back());
  std::vector<std::pair<double, double>> out;
  while (out.size() < n) {
    double a = u(rng), b = u(rng);
    if (a > b) std::swap(a, b);
    if (a < b) out.emplace_back(a, b);
  }
  return out;
}

struct PerimeterBound {
  double weighted_length;    // P_f(E)
  double gaussian_pullback;  // (alpha / beta) P_gamma(T^{-1}(E))
  double slack;
};

/// Compares the f-length of a planar polyline with the scaled Gaussian length
/// of its pullback under T(x, s) = (x, rho(s)).
inline PerimeterBound transported_perimeter_bound(const TransportMap& m, const DiscreteCurve& curve,
                                                  int points_per_segment = 8) {
  const auto& d = m.density;
  if (d.ambient_dim() != 2) throw ValidationError("transported_perimeter_bound: planar densities only");
  for (double t : curve.t)
    if (!d.slab().contains_closed(t)) throw DomainError("transported_perimeter_bound: curve exits the slab");
  const double c = d.c();
  const auto& gl = gauss_legendre(points_per_segment);
  double pf = 0.0, pg = 0.0;
  const std::size_t n = curve.size();
  const std::size_t segs = curve.closed ? n : n - 1;
  for (std::size_t i = 0; i < segs; ++i) {
    const std::size_t j = (i + 1) % n;
    const double dx = curve.x[j] - curve.x[i], dt = curve.t[j] - curve.t[i];
    for (std::size_t g = 0; g < gl.nodes.size(); ++g) {
      const double u = 0.5 * (gl.nodes[g] + 1.0);
      const double w = 0.5 * gl.weights[g];
      const double x = curve.x[i] + u * dx, t = curve.t[i] + u * dt;
      const double fx = std::exp(-c * x * x);
      const double ft = d.vertical_density(t);
      if (ft == 0.0) continue;
      pf += w * fx * ft * std::hypot(dx, dt);
      const double s = transport_inverse(m, t);
      const double ds = detail::inverse_slope(m, t, s);
      pg += w * fx * std::exp(-c * s * s) * std::hypot(dx, ds * dt);
    }
  }
  const double scaled = m.norm.alpha / m.norm.beta * pg;
  return {pf, scaled, pf - scaled};
}

/// CSV with header s,rho,drho.
inline void write_transport_csv(std::ostream& os, const TransportMap& m) {
  write_csv_header(os, {"s", "rho", "drho"});
  for (std::size_t i = 0; i < m.s.size(); ++i) write_csv_row(os, {m.s[i], m.rho[i], m.drho[i]});
}

}  // namespace isoflow
