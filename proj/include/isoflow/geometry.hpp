#pragma once

// Curves in the weighted plane: f-mean curvature, constant-curvature
// shooting, the Jacobi eigen-identity, index forms and the horizontal
// half-space stability test.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "isoflow/curve.hpp"
#include "isoflow/errors.hpp"
#include "isoflow/weights.hpp"

namespace isoflow {

namespace detail {

inline void require_planar(const Density& d) {
  if (d.ambient_dim() != 2) throw ValidationError("curve geometry needs a planar density (n = 1)");
}

inline void require_smooth(const Density& d) {
  if (d.weight().smoothness() != Smoothness::Smooth)
    throw SmoothnessError("f-mean curvature needs a smooth weight");
}

struct Grad2 {
  double x, t;
};

inline Grad2 grad_psi_2d(const Density& d, double x, double t) {
  if (!d.slab().contains_closed(t)) throw DomainError("point lies outside the closed slab");
  const double c = d.c();
  return {-2.0 * c * x, d.weight().derivative(t) - 2.0 * c * t};
}

// Cumulative chord length.
inline std::vector<double> arclength(const DiscreteCurve& c) {
  std::vector<double> s(c.size(), 0.0);
  for (std::size_t i = 1; i < c.size(); ++i)
    s[i] = s[i - 1] + std::hypot(c.x[i] - c.x[i - 1], c.t[i] - c.t[i - 1]);
  return s;
}

// Trapezoid weights of f ds along the curve (closed curves wrap around).
inline std::vector<double> area_weights(const Density& d, const DiscreteCurve& c) {
  const std::size_t n = c.size();
  std::vector<double> w(n, 0.0);
  const std::size_t segs = c.closed ? n : n - 1;
  for (std::size_t i = 0; i < segs; ++i) {
    const std::size_t j = (i + 1) % n;
    const double len = std::hypot(c.x[j] - c.x[i], c.t[j] - c.t[i]);
    w[i] += 0.5 * len;
    w[j] += 0.5 * len;
  }
  for (std::size_t i = 0; i < n; ++i)
    w[i] *= std::exp(-d.c() * c.x[i] * c.x[i]) * d.vertical_density(c.t[i]);
  return w;
}

// First and second arclength derivatives of samples u on a curve with
// spacing given by chord lengths: centred three-point formulas inside,
// second-order one-sided stencils at open ends, periodic when closed.
struct Derivatives {
  std::vector<double> d1, d2;
};

inline Derivatives differentiate(const DiscreteCurve& c, const std::vector<double>& u) {
  const std::size_t n = c.size();
  if (u.size() != n) throw ValidationError("sample count does not match the curve");
  Derivatives r{std::vector<double>(n), std::vector<double>(n)};
  auto gap = [&](std::size_t i, std::size_t j) { return std::hypot(c.x[j] - c.x[i], c.t[j] - c.t[i]); };
  auto centred = [&](std::size_t a, std::size_t i, std::size_t b) {
    const double h1 = gap(a, i), h2 = gap(i, b);
    r.d1[i] = (h1 * h1 * (u[b] - u[i]) + h2 * h2 * (u[i] - u[a])) / (h1 * h2 * (h1 + h2));
    r.d2[i] = 2.0 * (h1 * (u[b] - u[i]) - h2 * (u[i] - u[a])) / (h1 * h2 * (h1 + h2));
  };
  if (c.closed) {
    for (std::size_t i = 0; i < n; ++i) centred((i + n - 1) % n, i, (i + 1) % n);
    return r;
  }
  if (n < 4) throw ValidationError("differentiation needs at least four nodes");
  for (std::size_t i = 1; i + 1 < n; ++i) centred(i - 1, i, i + 1);
  // One-sided stencils through four nodes: exact for cubics, so the first
  // derivative is third order and the second derivative second order.
  auto one_sided = [&](std::size_t i0, int dir) {
    double xs[4], ys[4];
    for (int j = 0; j < 4; ++j) {
      const std::size_t idx = static_cast<std::size_t>(static_cast<long>(i0) + dir * j);
      ys[j] = u[idx];
      xs[j] = j == 0 ? 0.0 : xs[j - 1] + dir * gap(static_cast<std::size_t>(static_cast<long>(i0) + dir * (j - 1)), idx);
    }
    // Lagrange basis derivatives at x = 0.
    double d1 = 0.0, d2 = 0.0;
    for (int j = 0; j < 4; ++j) {
      double denom = 1.0;
      for (int m = 0; m < 4; ++m)
        if (m != j) denom *= xs[j] - xs[m];
      // l_j(x) = prod_{m != j}(x - x_m) / denom
      double s1 = 0.0, s2 = 0.0;
      for (int a = 0; a < 4; ++a) {
        if (a == j) continue;
        double p = 1.0;
        for (int m = 0; m < 4; ++m)
          if (m != j && m != a) p *= -xs[m];
        s1 += p;
        for (int b = 0; b < 4; ++b) {
          if (b == j || b == a) continue;
          double q = 1.0;
          for (int m = 0; m < 4; ++m)
            if (m != j && m != a && m != b) q *= -xs[m];
          s2 += q;
        }
      }
      d1 += ys[j] * s1 / denom;
      d2 += ys[j] * s2 / denom;
    }
    r.d1[i0] = d1;
    r.d2[i0] = d2;
  };
  one_sided(0, 1);
  one_sided(n - 1, -1);
  return r;
}

}  // namespace detail

/// -omega'' N_t^2 + 2c for a unit normal N.
inline double ric_normal(const Density& d, double t, double nt) {
  return -d.weight().second_derivative(t) * nt * nt + 2.0 * d.c();
}

/// H_f = k - <grad psi, N> at node i.
inline double f_mean_curvature(const Density& d, const DiscreteCurve& c, std::size_t i) {
  detail::require_planar(d);
  detail::require_smooth(d);
  if (i >= c.size()) throw ValidationError("f_mean_curvature: node index out of range");
  const auto g = detail::grad_psi_2d(d, c.x[i], c.t[i]);
  return c.k[i] - (g.x * c.nx[i] + g.t * c.nt[i]);
}

struct CurvatureSpread {
  double min, max, mean;
  double spread() const { return max - min; }
};

/// Range of H_f over the nodes (interior nodes only for open curves).
inline CurvatureSpread f_mean_curvature_spread(const Density& d, const DiscreteCurve& c) {
  CurvatureSpread r{kInf, -kInf, 0.0};
  const std::size_t lo = c.closed ? 0 : 1;
  const std::size_t hi = c.closed ? c.size() : c.size() - 1;
  if (hi <= lo) throw ValidationError("curve has no interior nodes");
  for (std::size_t i = lo; i < hi; ++i) {
    const double h = f_mean_curvature(d, c, i);
    r.min = std::min(r.min, h);
    r.max = std::max(r.max, h);
    r.mean += h;
  }
  r.mean /= static_cast<double>(hi - lo);
  return r;
}

/// Integrates the unit-speed curve with turning rate H + <grad psi(p), N(theta)>
/// by classical RK4, N(theta) = (-sin theta, cos theta). Stops at max_length
/// or, with a shortened final step, where the curve meets the slab boundary.
inline DiscreteCurve cmc_shoot(const Density& d, double target, double x0, double t0, double theta0,
                               double h, double max_length) {
  detail::require_planar(d);
  detail::require_smooth(d);
  if (!(h > 0) || !(max_length > 0)) throw ValidationError("cmc_shoot: step and length must be positive");
  if (!d.slab().contains_closed(t0)) throw DomainError("cmc_shoot: start point outside the slab");
  const auto steps = static_cast<std::size_t>(std::ceil(max_length / h - 1e-9));
  const double step = max_length / static_cast<double>(steps);

  struct State {
    double x, t, th;
  };
  // RK4 stages may poke slightly past the slab, so only omega's domain is checked.
  auto turning = [&](const State& s) {
    const double gx = -2.0 * d.c() * s.x;
    const double gt = d.weight().derivative(s.t) - 2.0 * d.c() * s.t;
    return target + (-std::sin(s.th) * gx + std::cos(s.th) * gt);
  };
  auto rhs = [&](const State& s) { return State{std::cos(s.th), std::sin(s.th), turning(s)}; };
  auto rk4 = [&](const State& s, double dh) {
    auto add = [](const State& a, const State& b, double f) {
      return State{a.x + f * b.x, a.t + f * b.t, a.th + f * b.th};
    };
    const State k1 = rhs(s);
    const State k2 = rhs(add(s, k1, 0.5 * dh));
    const State k3 = rhs(add(s, k2, 0.5 * dh));
    const State k4 = rhs(add(s, k3, dh));
    return State{s.x + dh / 6 * (k1.x + 2 * k2.x + 2 * k3.x + k4.x),
                 s.t + dh / 6 * (k1.t + 2 * k2.t + 2 * k3.t + k4.t),
                 s.th + dh / 6 * (k1.th + 2 * k2.th + 2 * k3.th + k4.th)};
  };
  auto inside = [&](const State& s) { return d.slab().contains_closed(s.t); };

  std::vector<State> path{{x0, t0, theta0}};
  bool hit = false;
  for (std::size_t i = 0; i < steps; ++i) {
    State next = rk4(path.back(), step);
    if (!inside(next)) {
      // Bisect the step length so that the last node lies on the boundary.
      const double bound = next.t > d.slab().hi ? d.slab().hi : d.slab().lo;
      double lo = 0.0, hi = step;
      for (int it = 0; it < 200 && hi - lo > 1e-15 * step; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (inside(rk4(path.back(), mid))) lo = mid;
        else hi = mid;
      }
      if (lo > 1e-12 * step) {
        next = rk4(path.back(), lo);
        next.t = bound;
        path.push_back(next);
      }
      hit = true;
      break;
    }
    path.push_back(next);
  }

  DiscreteCurve c;
  c.step = step;
  for (const auto& s : path) {
    c.x.push_back(s.x);
    c.t.push_back(s.t);
    c.nx.push_back(-std::sin(s.th));
    c.nt.push_back(std::cos(s.th));
    c.k.push_back(turning(s));
  }
  c.start_on_boundary = t0 == d.slab().lo || t0 == d.slab().hi;
  c.end_on_boundary = hit;
  return c;
}

/// Self-check of a shot curve: max over interior nodes of
/// |theta' - <grad psi, N> - target| with theta' from a fourth-order
/// difference of the normal angle. Only equally spaced nodes are used.
inline double shoot_residual(const Density& d, const DiscreteCurve& c, double target) {
  if (!(c.step > 0)) throw ValidationError("shoot_residual: curve has no nominal step");
  const std::size_t n = c.size();
  std::vector<double> th(n);
  for (std::size_t i = 0; i < n; ++i) th[i] = std::atan2(-c.nx[i], c.nt[i]);
  for (std::size_t i = 1; i < n; ++i) {
    while (th[i] - th[i - 1] > std::numbers::pi) th[i] -= 2 * std::numbers::pi;
    while (th[i] - th[i - 1] < -std::numbers::pi) th[i] += 2 * std::numbers::pi;
  }
  const std::size_t last = c.end_on_boundary ? n - 1 : n;
  double worst = 0.0;
  for (std::size_t i = 2; i + 2 < last; ++i) {
    const double dth = (-th[i + 2] + 8 * th[i + 1] - 8 * th[i - 1] + th[i - 2]) / (12 * c.step);
    const auto g = detail::grad_psi_2d(d, c.x[i], c.t[i]);
    worst = std::max(worst, std::abs(dth - (g.x * c.nx[i] + g.t * c.nt[i]) - target));
  }
  return worst;
}

/// A horizontal direction eta: in_plane along the x axis of the curve's
/// plane, out_of_plane along a further horizontal axis (R^3 sections).
struct HorizontalDirection {
  double in_plane = 1.0;
  double out_of_plane = 0.0;
};

/// max over interior nodes of |L_f h - 2c h| with h = <eta, N>, where
/// L_f h = h'' + <grad psi, T> h' + (Ric_f(N, N) + k^2) h.
inline double jacobi_residual(const Density& d, const DiscreteCurve& c, HorizontalDirection eta,
                              double hf_tolerance = 1e-6) {
  detail::require_planar(d);
  const auto spread = f_mean_curvature_spread(d, c);
  if (spread.spread() > hf_tolerance * (1.0 + std::abs(spread.mean)))
    throw PreconditionError("jacobi_residual: H_f is not constant along the curve");
  const std::size_t n = c.size();
  std::vector<double> h(n);
  for (std::size_t i = 0; i < n; ++i) h[i] = eta.in_plane * c.nx[i];
  const auto der = detail::differentiate(c, h);
  double worst = 0.0;
  const std::size_t lo = c.closed ? 0 : 1;
  std::size_t hi = c.closed ? n : n - 1;
  // A shortened final step makes the stencil lopsided; skip that node.
  if (!c.closed && c.end_on_boundary && hi > lo + 1) --hi;
  for (std::size_t i = lo; i < hi; ++i) {
    const auto g = detail::grad_psi_2d(d, c.x[i], c.t[i]);
    const double psi_s = g.x * c.nt[i] - g.t * c.nx[i];  // T = (N_t, -N_x)
    const double pot = ric_normal(d, c.t[i], c.nt[i]) + c.k[i] * c.k[i];
    const double lh = der.d2[i] + psi_s * der.d1[i] + pot * h[i];
    worst = std::max(worst, std::abs(lh - 2.0 * d.c() * h[i]));
  }
  return worst;
}

struct IndexFormReport {
  double value = 0.0;
  double error_estimate = 0.0;
  double boundary_term = 0.0;
};

namespace detail {

inline double index_form_raw(const Density& d, const DiscreteCurve& c, const std::vector<double>& u,
                             const std::vector<double>& v) {
  const std::size_t n = c.size();
  const std::size_t segs = c.closed ? n : n - 1;
  const double cc = d.c();
  auto f = [&](std::size_t i) { return std::exp(-cc * c.x[i] * c.x[i]) * d.vertical_density(c.t[i]); };
  double grad = 0.0;
  for (std::size_t i = 0; i < segs; ++i) {
    const std::size_t j = (i + 1) % n;
    const double len = std::hypot(c.x[j] - c.x[i], c.t[j] - c.t[i]);
    grad += (u[j] - u[i]) * (v[j] - v[i]) / len * 0.5 * (f(i) + f(j));
  }
  const auto w = area_weights(d, c);
  double pot = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    pot += w[i] * (ric_normal(d, c.t[i], c.nt[i]) + c.k[i] * c.k[i]) * u[i] * v[i];
  return grad - pot;
}

inline DiscreteCurve every_other(const DiscreteCurve& c) {
  DiscreteCurve r;
  r.closed = c.closed;
  for (std::size_t i = 0; i < c.size(); i += 2) {
    r.x.push_back(c.x[i]);
    r.t.push_back(c.t[i]);
    r.nx.push_back(c.nx[i]);
    r.nt.push_back(c.nt[i]);
    r.k.push_back(c.k[i]);
  }
  return r;
}

template <class T>
std::vector<T> every_other(const std::vector<T>& u) {
  std::vector<T> r;
  for (std::size_t i = 0; i < u.size(); i += 2) r.push_back(u[i]);
  return r;
}

}  // namespace detail

/// I_f(u, v) = int (u' v' - (Ric_f(N, N) + k^2) u v) da_f with trapezoid
/// weights. Slab boundaries are totally geodesic, so no boundary term. The
/// error estimate compares against the same sum on every other node.
inline IndexFormReport index_form(const Density& d, const DiscreteCurve& c, const std::vector<double>& u,
                                  const std::vector<double>& v) {
  detail::require_planar(d);
  if (u.size() != c.size() || v.size() != c.size())
    throw ValidationError("index_form: sample count does not match the curve");
  IndexFormReport r;
  r.value = detail::index_form_raw(d, c, u, v);
  const bool coarse_ok = c.closed ? c.size() % 2 == 0 && c.size() >= 6 : c.size() % 2 == 1 && c.size() >= 5;
  if (coarse_ok) {
    const double coarse = detail::index_form_raw(d, detail::every_other(c), detail::every_other(u),
                                                 detail::every_other(v));
    r.error_estimate = std::abs(r.value - coarse) / 3.0;
  }
  return r;
}

/// Q_f(u, u) = -int u L_f(u) da_f - int_{boundary} u du/dnu dl_f, with nu the
/// outward conormal (T at the end node, -T at the start node).
inline IndexFormReport q_form(const Density& d, const DiscreteCurve& c, const std::vector<double>& u) {
  detail::require_planar(d);
  const std::size_t n = c.size();
  const auto der = detail::differentiate(c, u);
  const auto w = detail::area_weights(d, c);
  auto qsum = [&](const DiscreteCurve& cv, const std::vector<double>& uu, const detail::Derivatives& dd,
                  const std::vector<double>& ww) {
    double acc = 0.0;
    for (std::size_t i = 0; i < cv.size(); ++i) {
      const auto g = detail::grad_psi_2d(d, cv.x[i], cv.t[i]);
      const double psi_s = g.x * cv.nt[i] - g.t * cv.nx[i];
      const double pot = ric_normal(d, cv.t[i], cv.nt[i]) + cv.k[i] * cv.k[i];
      acc -= ww[i] * uu[i] * (dd.d2[i] + psi_s * dd.d1[i] + pot * uu[i]);
    }
    return acc;
  };
  IndexFormReport r;
  r.value = qsum(c, u, der, w);
  if (!c.closed) {
    auto f = [&](std::size_t i) {
      return std::exp(-d.c() * c.x[i] * c.x[i]) * d.vertical_density(c.t[i]);
    };
    r.boundary_term = -(f(n - 1) * u[n - 1] * der.d1[n - 1]) + f(0) * u[0] * der.d1[0];
    r.value += r.boundary_term;
  }
  const bool coarse_ok = c.closed ? n % 2 == 0 && n >= 6 : n % 2 == 1 && n >= 9;
  if (coarse_ok) {
    const auto cc = detail::every_other(c);
    const auto uc = detail::every_other(u);
    const auto dc = detail::differentiate(cc, uc);
    double coarse = qsum(cc, uc, dc, detail::area_weights(d, cc));
    if (!c.closed) {
      const std::size_t m = cc.size();
      auto f = [&](std::size_t i) {
        return std::exp(-d.c() * cc.x[i] * cc.x[i]) * d.vertical_density(cc.t[i]);
      };
      coarse += -(f(m - 1) * uc[m - 1] * dc.d1[m - 1]) + f(0) * uc[0] * dc.d1[0];
    }
    r.error_estimate = std::abs(r.value - coarse) / 3.0;
  }
  return r;
}

struct TestFunction {
  std::vector<double> u;
  double alpha = 0.0;
  bool degenerate = false;
};

/// u = alpha + <eta, N> with alpha chosen so that int u da_f = 0.
inline TestFunction translation_test_function(const Density& d, const DiscreteCurve& c,
                                              HorizontalDirection eta) {
  detail::require_planar(d);
  const auto w = detail::area_weights(d, c);
  double area = 0.0, hint = 0.0;
  std::vector<double> h(c.size());
  bool zero = true;
  for (std::size_t i = 0; i < c.size(); ++i) {
    h[i] = eta.in_plane * c.nx[i];
    zero = zero && h[i] == 0.0;
    area += w[i];
    hint += w[i] * h[i];
  }
  if (!(area > 0)) throw DegenerateError("translation_test_function: curve has zero weighted length");
  TestFunction r;
  r.alpha = -hint / area;
  if (zero) {
    r.u = std::move(h);
    r.degenerate = true;
    return r;
  }
  r.u.resize(c.size());
  for (std::size_t i = 0; i < c.size(); ++i) r.u[i] = r.alpha + h[i];
  return r;
}

struct StabilityVerdict {
  bool stable = false;
  double omega2 = 0.0;
  double witness = 0.0;      // I_f(x, x) on a discretized horizontal line
  double closed_form = 0.0;  // omega'' e^{omega - c t0^2} sqrt(pi/c) / (2c)
  double witness_error = 0.0;
};

/// The horizontal line t = t0 bounds a stable half-space iff omega''(t0) >= 0.
/// The witness is the index form of the coordinate function u = x.
inline StabilityVerdict parallel_halfspace_stability(const Density& d, double t0, int nodes = 4001) {
  detail::require_planar(d);
  if (!d.slab().contains(t0)) throw DomainError("parallel_halfspace_stability: t0 must lie inside the slab");
  StabilityVerdict v;
  v.omega2 = d.weight().second_derivative(t0);
  v.stable = v.omega2 >= 0.0;
  const double c = d.c();
  v.closed_form = v.omega2 * d.vertical_density(t0) * std::sqrt(std::numbers::pi / c) / (2.0 * c);

  const double half = std::sqrt(80.0 / c);
  std::vector<double> x(nodes), t(nodes, t0);
  for (int i = 0; i < nodes; ++i) x[i] = -half + 2.0 * half * i / (nodes - 1);
  auto line = make_curve(x, t);
  line.step = 2.0 * half / (nodes - 1);
  auto rep = index_form(d, line, x, x);
  v.witness = rep.value;
  v.witness_error = rep.error_estimate;
  return v;
}

/// Vertical segment x = x0 across the slab, cut to the tail window at
/// infinite ends and kept off a singular endpoint of omega.
inline DiscreteCurve vertical_line(const Density& d, double x0, int nodes, const QuadratureSpec& spec = {}) {
  detail::require_planar(d);
  if (nodes < 5) throw ValidationError("vertical_line: need at least five nodes");
  const auto win = tail_window(d, spec);
  double lo = win.lo, hi = win.hi;
  if (lo <= d.weight().domain_lo() && std::holds_alternative<Weight1D::LogPower>(d.weight().variant()))
    lo += 1e-6 * (hi - lo);
  std::vector<double> x(nodes, x0), t(nodes);
  for (int i = 0; i < nodes; ++i) t[i] = lo + (hi - lo) * i / (nodes - 1);
  auto c = make_curve(std::move(x), std::move(t));
  c.step = (hi - lo) / (nodes - 1);
  return c;
}

/// Random smooth function on an open curve with zero f-weighted mean.
inline std::vector<double> random_mean_zero(const Density& d, const DiscreteCurve& c, std::mt19937_64& rng) {
  std::normal_distribution<double> z(0.0, 1.0);
  const auto s = detail::arclength(c);
  const double len = s.back();
  if (!(len > 0)) throw DegenerateError("random_mean_zero: curve has zero length");
  double a[6];
  for (double& v : a) v = z(rng);
  std::vector<double> u(c.size());
  for (std::size_t i = 0; i < u.size(); ++i) {
    const double r = 2.0 * s[i] / len - 1.0;
    u[i] = a[0] * r + a[1] * r * r + a[2] * r * r * r + a[3] * std::sin(3 * r) + a[4] * std::cos(5 * r) +
           a[5] * std::sin(9 * r);
  }
  const auto w = detail::area_weights(d, c);
  double mass = 0.0, mean = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    mass += w[i];
    mean += w[i] * u[i];
  }
  if (!(mass > 0)) throw DegenerateError("random_mean_zero: curve carries no weight");
  for (double& v : u) v -= mean / mass;
  return u;
}

}  // namespace isoflow
