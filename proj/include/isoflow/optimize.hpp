#pragma once

// Weighted-length minimization over chords x = X(t) crossing a planar slab,
// at fixed weighted area of the region {x < X(t)}.

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <random>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "isoflow/curve.hpp"
#include "isoflow/errors.hpp"
#include "isoflow/io.hpp"
#include "isoflow/quadrature.hpp"
#include "isoflow/weights.hpp"

namespace isoflow {

/// Clamped uniform cubic B-spline X(t) on [lo, hi].
class ChordSpline {
 public:
  static constexpr int kMinControls = 8;
  static constexpr int kMaxControls = 32;

  ChordSpline(double lo, double hi, std::vector<double> coef) : lo_(lo), hi_(hi), coef_(std::move(coef)) {
    const int m = static_cast<int>(coef_.size());
    if (m < kMinControls || m > kMaxControls)
      throw ValidationError("chord spline needs between 8 and 32 control points");
    if (!(std::isfinite(lo_) && std::isfinite(hi_) && lo_ < hi_))
      throw ValidationError("chord spline needs a finite interval");
    for (double c : coef_)
      if (!std::isfinite(c)) throw ValidationError("chord spline has a non-finite control abscissa");
    knots_.assign(4, lo_);
    const int spans = m - 3;
    for (int i = 1; i < spans; ++i) knots_.push_back(lo_ + (hi_ - lo_) * i / spans);
    knots_.insert(knots_.end(), 4, hi_);
  }

  /// Straight line through (x_mid, midpoint) with dx/dt = slope; exact
  /// because control points at the Greville abscissae reproduce lines.
  static ChordSpline line(double lo, double hi, int controls, double x_mid, double slope) {
    std::vector<double> c(controls);
    ChordSpline tmp(lo, hi, std::vector<double>(controls, 0.0));
    const double mid = 0.5 * (lo + hi);
    for (int j = 0; j < controls; ++j) c[j] = x_mid + slope * (tmp.greville(j) - mid);
    return ChordSpline(lo, hi, std::move(c));
  }

  double lo() const { return lo_; }
  double hi() const { return hi_; }
  int size() const { return static_cast<int>(coef_.size()); }
  int spans() const { return size() - 3; }
  const std::vector<double>& coef() const { return coef_; }
  std::vector<double>& coef() { return coef_; }
  double span_lo(int s) const { return knots_[s + 3]; }
  double span_hi(int s) const { return knots_[s + 4]; }

  double greville(int j) const { return (knots_[j + 1] + knots_[j + 2] + knots_[j + 3]) / 3.0; }

  /// Nonzero basis functions at t: B_{first + r}^{(d)}(t) = vals[d][r].
  struct Basis {
    int first;
    std::array<std::array<double, 4>, 3> vals;
  };

  Basis basis(double t) const {
    if (t < lo_ || t > hi_) throw DomainError("chord spline evaluated outside its interval");
    int span = 3;
    while (span < size() - 1 && t >= knots_[span + 1]) ++span;
    // Derivatives of the basis functions (Piegl & Tiller, A2.3).
    double ndu[4][4], left[4], right[4];
    ndu[0][0] = 1.0;
    for (int j = 1; j <= 3; ++j) {
      left[j] = t - knots_[span + 1 - j];
      right[j] = knots_[span + j] - t;
      double saved = 0.0;
      for (int r = 0; r < j; ++r) {
        ndu[j][r] = right[r + 1] + left[j - r];
        const double tmp = ndu[r][j - 1] / ndu[j][r];
        ndu[r][j] = saved + right[r + 1] * tmp;
        saved = left[j - r] * tmp;
      }
      ndu[j][j] = saved;
    }
    Basis b{span - 3, {}};
    for (int j = 0; j <= 3; ++j) b.vals[0][j] = ndu[j][3];
    double a[2][4];
    for (int r = 0; r <= 3; ++r) {
      int s1 = 0, s2 = 1;
      a[0][0] = 1.0;
      for (int k = 1; k <= 2; ++k) {
        double d = 0.0;
        const int rk = r - k, pk = 3 - k;
        if (r >= k) {
          a[s2][0] = a[s1][0] / ndu[pk + 1][rk];
          d = a[s2][0] * ndu[rk][pk];
        }
        const int j1 = rk >= -1 ? 1 : -rk;
        const int j2 = r - 1 <= pk ? k - 1 : 3 - r;
        for (int j = j1; j <= j2; ++j) {
          a[s2][j] = (a[s1][j] - a[s1][j - 1]) / ndu[pk + 1][rk + j];
          d += a[s2][j] * ndu[rk + j][pk];
        }
        if (r <= pk) {
          a[s2][k] = -a[s1][k - 1] / ndu[pk + 1][r];
          d += a[s2][k] * ndu[r][pk];
        }
        b.vals[k][r] = d;
        std::swap(s1, s2);
      }
    }
    b.vals[1] = {b.vals[1][0] * 3, b.vals[1][1] * 3, b.vals[1][2] * 3, b.vals[1][3] * 3};
    b.vals[2] = {b.vals[2][0] * 6, b.vals[2][1] * 6, b.vals[2][2] * 6, b.vals[2][3] * 6};
    return b;
  }

  /// X, X', X'' at t.
  std::array<double, 3> eval(double t) const {
    const auto b = basis(t);
    std::array<double, 3> r{0, 0, 0};
    for (int d = 0; d < 3; ++d)
      for (int j = 0; j < 4; ++j) r[d] += b.vals[d][j] * coef_[b.first + j];
    return r;
  }

 private:
  double lo_, hi_;
  std::vector<double> coef_;
  std::vector<double> knots_;
};

namespace detail {

inline void require_chord_density(const Density& d) {
  if (d.ambient_dim() < 2) throw ValidationError("chords need at least one horizontal direction");
  if (d.weight().smoothness() != Smoothness::Smooth)
    throw SmoothnessError("the shape gradient needs a smooth weight");
}

inline constexpr int kSubspans = 8;

// Calls fn(t, weight) on 16 Gauss-Legendre nodes per sub-span.
template <class Fn>
void for_each_node(const ChordSpline& x, Fn&& fn) {
  const auto& gl = gauss_legendre(16);
  for (int s = 0; s < x.spans(); ++s) {
    const double h = (x.span_hi(s) - x.span_lo(s)) / kSubspans;
    for (int k = 0; k < kSubspans; ++k) {
      const double a = x.span_lo(s) + k * h, b = a + h;
      for (std::size_t g = 0; g < gl.nodes.size(); ++g)
        fn(0.5 * (a + b) + 0.5 * (b - a) * gl.nodes[g], 0.5 * (b - a) * gl.weights[g]);
    }
  }
}

inline double chord_factor(const Density& d) { return gaussian_factor(d.horizontal_dim() - 1, d.c()); }

// Checks that the chord spans the (possibly truncated) slab.
inline void require_spanning(const Density& d, const ChordSpline& x) {
  const auto& s = d.slab();
  if ((std::isfinite(s.lo) && x.lo() != s.lo) || (std::isfinite(s.hi) && x.hi() != s.hi))
    throw ValidationError("chord must run from the bottom to the top of the slab");
  if (x.lo() < s.lo || x.hi() > s.hi) throw ValidationError("chord leaves the slab");
}

}  // namespace detail

/// Interval a chord should span: the slab, truncated by the tail rule where
/// it is infinite.
inline std::pair<double, double> chord_interval(const Density& d, const QuadratureSpec& spec = {}) {
  const auto w = tail_window(d, spec);
  return {w.lo, w.hi};
}

/// Integral of f along the chord: g^{n-1} int rho(t) e^{-c X^2} sqrt(1 + X'^2) dt.
inline double weighted_length(const Density& d, const ChordSpline& x) {
  detail::require_spanning(d, x);
  double sum = 0.0;
  const double c = d.c();
  detail::for_each_node(x, [&](double t, double w) {
    const auto e = x.eval(t);
    sum += w * d.vertical_density(t) * std::exp(-c * e[0] * e[0]) * std::sqrt(1.0 + e[1] * e[1]);
  });
  return detail::chord_factor(d) * sum;
}

/// Weighted area of {x < X(t)}: g^{n-1} int rho(t) Phi_c(X(t)) dt.
inline double enclosed_area(const Density& d, const ChordSpline& x) {
  detail::require_spanning(d, x);
  double sum = 0.0;
  detail::for_each_node(x, [&](double t, double w) {
    sum += w * d.vertical_density(t) * gaussian_mass_below(d.c(), x.eval(t)[0]);
  });
  return detail::chord_factor(d) * sum;
}

struct ShapeGradient {
  std::vector<double> length;  // dL/dc_j
  std::vector<double> area;    // dV/dc_j
};

/// First-variation gradients: moving control j moves the chord horizontally
/// by B_j, whose normal component against the inner normal
/// N = (-1, X')/sqrt(1 + X'^2) gives
///   dL/dc_j = int H_f B_j f dt + [f B_j X'/sqrt(1 + X'^2)]_bottom^top,
///   dV/dc_j = int B_j f dt.
inline ShapeGradient shape_gradient(const Density& d, const ChordSpline& x) {
  detail::require_chord_density(d);
  detail::require_spanning(d, x);
  const int m = x.size();
  const double c = d.c();
  ShapeGradient g{std::vector<double>(m, 0.0), std::vector<double>(m, 0.0)};
  detail::for_each_node(x, [&](double t, double w) {
    const auto b = x.basis(t);
    double X = 0, X1 = 0, X2 = 0;
    for (int j = 0; j < 4; ++j) {
      X += b.vals[0][j] * x.coef()[b.first + j];
      X1 += b.vals[1][j] * x.coef()[b.first + j];
      X2 += b.vals[2][j] * x.coef()[b.first + j];
    }
    const double q = std::sqrt(1.0 + X1 * X1);
    const double f = d.vertical_density(t) * std::exp(-c * X * X);
    const double k = -X2 / (q * q * q);
    const double grad_n = (2.0 * c * X + (d.weight().derivative(t) - 2.0 * c * t) * X1) / q;
    const double hf = k - grad_n;
    for (int j = 0; j < 4; ++j) {
      g.length[b.first + j] += w * hf * b.vals[0][j] * f;
      g.area[b.first + j] += w * b.vals[0][j] * f;
    }
  });
  auto boundary = [&](double t, double sign) {
    const auto e = x.eval(t);
    const double f = d.vertical_density(t) * std::exp(-c * e[0] * e[0]);
    const auto b = x.basis(t);
    for (int j = 0; j < 4; ++j)
      g.length[b.first + j] += sign * f * b.vals[0][j] * e[1] / std::sqrt(1.0 + e[1] * e[1]);
  };
  boundary(x.hi(), 1.0);
  boundary(x.lo(), -1.0);
  const double factor = detail::chord_factor(d);
  for (int j = 0; j < m; ++j) {
    g.length[j] *= factor;
    g.area[j] *= factor;
  }
  return g;
}

struct StationarityReport {
  bool stationary = false;
  double hf_min = 0.0, hf_max = 0.0, hf_mean = 0.0;
  double angle_bottom_deg = 0.0;  // deviation from meeting the boundary at 90 degrees
  double angle_top_deg = 0.0;
  double hf_spread() const { return hf_max - hf_min; }
};

/// H_f spread over the quadrature nodes and boundary angle deviations.
inline StationarityReport stationarity_report(const Density& d, const ChordSpline& x) {
  detail::require_chord_density(d);
  StationarityReport r;
  r.hf_min = kInf;
  r.hf_max = -kInf;
  double count = 0.0;
  const double c = d.c();
  detail::for_each_node(x, [&](double t, double) {
    const auto e = x.eval(t);
    const double q = std::sqrt(1.0 + e[1] * e[1]);
    const double hf = -e[2] / (q * q * q) - (2.0 * c * e[0] + (d.weight().derivative(t) - 2.0 * c * t) * e[1]) / q;
    r.hf_min = std::min(r.hf_min, hf);
    r.hf_max = std::max(r.hf_max, hf);
    r.hf_mean += hf;
    count += 1.0;
  });
  r.hf_mean /= count;
  const double deg = 180.0 / std::numbers::pi;
  r.angle_bottom_deg = std::atan(std::abs(x.eval(x.lo())[1])) * deg;
  r.angle_top_deg = std::atan(std::abs(x.eval(x.hi())[1])) * deg;
  const bool ends_free_b = !std::isfinite(d.slab().lo);
  const bool ends_free_t = !std::isfinite(d.slab().hi);
  r.stationary = r.hf_spread() <= 1e-3 * (1.0 + std::abs(r.hf_mean)) &&
                 (ends_free_b || r.angle_bottom_deg <= 0.5) && (ends_free_t || r.angle_top_deg <= 0.5);
  return r;
}

struct OptimizerConfig {
  double target_area = 0.0;
  double armijo = 1e-4;
  double backtrack = 0.5;
  int max_backtracks = 60;
  double constraint_tol = 1e-12;  // relative to V_tot
  int max_iterations = 500;
  double grad_tol = 1e-9;
};

struct TraceRow {
  int iter;
  double length;
  double area_err;
  double grad_norm;
};

enum class OptimizerStatus { Converged, IterationLimit, Stalled };

inline std::string_view optimizer_status_name(OptimizerStatus s) {
  switch (s) {
    case OptimizerStatus::Converged: return "converged";
    case OptimizerStatus::IterationLimit: return "iteration-limit";
    case OptimizerStatus::Stalled: return "stalled";
  }
  return "unknown";
}

struct OptimizerResult {
  ChordSpline chord;
  std::vector<TraceRow> trace;
  OptimizerStatus status = OptimizerStatus::IterationLimit;
  StationarityReport stationarity;
  double length = 0.0;
  double area = 0.0;
};

namespace detail {

// H^1 Gram matrix int (B_i B_j + B_i' B_j') dt.
inline Eigen::MatrixXd h1_metric(const ChordSpline& x) {
  const int m = x.size();
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(m, m);
  for_each_node(x, [&](double t, double w) {
    const auto b = x.basis(t);
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j)
        g(b.first + i, b.first + j) += w * (b.vals[0][i] * b.vals[0][j] + b.vals[1][i] * b.vals[1][j]);
  });
  return g;
}

// Shifts the chord horizontally until its area matches the target.
inline void restore_area(const Density& d, ChordSpline& x, double target, double tol) {
  for (int it = 0; it < 100; ++it) {
    const double err = enclosed_area(d, x) - target;
    if (std::abs(err) <= tol) return;
    double dv = 0.0;
    for (double a : shape_gradient(d, x).area) dv += a;
    if (!(dv > 0)) throw ConvergenceError("area restoration: chord carries no weight", err, std::abs(err));
    double delta = -err / dv;
    const double limit = 2.0 / std::sqrt(d.c());
    delta = std::clamp(delta, -limit, limit);
    for (double& c : x.coef()) c += delta;
  }
  throw ConvergenceError("area restoration did not converge", enclosed_area(d, x) - target, 0.0);
}

}  // namespace detail

/// Projected gradient descent in the H^1 metric with area restoration by
/// horizontal translation and Armijo backtracking.
inline OptimizerResult minimize(const Density& d, const OptimizerConfig& cfg, ChordSpline chord) {
  detail::require_chord_density(d);
  detail::require_spanning(d, chord);
  const double vtot = gaussian_factor(d.horizontal_dim(), d.c()) *
                      vertical_mass(d, chord.lo(), chord.hi()).value;
  if (!(cfg.target_area > 0 && cfg.target_area < vtot))
    throw ValidationError("optimizer target area must lie in (0, V_tot)");
  const double tol = cfg.constraint_tol * vtot;
  detail::restore_area(d, chord, cfg.target_area, tol);

  const auto metric = detail::h1_metric(chord).ldlt();
  const int m = chord.size();
  OptimizerResult res{chord, {}, OptimizerStatus::IterationLimit, {}, 0.0, 0.0};
  double length = weighted_length(d, chord);
  double tau = 1.0;
  for (int iter = 0;; ++iter) {
    const auto g = shape_gradient(d, chord);
    const Eigen::Map<const Eigen::VectorXd> gl(g.length.data(), m), gv(g.area.data(), m);
    const Eigen::VectorXd ml = metric.solve(gl), mv = metric.solve(gv);
    const double mu = gv.dot(ml) / gv.dot(mv);
    const Eigen::VectorXd dir = -(ml - mu * mv);
    const double gnorm = std::sqrt(std::max(0.0, -gl.dot(dir)));
    res.trace.push_back({iter, length, enclosed_area(d, chord) - cfg.target_area, gnorm});
    if (gnorm < cfg.grad_tol) {
      res.status = OptimizerStatus::Converged;
      break;
    }
    if (iter >= cfg.max_iterations) break;

    bool accepted = false;
    tau = std::min(1.0, 2.0 * tau);
    for (int bt = 0; bt < cfg.max_backtracks; ++bt, tau *= cfg.backtrack) {
      ChordSpline trial = chord;
      for (int j = 0; j < m; ++j) trial.coef()[j] += tau * dir(j);
      try {
        detail::restore_area(d, trial, cfg.target_area, tol);
      } catch (const ConvergenceError&) {
        continue;
      }
      const double trial_len = weighted_length(d, trial);
      if (trial_len <= length - cfg.armijo * tau * gnorm * gnorm) {
        chord = std::move(trial);
        length = trial_len;
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      res.status = OptimizerStatus::Stalled;
      break;
    }
  }
  res.chord = chord;
  res.length = length;
  res.area = enclosed_area(d, chord);
  res.stationarity = stationarity_report(d, chord);
  return res;
}

/// CSV with header iter,length,area_err,grad_norm.
inline void write_trace_csv(std::ostream& os, const std::vector<TraceRow>& trace) {
  write_csv_header(os, {"iter", "length", "area_err", "grad_norm"});
  for (const auto& r : trace) write_csv_row(os, {static_cast<double>(r.iter), r.length, r.area_err, r.grad_norm});
}

/// Samples the chord as a curve with inner normals (-1, X')/sqrt(1 + X'^2).
inline DiscreteCurve chord_curve(const ChordSpline& x, int samples) {
  if (samples < 2) throw ValidationError("chord_curve: need at least two samples");
  DiscreteCurve c;
  for (int i = 0; i < samples; ++i) {
    const double t = i == samples - 1 ? x.hi() : x.lo() + (x.hi() - x.lo()) * i / (samples - 1);
    const auto e = x.eval(t);
    const double q = std::sqrt(1.0 + e[1] * e[1]);
    c.x.push_back(e[0]);
    c.t.push_back(t);
    c.nx.push_back(-1.0 / q);
    c.nt.push_back(e[1] / q);
    c.k.push_back(-e[2] / (q * q * q));
  }
  c.start_on_boundary = c.end_on_boundary = true;
  return c;
}

/// Random chord: a line with offset ~ N(0, spread) and slope uniform in
/// (-max_slope, max_slope), plus independent N(0, wiggle) control noise.
inline ChordSpline random_chord(double lo, double hi, int controls, double spread, double max_slope,
                                double wiggle, std::mt19937_64& rng) {
  std::normal_distribution<double> z(0.0, 1.0);
  std::uniform_real_distribution<double> u(-max_slope, max_slope);
  const double offset = spread * z(rng);
  const double slope = u(rng);
  auto x = ChordSpline::line(lo, hi, controls, offset, slope);
  for (double& c : x.coef()) c += wiggle * z(rng);
  return x;
}

}  // namespace isoflow
