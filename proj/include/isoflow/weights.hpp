#pragma once

// Density model f = exp(omega(t) - c |p|^2) on R^n x (a, b), where t is the
// last (vertical) coordinate of p and omega is a concave perturbation.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "isoflow/errors.hpp"
#include "isoflow/quadrature.hpp"

namespace isoflow {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

enum class Smoothness { Smooth, Continuous };

/// Concave perturbation omega of the Gaussian exponent.
class Weight1D {
 public:
  struct Zero {};
  struct Affine {
    double slope = 0.0;
    double intercept = 0.0;
  };
  /// omega(t) = -curvature t^2 + slope t + intercept
  struct Quadratic {
    double curvature = 0.0;
    double slope = 0.0;
    double intercept = 0.0;
  };
  /// omega(t) = exponent * ln t on (0, inf)
  struct LogPower {
    double exponent = 0.0;
  };
  struct PiecewiseLinear {
    std::vector<double> knots;
    std::vector<double> values;
  };
  using Variant = std::variant<Zero, Affine, Quadratic, LogPower, PiecewiseLinear>;

  Weight1D() = default;

  static Weight1D zero() { return Weight1D(Zero{}); }
  static Weight1D affine(double slope, double intercept) {
    return Weight1D(Affine{slope, intercept});
  }
  static Weight1D quadratic(double curvature, double slope, double intercept) {
    return Weight1D(Quadratic{curvature, slope, intercept});
  }
  static Weight1D log_power(double exponent) { return Weight1D(LogPower{exponent}); }
  static Weight1D piecewise_linear(std::vector<double> knots, std::vector<double> values) {
    if (knots.size() < 2 || knots.size() != values.size())
      throw ValidationError("piecewise_linear: need at least two knots and one value per knot");
    for (std::size_t i = 0; i + 1 < knots.size(); ++i)
      if (!(knots[i] < knots[i + 1]))
        throw ValidationError("piecewise_linear: knots must be strictly increasing");
    for (double v : values)
      if (!std::isfinite(v)) throw ValidationError("piecewise_linear: values must be finite");
    return Weight1D(PiecewiseLinear{std::move(knots), std::move(values)});
  }

  const Variant& variant() const noexcept { return v_; }

  std::string_view kind() const {
    constexpr std::string_view names[] = {"zero", "affine", "quadratic", "log_power",
                                          "piecewise_linear"};
    return names[v_.index()];
  }

  Smoothness smoothness() const noexcept {
    return std::holds_alternative<PiecewiseLinear>(v_) ? Smoothness::Continuous
                                                       : Smoothness::Smooth;
  }

  double domain_lo() const {
    if (std::holds_alternative<LogPower>(v_)) return 0.0;
    if (auto* pl = std::get_if<PiecewiseLinear>(&v_)) return pl->knots.front();
    return -kInf;
  }
  double domain_hi() const {
    if (auto* pl = std::get_if<PiecewiseLinear>(&v_)) return pl->knots.back();
    return kInf;
  }

  /// Knots of a piecewise-linear weight (empty otherwise).
  std::span<const double> knots() const {
    if (auto* pl = std::get_if<PiecewiseLinear>(&v_)) return pl->knots;
    return {};
  }

  /// True when omega'' vanishes identically.
  bool is_affine() const {
    return std::visit(
        [](const auto& w) -> bool {
          using T = std::decay_t<decltype(w)>;
          if constexpr (std::is_same_v<T, Quadratic>) return w.curvature == 0.0;
          else if constexpr (std::is_same_v<T, LogPower>) return w.exponent == 0.0;
          else if constexpr (std::is_same_v<T, PiecewiseLinear>) {
            for (std::size_t i = 1; i + 1 < w.knots.size(); ++i)
              if (slope_of(w, i) != slope_of(w, i - 1)) return false;
            return true;
          } else return true;
        },
        v_);
  }

  double value(double t) const {
    check_closed_domain(t);
    return std::visit(
        [t](const auto& w) -> double {
          using T = std::decay_t<decltype(w)>;
          if constexpr (std::is_same_v<T, Zero>) return 0.0;
          else if constexpr (std::is_same_v<T, Affine>) return w.slope * t + w.intercept;
          else if constexpr (std::is_same_v<T, Quadratic>)
            return (-w.curvature * t + w.slope) * t + w.intercept;
          else if constexpr (std::is_same_v<T, LogPower>) {
            if (w.exponent == 0.0) return 0.0;
            return w.exponent * std::log(t);
          } else {
            const std::size_t i = segment_of(w, t);
            const double u = (t - w.knots[i]) / (w.knots[i + 1] - w.knots[i]);
            return (1.0 - u) * w.values[i] + u * w.values[i + 1];
          }
        },
        v_);
  }

  /// exp(omega(t)); well defined at t = 0 for LogPower.
  double exp_value(double t) const {
    if (auto* lp = std::get_if<LogPower>(&v_)) {
      check_closed_domain(t);
      return lp->exponent == 0.0 ? 1.0 : std::pow(t, lp->exponent);
    }
    return std::exp(value(t));
  }

  /// omega'(t). Piecewise-linear weights throw NonDifferentiableError at knots.
  double derivative(double t) const {
    if (auto* pl = std::get_if<PiecewiseLinear>(&v_)) {
      check_closed_domain(t);
      for (double k : pl->knots)
        if (t == k)
          throw NonDifferentiableError("omega is not differentiable at knot t=" + fmt(t));
      return slope_of(*pl, segment_of(*pl, t));
    }
    check_open_domain(t);
    return smooth_derivative(t);
  }

  /// One-sided derivative from the right (left when right=false).
  double one_sided_derivative(double t, bool right) const {
    if (auto* pl = std::get_if<PiecewiseLinear>(&v_)) {
      check_closed_domain(t);
      const auto& k = pl->knots;
      std::size_t i = segment_of(*pl, t);
      if (right && t == k[i + 1] && i + 2 < k.size()) ++i;
      if (!right && t == k[i] && i > 0) --i;
      return slope_of(*pl, i);
    }
    check_open_domain(t);
    return smooth_derivative(t);
  }

  /// omega''(t). Throws SmoothnessError for C0 weights.
  double second_derivative(double t) const {
    if (std::holds_alternative<PiecewiseLinear>(v_))
      throw SmoothnessError("omega'' requested for a piecewise-linear (C0) weight");
    check_open_domain(t);
    return std::visit(
        [t](const auto& w) -> double {
          using T = std::decay_t<decltype(w)>;
          if constexpr (std::is_same_v<T, Quadratic>) return -2.0 * w.curvature;
          else if constexpr (std::is_same_v<T, LogPower>) return -w.exponent / (t * t);
          else return 0.0;
        },
        v_);
  }

  /// Chord slopes of a piecewise-linear weight.
  static double slope_of(const PiecewiseLinear& w, std::size_t i) {
    return (w.values[i + 1] - w.values[i]) / (w.knots[i + 1] - w.knots[i]);
  }

 private:
  explicit Weight1D(Variant v) : v_(std::move(v)) {}

  static std::string fmt(double x) {
    std::ostringstream os;
    os.precision(17);
    os << x;
    return os.str();
  }

  static std::size_t segment_of(const PiecewiseLinear& w, double t) {
    auto it = std::upper_bound(w.knots.begin(), w.knots.end(), t);
    std::size_t i = it == w.knots.begin() ? 0 : static_cast<std::size_t>(it - w.knots.begin()) - 1;
    return std::min(i, w.knots.size() - 2);
  }

  double smooth_derivative(double t) const {
    return std::visit(
        [t](const auto& w) -> double {
          using T = std::decay_t<decltype(w)>;
          if constexpr (std::is_same_v<T, Affine>) return w.slope;
          else if constexpr (std::is_same_v<T, Quadratic>) return -2.0 * w.curvature * t + w.slope;
          else if constexpr (std::is_same_v<T, LogPower>) return w.exponent / t;
          else return 0.0;
        },
        v_);
  }

  void check_closed_domain(double t) const {
    if (std::isnan(t) || t < domain_lo() || t > domain_hi())
      throw DomainError("t=" + fmt(t) + " is outside the domain of omega");
  }
  void check_open_domain(double t) const {
    check_closed_domain(t);
    if (std::holds_alternative<LogPower>(v_) && t <= 0.0)
      throw DomainError("log-power weight requires t > 0, got t=" + fmt(t));
  }

  Variant v_ = Zero{};
};

/// Vertical interval (a, b); infinite endpoints allowed.
struct Slab {
  double lo = -kInf;
  double hi = kInf;

  bool whole_line() const { return std::isinf(lo) && std::isinf(hi); }
  bool bounded() const { return std::isfinite(lo) && std::isfinite(hi); }
  bool contains(double t) const { return t > lo && t < hi; }
  bool contains_closed(double t) const { return t >= lo && t <= hi; }
};

/// Full density model: weight, Gaussian rate c, ambient dimension n+1 and slab.
class Density {
 public:
  Density(Weight1D weight, double c, int ambient_dim, Slab slab)
      : weight_(std::move(weight)), c_(c), ambient_dim_(ambient_dim), slab_(slab) {
    if (!(c_ > 0.0) || !std::isfinite(c_)) throw ValidationError("density: c must be positive");
    if (ambient_dim_ < 1) throw ValidationError("density: ambient dimension must be >= 1");
    if (std::isnan(slab_.lo) || std::isnan(slab_.hi) || !(slab_.lo < slab_.hi))
      throw ValidationError("density: slab requires a < b");
    if (slab_.lo == kInf || slab_.hi == -kInf)
      throw ValidationError("density: slab endpoints out of order");
    if (slab_.lo < weight_.domain_lo() || slab_.hi > weight_.domain_hi())
      throw ValidationError("density: slab is not contained in the domain of omega");
  }

  const Weight1D& weight() const noexcept { return weight_; }
  double c() const noexcept { return c_; }
  int ambient_dim() const noexcept { return ambient_dim_; }
  int horizontal_dim() const noexcept { return ambient_dim_ - 1; }
  const Slab& slab() const noexcept { return slab_; }

  /// exp(omega(t) - c t^2), the vertical factor of f.
  double vertical_density(double t) const {
    if (std::holds_alternative<Weight1D::LogPower>(weight_.variant()))
      return weight_.exp_value(t) * std::exp(-c_ * t * t);
    return std::exp(weight_.value(t) - c_ * t * t);
  }

 private:
  Weight1D weight_;
  double c_;
  int ambient_dim_;
  Slab slab_;
};

namespace detail {
inline double vertical_of(const Density& d, std::span<const double> p) {
  if (static_cast<int>(p.size()) != d.ambient_dim())
    throw ValidationError("point dimension does not match the ambient dimension");
  const double t = p.back();
  if (!d.slab().contains_closed(t)) throw DomainError("point lies outside the closed slab");
  return t;
}
inline double squared_norm(std::span<const double> p) {
  double s = 0.0;
  for (double x : p) s += x * x;
  return s;
}
}  // namespace detail

/// psi(p) = omega(t) - c |p|^2.
inline double psi(const Density& d, std::span<const double> p) {
  const double t = detail::vertical_of(d, p);
  if (std::holds_alternative<Weight1D::LogPower>(d.weight().variant()) && !(t > 0.0))
    throw DomainError("psi: log-power weight requires t > 0");
  return d.weight().value(t) - d.c() * detail::squared_norm(p);
}

/// grad psi = omega'(t) e_t - 2c p.
inline std::vector<double> grad_psi(const Density& d, std::span<const double> p) {
  const double t = detail::vertical_of(d, p);
  std::vector<double> g(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) g[i] = -2.0 * d.c() * p[i];
  g.back() += d.weight().derivative(t);
  return g;
}

/// Bakry-Emery-Ricci form -Hess psi evaluated on w:
/// -omega''(t) <e_t, w>^2 + 2c |w|^2.
inline double ric_f(const Density& d, std::span<const double> p, std::span<const double> w) {
  const double t = detail::vertical_of(d, p);
  if (w.size() != p.size()) throw ValidationError("ric_f: vector dimension mismatch");
  const double wt = w.back();
  return -d.weight().second_derivative(t) * wt * wt + 2.0 * d.c() * detail::squared_norm(w);
}

/// Result of a concavity check.
struct ConcavityReport {
  bool concave = true;
  std::string detail;
  std::optional<std::size_t> knot;  // offending knot of a piecewise-linear weight
  std::optional<double> location;   // offending probe location
};

/// Exact concavity test for the closed-form variants. When a probe grid is
/// given, chord slopes of omega on it are also required to be nonincreasing.
inline ConcavityReport check_concavity(const Weight1D& w, std::span<const double> probe = {}) {
  ConcavityReport r;
  std::visit(
      [&](const auto& v) {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, Weight1D::Quadratic>) {
          if (v.curvature < 0.0) {
            r.concave = false;
            r.detail = "quadratic curvature kappa < 0";
          }
        } else if constexpr (std::is_same_v<T, Weight1D::LogPower>) {
          if (v.exponent < 0.0) {
            r.concave = false;
            r.detail = "log-power exponent m < 0";
          }
        } else if constexpr (std::is_same_v<T, Weight1D::PiecewiseLinear>) {
          for (std::size_t i = 1; i + 1 < v.knots.size(); ++i) {
            if (Weight1D::slope_of(v, i) > Weight1D::slope_of(v, i - 1)) {
              r.concave = false;
              r.knot = i;
              r.location = v.knots[i];
              r.detail = "chord slope increases at knot " + std::to_string(i);
              return;
            }
          }
        }
      },
      w.variant());
  if (!r.concave || probe.size() < 3) return r;

  std::vector<double> ts;
  for (double t : probe)
    if (t >= w.domain_lo() && t <= w.domain_hi()) ts.push_back(t);
  std::sort(ts.begin(), ts.end());
  ts.erase(std::unique(ts.begin(), ts.end()), ts.end());
  for (std::size_t i = 1; i + 1 < ts.size(); ++i) {
    const double s0 = (w.value(ts[i]) - w.value(ts[i - 1])) / (ts[i] - ts[i - 1]);
    const double s1 = (w.value(ts[i + 1]) - w.value(ts[i])) / (ts[i + 1] - ts[i]);
    if (s1 > s0 + 1e-12 * (1.0 + std::abs(s0))) {
      r.concave = false;
      r.location = ts[i];
      r.detail = "probe chord slope increases at t=" + std::to_string(ts[i]);
      return r;
    }
  }
  return r;
}

/// (pi/c)^(k/2): weighted volume of R^k under exp(-c|z|^2).
inline double gaussian_factor(int k, double c) {
  if (k < 0) throw ValidationError("gaussian_factor: k must be >= 0");
  if (!(c > 0.0)) throw ValidationError("gaussian_factor: c must be positive");
  return std::pow(std::numbers::pi / c, 0.5 * k);
}

/// Integral of exp(-c x^2) over (-inf, y).
inline double gaussian_mass_below(double c, double y) {
  return 0.5 * std::sqrt(std::numbers::pi / c) * std::erfc(-std::sqrt(c) * y);
}
/// Integral of exp(-c x^2) over (y, inf).
inline double gaussian_mass_above(double c, double y) {
  return 0.5 * std::sqrt(std::numbers::pi / c) * std::erfc(std::sqrt(c) * y);
}

/// Finite integration window replacing infinite slab ends, together with the
/// bound on the mass discarded on each side.
struct TailWindow {
  double lo;
  double hi;
  double lo_bound = 0.0;
  double hi_bound = 0.0;
};

namespace detail {

// Concavity puts omega below its tangent at t_ref, so the vertical density is
// dominated by exp(A + L t - rate t^2) with rate = c. Quadratic weights are
// bounded exactly (rate = c + kappa), which also covers non-concave
// diagnostic runs as long as the combined rate stays positive.
struct TangentBound {
  double log_scale;
  double slope;
  double rate;
};

inline TangentBound tangent_bound(const Density& d) {
  if (auto* q = std::get_if<Weight1D::Quadratic>(&d.weight().variant())) {
    const double rate = d.c() + q->curvature;
    if (!(rate > 0.0))
      throw ValidationError("vertical measure has infinite mass (c + kappa <= 0)");
    return {q->intercept, q->slope, rate};
  }
  if (!check_concavity(d.weight()).concave)
    throw ValidationError("tail bound requires a concave weight");
  const auto& s = d.slab();
  double t_ref = std::clamp(0.0, s.lo, s.hi);
  if (std::holds_alternative<Weight1D::LogPower>(d.weight().variant()) && t_ref <= 0.0)
    t_ref = std::max(1.0, s.lo + 1.0);
  const double slope = d.weight().one_sided_derivative(t_ref, true);
  return {d.weight().value(t_ref) - slope * t_ref, slope, d.c()};
}

inline double tail_above(const TangentBound& b, double t) {
  const double shift = b.slope / (2.0 * b.rate);
  return std::exp(b.log_scale + b.slope * b.slope / (4.0 * b.rate)) *
         gaussian_mass_above(b.rate, t - shift);
}
inline double tail_below(const TangentBound& b, double t) {
  const double shift = b.slope / (2.0 * b.rate);
  return std::exp(b.log_scale + b.slope * b.slope / (4.0 * b.rate)) *
         gaussian_mass_below(b.rate, t - shift);
}

}  // namespace detail

/// Integration window for the vertical measure exp(omega - c t^2) dt.
inline TailWindow tail_window(const Density& d, const QuadratureSpec& spec) {
  const auto& s = d.slab();
  TailWindow w{s.lo, s.hi};
  if (s.bounded()) return w;
  const auto bound = detail::tangent_bound(d);
  const double c = bound.rate;
  const double target = spec.tail_fraction * spec.abs_tol;
  const double half_deg = 0.5 * spec.tail_poly_degree;
  const double centre = bound.slope / (2.0 * c);
  const double step = 0.25 / std::sqrt(c);
  auto inflate = [&](double t) { return std::pow(1.0 + t * t, half_deg); };
  if (std::isinf(s.hi)) {
    double t = std::max(centre, std::isfinite(s.lo) ? s.lo : centre) + step;
    while (detail::tail_above(bound, t) * inflate(t) > target) t += step;
    w.hi = t;
    w.hi_bound = detail::tail_above(bound, t) * inflate(t);
  }
  if (std::isinf(s.lo)) {
    double t = std::min(centre, std::isfinite(s.hi) ? s.hi : centre) - step;
    while (detail::tail_below(bound, t) * inflate(t) > target) t -= step;
    w.lo = t;
    w.lo_bound = detail::tail_below(bound, t) * inflate(t);
  }
  return w;
}

/// Adaptive integral of g(t) exp(omega(t) - c t^2) over [lo, hi] within the
/// slab. Infinite endpoints are replaced by the tail window; the discarded
/// tail bound is added to the reported error.
template <class G>
QuadResult integrate_weighted(G&& g, double lo, double hi, const Density& d,
                              const QuadratureSpec& spec = {}) {
  const auto& s = d.slab();
  if (std::isnan(lo) || std::isnan(hi) || lo < s.lo || hi > s.hi)
    throw DomainError("integrate_weighted: interval is not inside the slab");
  if (!(lo < hi)) {
    if (lo == hi) return {};
    throw DomainError("integrate_weighted: interval endpoints out of order");
  }
  double tail_err = 0.0;
  if (std::isinf(lo) || std::isinf(hi)) {
    const auto w = tail_window(d, spec);
    if (std::isinf(lo)) {
      lo = std::min(w.lo, std::isfinite(hi) ? hi - 1.0 : w.lo);
      tail_err += w.lo_bound;
    }
    if (std::isinf(hi)) {
      hi = std::max(w.hi, std::isfinite(lo) && lo > w.hi ? lo + 1.0 : w.hi);
      tail_err += w.hi_bound;
    }
  }

  std::vector<double> cuts(d.weight().knots().begin(), d.weight().knots().end());
  if (std::holds_alternative<Weight1D::LogPower>(d.weight().variant()) && lo < 1.0) {
    // graded mesh towards the t = 0 endpoint
    for (double t = 0.5; t > 1e-12; t *= 0.5) cuts.push_back(lo + t * (std::min(hi, 1.0) - lo));
  }
  auto integrand = [&](double t) { return g(t) * d.vertical_density(t); };
  auto r = gauss_kronrod(integrand, lo, hi, spec, cuts);
  r.error += tail_err;
  return r;
}

/// Integral of exp(omega - c t^2) over (lo, hi).
inline QuadResult vertical_mass(const Density& d, double lo, double hi,
                                const QuadratureSpec& spec = {}) {
  return integrate_weighted([](double) { return 1.0; }, lo, hi, d, spec);
}

/// Probability normalizers of exp(-c s^2) ds on R and exp(omega - c t^2) dt
/// on the slab.
struct Normalizers {
  double alpha;
  double beta;
};

inline Normalizers normalizers(const Density& d, const QuadratureSpec& spec = {}) {
  const double m = vertical_mass(d, d.slab().lo, d.slab().hi, spec).value;
  if (!(m > 0.0) || !std::isfinite(m))
    throw InternalConsistencyError("normalizers: vertical mass is not finite and positive");
  return {1.0 / gaussian_factor(1, d.c()), 1.0 / m};
}

}  // namespace isoflow
