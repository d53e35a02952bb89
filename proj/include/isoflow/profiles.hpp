#pragma once

// Weighted volume/area of half-space families and their isoperimetric
// profiles F(v) = A(V^{-1}(v)).
//
// For the product density exp(omega(t) - c|p|^2) every quantity reduces to
// one-dimensional integrals:
//   parallel      V(s) = g^n int_a^s e^{omega - c t^2},     A(s) = g^n e^{omega(s) - c s^2}
//   perpendicular V(s) = g^{n-1} M int_{-inf}^s e^{-c u^2}, A(s) = g^{n-1} M e^{-c s^2}
// with g = sqrt(pi/c) and M the vertical mass of the slab. Along the family
// A'/A is omega'(s) - 2cs (parallel) or -2cs (perpendicular), hence
// F' = A'/A and F'' = (A'/A)'/A.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <type_traits>
#include <variant>
#include <vector>

#include "isoflow/errors.hpp"
#include "isoflow/interpolation.hpp"
#include "isoflow/io.hpp"
#include "isoflow/parallel.hpp"
#include "isoflow/roots.hpp"
#include "isoflow/weights.hpp"

namespace isoflow {

enum class Family { Parallel, Perpendicular, Tilted };

inline std::string_view family_name(Family f) {
  switch (f) {
    case Family::Parallel: return "parallel";
    case Family::Perpendicular: return "perpendicular";
    case Family::Tilted: return "tilted";
  }
  return "unknown";
}

/// Half-space {t < level} (parallel), {x_axis < offset} (perpendicular), or
/// {<p, normal> < offset} (tilted).
struct ParallelCandidate {
  double level;
};
struct PerpendicularCandidate {
  int axis;
  double offset;
};
struct TiltedCandidate {
  std::vector<double> normal;
  double offset;
};
using HalfSpaceCandidate = std::variant<ParallelCandidate, PerpendicularCandidate, TiltedCandidate>;

struct VolumeArea {
  double volume;
  double area;
};

struct ProfileRecord {
  double s;
  double V;
  double A;
  double v;
  double F;
  double dF;
  double ddF;
};

struct Profile {
  Family family = Family::Parallel;
  std::vector<ProfileRecord> records;
  double total_volume = 0.0;
};

struct ProfileOptions {
  double endpoint_fraction = 1e-3;  // grid covers [eps V_tot, (1 - eps) V_tot]
  double volume_tol = 1e-10;        // |V(s) - v| <= volume_tol * V_tot
  int threads = 1;
  QuadratureSpec quadrature{1e-13, 1e-15};
};

/// Total weighted volume of the slab region R^n x (a, b).
inline double total_volume(const Density& d, const QuadratureSpec& spec = {}) {
  return gaussian_factor(d.horizontal_dim(), d.c()) * vertical_mass(d, d.slab().lo, d.slab().hi, spec).value;
}

inline VolumeArea volume_area_parallel(const Density& d, double s, const QuadratureSpec& spec = {}) {
  if (!d.slab().contains_closed(s)) throw DomainError("volume_area_parallel: level outside slab");
  const double g = gaussian_factor(d.horizontal_dim(), d.c());
  const double v = s == d.slab().lo ? 0.0 : g * vertical_mass(d, d.slab().lo, s, spec).value;
  const double a = std::isfinite(s) ? g * d.vertical_density(s) : 0.0;
  return {v, a};
}

inline VolumeArea volume_area_perpendicular(const Density& d, double s,
                                            const QuadratureSpec& spec = {}) {
  if (d.horizontal_dim() < 1)
    throw ValidationError("volume_area_perpendicular: needs at least one horizontal direction");
  const double g = gaussian_factor(d.horizontal_dim() - 1, d.c());
  const double m = vertical_mass(d, d.slab().lo, d.slab().hi, spec).value;
  return {g * m * gaussian_mass_below(d.c(), s), g * m * std::exp(-d.c() * s * s)};
}

namespace detail {

inline void require_unit(std::span<const double> nu) {
  double n2 = 0.0;
  for (double x : nu) n2 += x * x;
  if (std::abs(std::sqrt(n2) - 1.0) > 1e-12) throw ValidationError("normal must be a unit vector");
}

// Tilted family in whole space. With nu = (nu_h, nu_t), nu_x = |nu_h| > 0 and
// y(t) = (s - nu_t t)/nu_x, integrating out the horizontal coordinate along
// nu_h in closed form gives
//   V(s) = g^{n-1} int e^{omega - c t^2} Phi_c(y) dt,
//   A(s) = g^{n-1}/nu_x int e^{omega - c t^2} e^{-c y^2} dt,
// and A', A'' by differentiating under the integral.
struct TiltedMoments {
  double V, A, dA, ddA;
};

inline TiltedMoments tilted_moments(const Density& d, double nu_x, double nu_t, double s,
                                    const QuadratureSpec& spec, bool derivatives) {
  const double c = d.c();
  const double g = gaussian_factor(d.horizontal_dim() - 1, c);
  auto y_of = [&](double t) { return (s - nu_t * t) / nu_x; };
  auto V = integrate_weighted([&](double t) { return gaussian_mass_below(c, y_of(t)); }, -kInf,
                              kInf, d, spec);
  auto A = integrate_weighted([&](double t) { return std::exp(-c * y_of(t) * y_of(t)); }, -kInf,
                              kInf, d, spec);
  TiltedMoments m{g * V.value, g * A.value / nu_x, 0.0, 0.0};
  if (derivatives) {
    auto dA = integrate_weighted(
        [&](double t) {
          const double y = y_of(t);
          return std::exp(-c * y * y) * (-2.0 * c * y / nu_x);
        },
        -kInf, kInf, d, spec);
    auto ddA = integrate_weighted(
        [&](double t) {
          const double y = y_of(t);
          const double q = 2.0 * c * y / nu_x;
          return std::exp(-c * y * y) * (q * q - 2.0 * c / (nu_x * nu_x));
        },
        -kInf, kInf, d, spec);
    m.dA = g * dA.value / nu_x;
    m.ddA = g * ddA.value / nu_x;
  }
  return m;
}

}  // namespace detail

/// Weighted volume and interior area of the half-space described by `h`.
inline VolumeArea volume_area(const Density& d, const HalfSpaceCandidate& h,
                              const QuadratureSpec& spec = {}) {
  return std::visit(
      [&](const auto& cand) -> VolumeArea {
        using T = std::decay_t<decltype(cand)>;
        if constexpr (std::is_same_v<T, ParallelCandidate>) {
          if (!d.slab().contains(cand.level))
            throw ValidationError("parallel candidate level must lie inside the slab");
          return volume_area_parallel(d, cand.level, spec);
        } else if constexpr (std::is_same_v<T, PerpendicularCandidate>) {
          if (cand.axis < 0 || cand.axis >= d.horizontal_dim())
            throw ValidationError("perpendicular candidate axis out of range");
          return volume_area_perpendicular(d, cand.offset, spec);
        } else {
          if (static_cast<int>(cand.normal.size()) != d.ambient_dim())
            throw ValidationError("tilted candidate normal has wrong dimension");
          detail::require_unit(cand.normal);
          if (!d.slab().whole_line())
            throw ValidationError("tilted candidates are only supported in whole space");
          double h2 = 0.0;
          for (std::size_t i = 0; i + 1 < cand.normal.size(); ++i) h2 += cand.normal[i] * cand.normal[i];
          const double nu_x = std::sqrt(h2);
          const double nu_t = cand.normal.back();
          if (nu_x < 1e-12) {
            if (nu_t > 0) return volume_area_parallel(d, cand.offset, spec);
            auto up = volume_area_parallel(d, -cand.offset, spec);
            return {total_volume(d, spec) - up.volume, up.area};
          }
          auto m = detail::tilted_moments(d, nu_x, nu_t, cand.offset, spec, false);
          return {m.V, m.A};
        }
      },
      h);
}

/// Chebyshev-spaced volumes on [eps V_tot, (1 - eps) V_tot], increasing.
inline std::vector<double> chebyshev_volume_grid(double total, int n, double eps) {
  if (n < 2) throw ValidationError("volume grid needs at least two points");
  std::vector<double> v(n);
  const double lo = eps * total, hi = (1.0 - eps) * total;
  for (int j = 0; j < n; ++j) {
    const double x = -std::cos(std::numbers::pi * j / (n - 1));
    v[j] = 0.5 * (lo + hi) + 0.5 * (hi - lo) * x;
  }
  return v;
}

namespace detail {

// Expands [lo, hi] until V(lo) <= target <= V(hi) for an increasing V.
template <class VolumeFn>
std::pair<double, double> bracket_volume(VolumeFn&& vol, double target, double lo, double hi,
                                         double step) {
  for (int i = 0; i < 200 && vol(lo) > target; ++i) lo -= step, step *= 2;
  for (int i = 0; i < 200 && vol(hi) < target; ++i) hi += step, step *= 2;
  return {lo, hi};
}

inline void check_increasing(const Profile& p) {
  for (std::size_t i = 1; i < p.records.size(); ++i)
    if (!(p.records[i].s > p.records[i - 1].s))
      throw InternalConsistencyError("profile: V(s) is not strictly increasing");
}

}  // namespace detail

/// Samples the profile of the parallel or perpendicular family on a
/// Chebyshev volume grid.
inline Profile build_profile(const Density& d, Family family, int grid_size,
                             const ProfileOptions& opt = {}) {
  if (family == Family::Tilted)
    throw ValidationError("build_profile: use tilted_profile_wholespace for tilted families");
  if (family == Family::Parallel && d.weight().smoothness() != Smoothness::Smooth)
    throw SmoothnessError("parallel profile needs omega'' and the weight is only C0");
  if (family == Family::Perpendicular && d.horizontal_dim() < 1)
    throw ValidationError("perpendicular family needs at least one horizontal direction");

  const auto& q = opt.quadrature;
  const double c = d.c();
  Profile p;
  p.family = family;
  p.total_volume = total_volume(d, q);
  const auto grid = chebyshev_volume_grid(p.total_volume, grid_size, opt.endpoint_fraction);
  const double tol = opt.volume_tol * p.total_volume;
  p.records.resize(grid.size());

  if (family == Family::Parallel) {
    const auto win = tail_window(d, q);
    const double g = gaussian_factor(d.horizontal_dim(), c);
    auto eval = [&](double s) -> std::pair<double, double> {
      auto va = volume_area_parallel(d, s, q);
      return {va.volume, va.area};
    };
    parallel_for(grid.size(), opt.threads, [&](std::size_t j) {
      auto root = solve_monotone(eval, grid[j], win.lo, win.hi, tol);
      const double s = root.x;
      const double A = g * d.vertical_density(s);
      const double slope = d.weight().derivative(s) - 2.0 * c * s;
      const double curv = d.weight().second_derivative(s) - 2.0 * c;
      p.records[j] = {s, grid[j] + root.residual, A, grid[j], A, slope, curv / A};
    });
  } else {
    const double g = gaussian_factor(d.horizontal_dim() - 1, c);
    const double m = vertical_mass(d, d.slab().lo, d.slab().hi, q).value;
    auto eval = [&](double s) -> std::pair<double, double> {
      return {g * m * gaussian_mass_below(c, s), g * m * std::exp(-c * s * s)};
    };
    const double scale = 1.0 / std::sqrt(c);
    parallel_for(grid.size(), opt.threads, [&](std::size_t j) {
      auto [lo, hi] = detail::bracket_volume([&](double s) { return eval(s).first; }, grid[j],
                                             -scale, scale, scale);
      auto root = solve_monotone(eval, grid[j], lo, hi, tol);
      const double s = root.x;
      const double A = g * m * std::exp(-c * s * s);
      p.records[j] = {s, grid[j] + root.residual, A, grid[j], A, -2.0 * c * s, -2.0 * c / A};
    });
  }
  detail::check_increasing(p);
  return p;
}

/// Weighted area of the perpendicular half-space {x_1 < s} of volume v.
inline double perpendicular_value(const Density& d, double v, const QuadratureSpec& q = {}) {
  if (d.horizontal_dim() < 1)
    throw ValidationError("perpendicular family needs at least one horizontal direction");
  const double c = d.c();
  const double g = gaussian_factor(d.horizontal_dim() - 1, c);
  const double m = vertical_mass(d, d.slab().lo, d.slab().hi, q).value;
  const double total = g * m * std::sqrt(std::numbers::pi / c);
  if (!(v > 0 && v < total)) throw DomainError("perpendicular_value: v must lie in (0, V_tot)");
  auto eval = [&](double s) -> std::pair<double, double> {
    return {g * m * gaussian_mass_below(c, s), g * m * std::exp(-c * s * s)};
  };
  const double scale = 1.0 / std::sqrt(c);
  auto [lo, hi] = detail::bracket_volume([&](double s) { return eval(s).first; }, v, -scale, scale, scale);
  const double s = solve_monotone(eval, v, lo, hi, 1e-14 * total).x;
  return g * m * std::exp(-c * s * s);
}

/// Profile of the half-spaces {<p, normal> < s} in whole space.
inline Profile tilted_profile_wholespace(const Density& d, std::span<const double> normal,
                                         int grid_size, const ProfileOptions& opt = {}) {
  if (!d.slab().whole_line()) throw ValidationError("tilted profiles require the whole space");
  if (d.weight().smoothness() != Smoothness::Smooth)
    throw SmoothnessError("tilted profile needs a smooth weight");
  if (static_cast<int>(normal.size()) != d.ambient_dim())
    throw ValidationError("normal has wrong dimension");
  detail::require_unit(normal);

  double h2 = 0.0;
  for (std::size_t i = 0; i + 1 < normal.size(); ++i) h2 += normal[i] * normal[i];
  const double nu_x = std::sqrt(h2);
  const double nu_t = normal.back();

  if (nu_x < 1e-12) {
    if (nu_t < 0)
      throw ValidationError("tilted_profile_wholespace: use normal +e_t for the horizontal family");
    auto p = build_profile(d, Family::Parallel, grid_size, opt);
    p.family = Family::Tilted;
    return p;
  }

  const auto& q = opt.quadrature;
  Profile p;
  p.family = Family::Tilted;
  p.total_volume = total_volume(d, q);
  const auto grid = chebyshev_volume_grid(p.total_volume, grid_size, opt.endpoint_fraction);
  const double tol = opt.volume_tol * p.total_volume;
  p.records.resize(grid.size());
  auto eval = [&](double s) -> std::pair<double, double> {
    auto m = detail::tilted_moments(d, nu_x, nu_t, s, q, false);
    return {m.V, m.A};
  };
  const double scale = 1.0 / std::sqrt(d.c());
  parallel_for(grid.size(), opt.threads, [&](std::size_t j) {
    auto [lo, hi] = detail::bracket_volume([&](double s) { return eval(s).first; }, grid[j],
                                           -scale, scale, scale);
    auto root = solve_monotone(eval, grid[j], lo, hi, tol);
    auto m = detail::tilted_moments(d, nu_x, nu_t, root.x, q, true);
    const double dF = m.dA / m.A;
    const double ddF = (m.ddA * m.A - m.dA * m.dA) / (m.A * m.A * m.A);
    p.records[j] = {root.x, grid[j] + root.residual, m.A, grid[j], m.A, dF, ddF};
  });
  detail::check_increasing(p);
  return p;
}

enum class OdeVerdict { Equality, Inequality, Violated };

inline std::string_view ode_verdict_name(OdeVerdict v) {
  switch (v) {
    case OdeVerdict::Equality: return "equality holds";
    case OdeVerdict::Inequality: return "inequality holds";
    case OdeVerdict::Violated: return "violated";
  }
  return "unknown";
}

struct OdeWitness {
  double v;
  double residual;
};

/// Residuals r = F''F + 2c over the checked records.
struct OdeReport {
  OdeVerdict verdict = OdeVerdict::Equality;
  double max_abs_residual = 0.0;
  double max_residual = -kInf;
  double min_margin = kInf;  // min over records of -(F'' + 2c/F)
  std::size_t checked = 0;
  std::vector<OdeWitness> counterexamples;
};

/// Checks F'' <= -2c/F (equality when |F''F + 2c| <= tol everywhere).
/// Only records whose volume lies in the central `interior_fraction` of
/// (0, V_tot) are examined.
inline OdeReport check_profile_ode(const Profile& p, double c, double tol,
                                   double interior_fraction = 1.0) {
  OdeReport r;
  const double lo = 0.5 * (1.0 - interior_fraction) * p.total_volume;
  const double hi = p.total_volume - lo;
  for (const auto& rec : p.records) {
    if (rec.v < lo || rec.v > hi) continue;
    ++r.checked;
    const double res = rec.ddF * rec.F + 2.0 * c;
    r.max_abs_residual = std::max(r.max_abs_residual, std::abs(res));
    r.max_residual = std::max(r.max_residual, res);
    r.min_margin = std::min(r.min_margin, -res / rec.F);
    if (res > tol) r.counterexamples.push_back({rec.v, res});
  }
  if (!r.counterexamples.empty()) r.verdict = OdeVerdict::Violated;
  else if (r.max_abs_residual <= tol) r.verdict = OdeVerdict::Equality;
  else r.verdict = OdeVerdict::Inequality;
  return r;
}

enum class ComparisonVerdict { Strict, WithTies, Violated };

inline std::string_view comparison_verdict_name(ComparisonVerdict v) {
  switch (v) {
    case ComparisonVerdict::Strict: return "strict";
    case ComparisonVerdict::WithTies: return "ties";
    case ComparisonVerdict::Violated: return "violated";
  }
  return "unknown";
}

struct ComparisonPoint {
  double v;
  double F;
  double G;
};

struct Comparison {
  ComparisonVerdict verdict = ComparisonVerdict::Strict;
  std::size_t compared = 0;
  double min_difference = kInf;           // min (F - G)
  double min_relative_difference = kInf;  // min (F - G) / max(F, G)
  double max_abs_difference = 0.0;
  std::vector<ComparisonPoint> ties;
  std::vector<ComparisonPoint> violations;
  bool all_tied() const { return compared > 0 && ties.size() == compared; }
};

/// Compares F against G at the volumes of F's grid that fall inside G's
/// range; G is evaluated there by monotone cubic interpolation when the
/// grids differ. Differences within tie_tol * max(F, G) count as ties.
inline Comparison compare_profiles(const Profile& F, const Profile& G, double tie_tol = 1e-8) {
  const double vf = F.total_volume, vg = G.total_volume;
  if (std::abs(vf - vg) > 1e-8 * std::max(vf, vg))
    throw IncompatibleError("compare_profiles: total volumes differ");
  if (G.records.size() < 2 || F.records.empty())
    throw ValidationError("compare_profiles: profiles are too short");

  bool same_grid = F.records.size() == G.records.size();
  for (std::size_t i = 0; same_grid && i < F.records.size(); ++i)
    same_grid = F.records[i].v == G.records[i].v;

  std::optional<MonotoneCubic> interp;
  if (!same_grid) {
    std::vector<double> xs, ys;
    for (const auto& r : G.records) {
      xs.push_back(r.v);
      ys.push_back(r.F);
    }
    interp.emplace(std::move(xs), std::move(ys));
  }

  Comparison out;
  for (std::size_t i = 0; i < F.records.size(); ++i) {
    const auto& rf = F.records[i];
    double g;
    if (same_grid) g = G.records[i].F;
    else if (rf.v < interp->front() || rf.v > interp->back()) continue;
    else g = (*interp)(rf.v);
    ++out.compared;
    const double diff = rf.F - g;
    const double scale = std::max(rf.F, g);
    out.min_difference = std::min(out.min_difference, diff);
    out.min_relative_difference = std::min(out.min_relative_difference, diff / scale);
    out.max_abs_difference = std::max(out.max_abs_difference, std::abs(diff));
    if (std::abs(diff) <= tie_tol * scale) out.ties.push_back({rf.v, rf.F, g});
    else if (diff < 0) out.violations.push_back({rf.v, rf.F, g});
  }
  if (!out.violations.empty()) out.verdict = ComparisonVerdict::Violated;
  else if (!out.ties.empty()) out.verdict = ComparisonVerdict::WithTies;
  return out;
}

/// CSV with header s,V,A,v,F,dF,ddF.
inline void write_profile_csv(std::ostream& os, const Profile& p) {
  write_csv_header(os, {"s", "V", "A", "v", "F", "dF", "ddF"});
  for (const auto& r : p.records) write_csv_row(os, {r.s, r.V, r.A, r.v, r.F, r.dF, r.ddF});
}

}  // namespace isoflow
