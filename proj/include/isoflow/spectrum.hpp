#pragma once

// Neumann eigenproblem -(rho u')' = lambda rho u on an interval, with
// rho(t) = e^{omega(t) - c t^2}, discretized by linear finite elements.

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <vector>

#include "isoflow/errors.hpp"
#include "isoflow/io.hpp"
#include "isoflow/quadrature.hpp"
#include "isoflow/weights.hpp"

namespace isoflow {

/// Stiffness K (tridiagonal) and lumped mass W on nodes t_0 < ... < t_{N-1}.
/// Mass entries integrate rho over the dual cell of each node.
struct SpectralProblem {
  std::vector<double> t;
  std::vector<double> w;
  std::vector<double> k_diag, k_off;  // K_ii and K_{i,i+1}
  double lo = 0.0, hi = 0.0;
};

/// cutoff > 0 truncates infinite ends at |t| <= cutoff; otherwise the
/// quadrature tail window is used.
inline SpectralProblem build_spectral_problem(const Density& d, int nodes, double cutoff = 0.0,
                                              const QuadratureSpec& spec = {}) {
  if (nodes < 16) throw ValidationError("spectral problem needs at least 16 nodes");
  double lo = d.slab().lo, hi = d.slab().hi;
  if (std::isinf(lo) || std::isinf(hi)) {
    if (cutoff > 0) {
      if (std::isinf(lo)) lo = -cutoff;
      if (std::isinf(hi)) hi = cutoff;
    } else {
      const auto win = tail_window(d, spec);
      lo = win.lo;
      hi = win.hi;
    }
  }
  if (!(lo < hi)) throw ValidationError("spectral problem: truncated interval is empty");
  SpectralProblem p;
  p.lo = lo;
  p.hi = hi;
  p.t.resize(nodes);
  for (int i = 0; i < nodes; ++i) p.t[i] = lo + (hi - lo) * i / (nodes - 1);
  p.t.back() = hi;

  const auto& gl = gauss_legendre(4);
  auto cell_mass = [&](double a, double b) {
    double s = 0.0;
    for (std::size_t g = 0; g < gl.nodes.size(); ++g)
      s += gl.weights[g] * d.vertical_density(0.5 * (a + b) + 0.5 * (b - a) * gl.nodes[g]);
    return 0.5 * (b - a) * s;
  };
  p.w.assign(nodes, 0.0);
  p.k_diag.assign(nodes, 0.0);
  p.k_off.assign(nodes - 1, 0.0);
  for (int e = 0; e + 1 < nodes; ++e) {
    const double a = p.t[e], b = p.t[e + 1], m = 0.5 * (a + b);
    const double k = d.vertical_density(m) / (b - a);
    p.k_diag[e] += k;
    p.k_diag[e + 1] += k;
    p.k_off[e] = -k;
    p.w[e] += cell_mass(a, m);
    p.w[e + 1] += cell_mass(m, b);
  }
  for (double wi : p.w)
    if (!(wi > 0.0)) throw InternalConsistencyError("spectral problem: non-positive mass weight");
  return p;
}

namespace detail {

// Symmetric tridiagonal A = W^{-1/2} K W^{-1/2}.
struct Tridiagonal {
  std::vector<double> a, b;
};

inline Tridiagonal symmetrize(const SpectralProblem& p) {
  const std::size_t n = p.t.size();
  Tridiagonal m{std::vector<double>(n), std::vector<double>(n - 1)};
  for (std::size_t i = 0; i < n; ++i) m.a[i] = p.k_diag[i] / p.w[i];
  for (std::size_t i = 0; i + 1 < n; ++i) m.b[i] = p.k_off[i] / std::sqrt(p.w[i] * p.w[i + 1]);
  return m;
}

// Number of eigenvalues below x (Sturm count via LDL^T pivots).
inline std::size_t sturm_count(const Tridiagonal& m, double x) {
  std::size_t count = 0;
  double q = m.a[0] - x;
  const double tiny = std::numeric_limits<double>::min();
  if (q < 0) ++count;
  for (std::size_t i = 1; i < m.a.size(); ++i) {
    if (q == 0.0) q = tiny;
    q = m.a[i] - x - m.b[i - 1] * m.b[i - 1] / q;
    if (q < 0) ++count;
  }
  return count;
}

inline double kth_eigenvalue(const Tridiagonal& m, std::size_t k) {
  double lo = 0.0, hi = 0.0;
  for (std::size_t i = 0; i < m.a.size(); ++i) {
    const double r = (i > 0 ? std::abs(m.b[i - 1]) : 0.0) + (i + 1 < m.a.size() ? std::abs(m.b[i]) : 0.0);
    lo = std::min(lo, m.a[i] - r);
    hi = std::max(hi, m.a[i] + r);
  }
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (sturm_count(m, mid) > k) hi = mid;
    else lo = mid;
  }
  return 0.5 * (lo + hi);
}

// Solves (A - shift I) x = rhs by Gaussian elimination with partial pivoting.
inline std::vector<double> solve_shifted(const Tridiagonal& m, double shift, std::vector<double> rhs) {
  const std::size_t n = m.a.size();
  std::vector<double> d(n), du(n, 0.0), du2(n, 0.0), dl(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) d[i] = m.a[i] - shift;
  for (std::size_t i = 0; i + 1 < n; ++i) du[i] = dl[i] = m.b[i];
  std::vector<char> swapped(n, 0);
  const double tiny = std::numeric_limits<double>::epsilon() * (std::abs(shift) + 1.0);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    if (std::abs(d[i]) >= std::abs(dl[i])) {
      if (d[i] == 0.0) d[i] = tiny;
      const double f = dl[i] / d[i];
      d[i + 1] -= f * du[i];
      rhs[i + 1] -= f * rhs[i];
      dl[i] = f;
    } else {
      swapped[i] = 1;
      const double f = d[i] / dl[i];
      d[i] = dl[i];
      const double tmp = d[i + 1];
      d[i + 1] = du[i] - f * tmp;
      if (i + 2 < n) {
        du2[i] = du[i + 1];
        du[i + 1] = -f * du2[i];
      }
      du[i] = tmp;
      std::swap(rhs[i], rhs[i + 1]);
      rhs[i + 1] -= f * rhs[i];
      dl[i] = f;
    }
  }
  if (d[n - 1] == 0.0) d[n - 1] = tiny;
  std::vector<double> x(n);
  for (std::size_t ii = n; ii-- > 0;) {
    double s = rhs[ii];
    if (ii + 1 < n) s -= du[ii] * x[ii + 1];
    if (ii + 2 < n) s -= du2[ii] * x[ii + 2];
    x[ii] = s / d[ii];
  }
  return x;
}

}  // namespace detail

struct Eigenpair {
  double lambda = 0.0;
  std::vector<double> u;  // mass-normalized; mean-zero for k >= 1
  int iterations = 0;
};

/// k-th smallest eigenpair (k = 0 is the constant mode). Eigenvalues by
/// Sturm bisection, the vector by inverse iteration with the constant mode
/// deflated.
inline Eigenpair eigenpair(const SpectralProblem& p, std::size_t k) {
  if (k >= p.t.size()) throw ValidationError("eigenpair: index out of range");
  const auto m = detail::symmetrize(p);
  const std::size_t n = p.t.size();
  Eigenpair r;
  r.lambda = detail::kth_eigenvalue(m, k);

  std::vector<double> v0(n);
  double n0 = 0.0;
  for (std::size_t i = 0; i < n; ++i) n0 += p.w[i];
  for (std::size_t i = 0; i < n; ++i) v0[i] = std::sqrt(p.w[i] / n0);
  auto deflate = [&](std::vector<double>& y) {
    if (k == 0) return;
    double dot = 0.0;
    for (std::size_t i = 0; i < n; ++i) dot += y[i] * v0[i];
    for (std::size_t i = 0; i < n; ++i) y[i] -= dot * v0[i];
  };
  auto normalize = [](std::vector<double>& y) {
    double s = 0.0;
    for (double v : y) s += v * v;
    s = std::sqrt(s);
    if (!(s > 0) || !std::isfinite(s)) throw ConvergenceError("inverse iteration produced a zero vector", 0.0, 0.0);
    for (double& v : y) v /= s;
  };

  // Shift just below the eigenvalue, so the factorization stays regular.
  const double gap_scale = std::max(std::abs(r.lambda), 1.0);
  const double shift = r.lambda - 1e-10 * gap_scale;
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) y[i] = 1.0 + 0.5 * std::sin(3.7 * static_cast<double>(i) + 0.3);
  deflate(y);
  normalize(y);
  double change = 1.0;
  for (r.iterations = 1; r.iterations <= 20; ++r.iterations) {
    auto z = detail::solve_shifted(m, shift, y);
    deflate(z);
    normalize(z);
    double dot = 0.0;
    for (std::size_t i = 0; i < n; ++i) dot += z[i] * y[i];
    if (dot < 0)
      for (double& v : z) v = -v;
    change = 0.0;
    for (std::size_t i = 0; i < n; ++i) change = std::max(change, std::abs(z[i] - y[i]));
    y = std::move(z);
    if (change < 1e-13) break;
  }
  if (change > 1e-8)
    throw ConvergenceError("inverse iteration did not converge (eigenvalue cluster?)", r.lambda, change);

  r.u.resize(n);
  double orient = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    r.u[i] = y[i] / std::sqrt(p.w[i]);
    orient += p.w[i] * r.u[i] * p.t[i];
  }
  if (orient < 0)
    for (double& v : r.u) v = -v;
  return r;
}

/// Smallest nonzero eigenvalue and its eigenvector.
inline Eigenpair spectral_gap_1d(const SpectralProblem& p) { return eigenpair(p, 1); }

/// u^T K u / u^T W u after projecting u to discrete mean zero.
inline double rayleigh_quotient(const SpectralProblem& p, std::vector<double> u) {
  const std::size_t n = p.t.size();
  if (u.size() != n) throw ValidationError("rayleigh_quotient: sample count does not match");
  double mass = 0.0, mean = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mass += p.w[i];
    mean += p.w[i] * u[i];
  }
  mean /= mass;
  for (double& v : u) v -= mean;
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    num += p.k_diag[i] * u[i] * u[i];
    den += p.w[i] * u[i] * u[i];
  }
  for (std::size_t i = 0; i + 1 < n; ++i) num += 2.0 * p.k_off[i] * u[i] * u[i + 1];
  if (!(den > 0.0)) throw DegenerateError("rayleigh_quotient: u is constant");
  return num / den;
}

struct PoincareOptions {
  int nodes = 2000;
  double cutoff = 0.0;  // see build_spectral_problem
  double relative_tolerance = 5e-3;
};

struct PoincareCertificate {
  bool certified = false;
  double lambda = 0.0;            // gap of the slab factor
  double hyperplane_gap = 0.0;    // min(2c, lambda)
  double bound = 0.0;             // 2c
  double truncation_shift = 0.0;  // |lambda(1.25 cutoff) - lambda|, infinite slabs only
};

/// Certifies lambda >= 2c (1 - tol) for the vertical hyperplane of the slab.
inline PoincareCertificate poincare_certify(const Density& d, const PoincareOptions& opt = {}) {
  PoincareCertificate r;
  r.bound = 2.0 * d.c();
  const auto p = build_spectral_problem(d, opt.nodes, opt.cutoff);
  r.lambda = spectral_gap_1d(p).lambda;
  r.hyperplane_gap = std::min(r.bound, r.lambda);
  r.certified = r.lambda >= r.bound * (1.0 - opt.relative_tolerance);
  if (!d.slab().bounded()) {
    const double cut = 1.25 * std::max(std::abs(p.lo), std::abs(p.hi));
    const auto wide = build_spectral_problem(d, opt.nodes, cut);
    r.truncation_shift = std::abs(spectral_gap_1d(wide).lambda - r.lambda);
  }
  return r;
}

/// CSV with header t,w,u1.
inline void write_spectrum_csv(std::ostream& os, const SpectralProblem& p, const Eigenpair& e) {
  write_csv_header(os, {"t", "w", "u1"});
  for (std::size_t i = 0; i < p.t.size(); ++i) write_csv_row(os, {p.t[i], p.w[i], e.u[i]});
}

}  // namespace isoflow
