#pragma once

#include <cmath>
#include <functional>
#include <utility>

#include "isoflow/errors.hpp"

namespace isoflow {

struct RootResult {
  double x;
  double residual;
  int iterations;
};

/// Solves value(x) = target for a nondecreasing function on [lo, hi].
///
/// `eval(x)` returns {value, derivative}. Newton steps are taken when they
/// stay inside the current bracket, bisection otherwise, so convergence is
/// guaranteed by monotonicity alone. Stops once |value - target| <= tol.
template <class Eval>
RootResult solve_monotone(Eval&& eval, double target, double lo, double hi, double tol,
                          int max_iter = 200) {
  auto [flo, dlo] = eval(lo);
  auto [fhi, dhi] = eval(hi);
  (void)dlo;
  (void)dhi;
  if (!(flo <= target + tol && fhi >= target - tol))
    throw InternalConsistencyError("solve_monotone: target is not bracketed");
  if (std::abs(flo - target) <= tol) return {lo, flo - target, 0};
  if (std::abs(fhi - target) <= tol) return {hi, fhi - target, 0};

  double x = 0.5 * (lo + hi);
  for (int it = 1; it <= max_iter; ++it) {
    auto [fx, dfx] = eval(x);
    const double r = fx - target;
    if (std::abs(r) <= tol) return {x, r, it};
    if (r < 0) lo = x;
    else hi = x;
    double next = (dfx > 0.0 && std::isfinite(dfx)) ? x - r / dfx : lo - 1.0;
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (next == x || !(hi > lo))
      throw ConvergenceError("solve_monotone: bracket collapsed above tolerance", x, std::abs(r));
    x = next;
  }
  auto [fx, dfx] = eval(x);
  (void)dfx;
  throw ConvergenceError("solve_monotone: iteration limit reached", x, std::abs(fx - target));
}

}  // namespace isoflow
