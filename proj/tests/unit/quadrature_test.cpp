#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "isoflow/quadrature.hpp"

namespace {

using isoflow::QuadratureSpec;

TEST(GaussKronrod, IntegratesPolynomialsExactly) {
  // K15 is exact through degree 29.
  auto f = [](double x) { return std::pow(x, 28) + 3.0 * std::pow(x, 5) - x; };
  const double exact = 2.0 / 29.0;
  auto r = isoflow::gauss_kronrod(f, -1.0, 1.0, QuadratureSpec{});
  EXPECT_NEAR(r.value, exact, 1e-15);
}

TEST(GaussKronrod, ReversedLimitsFlipSign) {
  auto f = [](double x) { return std::exp(x); };
  auto fwd = isoflow::gauss_kronrod(f, 0.0, 2.0, QuadratureSpec{});
  auto rev = isoflow::gauss_kronrod(f, 2.0, 0.0, QuadratureSpec{});
  EXPECT_NEAR(fwd.value, std::exp(2.0) - 1.0, 1e-13);
  EXPECT_DOUBLE_EQ(fwd.value, -rev.value);
}

TEST(GaussKronrod, HandlesKinksAtBreakpoints) {
  auto f = [](double x) { return std::abs(x - 0.3); };
  const double brk[] = {0.3};
  auto r = isoflow::gauss_kronrod(f, 0.0, 1.0, QuadratureSpec{}, brk);
  EXPECT_NEAR(r.value, 0.5 * (0.09 + 0.49), 1e-15);
}

TEST(GaussKronrod, EndpointSingularityConverges) {
  auto f = [](double x) { return std::sqrt(x); };
  auto r = isoflow::gauss_kronrod(f, 0.0, 1.0, QuadratureSpec{});
  EXPECT_LE(std::abs(r.value - 2.0 / 3.0), r.error);
  EXPECT_LE(r.error, 1e-10);
}

TEST(GaussKronrod, ExhaustedBudgetReportsBestEstimate) {
  QuadratureSpec spec;
  spec.max_intervals = 3;
  spec.rel_tol = 1e-15;
  spec.abs_tol = 1e-300;
  auto f = [](double x) { return std::sin(1.0 / (x + 1e-3)); };
  try {
    isoflow::gauss_kronrod(f, 0.0, 1.0, spec);
    FAIL() << "expected ConvergenceError";
  } catch (const isoflow::ConvergenceError& e) {
    EXPECT_TRUE(std::isfinite(e.best_estimate()));
    EXPECT_GT(e.error_bound(), 0.0);
  }
}

TEST(GaussLegendre, RulesIntegrateToDegree2nMinus1) {
  for (int n : {1, 2, 5, 8, 16}) {
    const auto& rule = isoflow::gauss_legendre(n);
    double wsum = 0.0, moment = 0.0;
    for (int i = 0; i < n; ++i) {
      wsum += rule.weights[i];
      moment += rule.weights[i] * std::pow(rule.nodes[i], 2 * n - 2);
    }
    EXPECT_NEAR(wsum, 2.0, 1e-14) << n;
    EXPECT_NEAR(moment, 2.0 / (2 * n - 1), 1e-14) << n;
  }
}

}  // namespace
