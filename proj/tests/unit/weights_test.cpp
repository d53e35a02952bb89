#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "isoflow/weights.hpp"

namespace {

using isoflow::Density;
using isoflow::kInf;
using isoflow::Slab;
using isoflow::Weight1D;

// Frozen with tests/oracles/frozen_values.py (mpmath, 40 digits).
constexpr double kMassUnitSlab = 0.85562439189214880317;  // int_0^1 exp(-t^2/2)
constexpr double kSqrt2Pi = 2.5066282746310005024;
constexpr double kBetaAffine = 0.2419707245191433498;

Density make(Weight1D w, double c, int dim, double a, double b) {
  return Density(std::move(w), c, dim, Slab{a, b});
}

TEST(Psi, DirectSubstitution) {
  const double origin[] = {0.0, 0.0};
  EXPECT_EQ(isoflow::psi(make(Weight1D::zero(), 1.0, 2, -kInf, kInf), origin), 0.0);
  const double p[] = {1.0, 2.0};
  EXPECT_DOUBLE_EQ(isoflow::psi(make(Weight1D::affine(3, 0), 1.0, 2, -kInf, kInf), p), 1.0);
  const double q[] = {0.0, 1.0};
  EXPECT_DOUBLE_EQ(isoflow::psi(make(Weight1D::log_power(2), 0.5, 2, 0.0, kInf), q), -0.5);
}

TEST(Psi, RejectsPointsOutsideDomain) {
  auto d = make(Weight1D::log_power(2), 0.5, 2, 0.0, kInf);
  const double bad[] = {0.0, -1.0};
  EXPECT_THROW(isoflow::psi(d, bad), isoflow::DomainError);
  const double boundary[] = {0.0, 0.0};
  EXPECT_THROW(isoflow::psi(d, boundary), isoflow::DomainError);
}

TEST(GradPsi, Examples) {
  const double p[] = {0.0, 1.0};
  auto g = isoflow::grad_psi(make(Weight1D::affine(1, 0), 0.5, 2, -kInf, kInf), p);
  EXPECT_DOUBLE_EQ(g[0], 0.0);
  EXPECT_DOUBLE_EQ(g[1], 0.0);
  const double q[] = {1.0, 1.0};
  g = isoflow::grad_psi(make(Weight1D::zero(), 1.0, 2, -kInf, kInf), q);
  EXPECT_DOUBLE_EQ(g[0], -2.0);
  EXPECT_DOUBLE_EQ(g[1], -2.0);
  g = isoflow::grad_psi(make(Weight1D::quadratic(1, 0, 0), 0.5, 2, -kInf, kInf), p);
  EXPECT_DOUBLE_EQ(g[0], 0.0);
  EXPECT_DOUBLE_EQ(g[1], -3.0);
}

TEST(GradPsi, PiecewiseLinearKnotIsNotDifferentiable) {
  auto d = make(Weight1D::piecewise_linear({-1, 0, 1}, {0, 1, 0}), 0.5, 2, -1, 1);
  const double at_knot[] = {0.3, 0.0};
  EXPECT_THROW(isoflow::grad_psi(d, at_knot), isoflow::NonDifferentiableError);
  const double off_knot[] = {0.0, 0.5};
  EXPECT_DOUBLE_EQ(isoflow::grad_psi(d, off_knot)[1], -1.0 - 0.5);
  EXPECT_DOUBLE_EQ(d.weight().one_sided_derivative(0.0, true), -1.0);
  EXPECT_DOUBLE_EQ(d.weight().one_sided_derivative(0.0, false), 1.0);
}

TEST(GradPsi, MatchesCentralDifferencesAtSecondOrder) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-1.5, 1.5);
  const std::vector<Density> densities = {
      make(Weight1D::quadratic(0.7, 0.3, 0.1), 0.5, 3, -kInf, kInf),
      make(Weight1D::log_power(2), 0.5, 2, 0.0, kInf),
      make(Weight1D::affine(-0.4, 2), 1.5, 2, -2, 3),
  };
  for (const auto& d : densities) {
    for (int trial = 0; trial < 10; ++trial) {
      std::vector<double> p(d.ambient_dim());
      for (auto& x : p) x = u(rng);
      p.back() = std::abs(p.back()) + 0.3;
      const auto g = isoflow::grad_psi(d, p);
      double prev_err = 0.0;
      for (double h : {1e-2, 5e-3, 2.5e-3}) {
        double err = 0.0;
        for (std::size_t i = 0; i < p.size(); ++i) {
          auto pp = p, pm = p;
          pp[i] += h;
          pm[i] -= h;
          const double fd = (isoflow::psi(d, pp) - isoflow::psi(d, pm)) / (2 * h);
          err = std::max(err, std::abs(fd - g[i]));
        }
        if (prev_err > 1e-11) {
          EXPECT_GE(prev_err / err, 3.5);
        }
        prev_err = err;
      }
    }
  }
}

TEST(RicF, Examples) {
  const double p[] = {0.3, 0.2};
  const double ex[] = {1.0, 0.0};
  const double et[] = {0.0, 1.0};
  EXPECT_DOUBLE_EQ(isoflow::ric_f(make(Weight1D::zero(), 0.7, 2, -kInf, kInf), p, ex), 1.4);
  EXPECT_DOUBLE_EQ(isoflow::ric_f(make(Weight1D::quadratic(1, 0, 0), 0.5, 2, -kInf, kInf), p, et),
                   3.0);
  EXPECT_DOUBLE_EQ(isoflow::ric_f(make(Weight1D::affine(5, 1), 1.0, 2, -kInf, kInf), p, ex), 2.0);
  auto pl = make(Weight1D::piecewise_linear({-1, 1}, {0, 0}), 1.0, 2, -1, 1);
  EXPECT_THROW(isoflow::ric_f(pl, p, ex), isoflow::SmoothnessError);
}

TEST(RicF, ConcavityImpliesCurvatureBound) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::uniform_real_distribution<double> pos(0.05, 3.0);
  const std::vector<Density> densities = {
      make(Weight1D::zero(), 0.25, 2, -kInf, kInf),
      make(Weight1D::affine(2, -1), 0.5, 3, -kInf, kInf),
      make(Weight1D::quadratic(1.3, 0.2, 0), 1.0, 2, -1, 1),
      make(Weight1D::log_power(0.5), 2.0, 2, 0, kInf),
  };
  for (const auto& d : densities) {
    ASSERT_TRUE(isoflow::check_concavity(d.weight()).concave);
    for (int trial = 0; trial < 200; ++trial) {
      std::vector<double> p(d.ambient_dim()), w(d.ambient_dim());
      for (auto& x : p) x = u(rng);
      p.back() = std::holds_alternative<Weight1D::LogPower>(d.weight().variant()) ? pos(rng)
                                                                                  : u(rng);
      double norm = 0.0;
      for (auto& x : w) {
        x = u(rng);
        norm += x * x;
      }
      for (auto& x : w) x /= std::sqrt(norm);
      EXPECT_GE(isoflow::ric_f(d, p, w), 2.0 * d.c() - 1e-12);
    }
  }
}

TEST(CheckConcavity, PiecewiseLinearSlopes) {
  // slopes 2, 1, 1, 0
  auto ok = Weight1D::piecewise_linear({0, 1, 2, 3, 4}, {0, 2, 3, 4, 4});
  EXPECT_TRUE(isoflow::check_concavity(ok).concave);
  // slopes 1, 2
  auto bad = Weight1D::piecewise_linear({0, 1, 2}, {0, 1, 3});
  auto r = isoflow::check_concavity(bad);
  EXPECT_FALSE(r.concave);
  ASSERT_TRUE(r.knot.has_value());
  EXPECT_EQ(*r.knot, 1u);
}

TEST(CheckConcavity, ClosedFormParameters) {
  EXPECT_FALSE(isoflow::check_concavity(Weight1D::quadratic(-1, 0, 0)).concave);
  EXPECT_FALSE(isoflow::check_concavity(Weight1D::log_power(-0.5)).concave);
  EXPECT_TRUE(isoflow::check_concavity(Weight1D::affine(3, 2)).concave);
  EXPECT_TRUE(isoflow::check_concavity(Weight1D::zero()).concave);
  const double probe[] = {0.5, 1.0, 2.0, 4.0};
  EXPECT_TRUE(isoflow::check_concavity(Weight1D::log_power(1), probe).concave);
}

TEST(Density, Validation) {
  EXPECT_THROW(make(Weight1D::zero(), 0.0, 2, -1, 1), isoflow::ValidationError);
  EXPECT_THROW(make(Weight1D::zero(), 1.0, 2, 1, 1), isoflow::ValidationError);
  EXPECT_THROW(make(Weight1D::zero(), 1.0, 0, -1, 1), isoflow::ValidationError);
  EXPECT_THROW(make(Weight1D::log_power(1), 1.0, 2, -1, 1), isoflow::ValidationError);
  EXPECT_THROW(make(Weight1D::piecewise_linear({0, 1}, {0, 0}), 1.0, 2, -1, 1),
               isoflow::ValidationError);
  EXPECT_NO_THROW(make(Weight1D::log_power(1), 1.0, 2, 0, kInf));
}

TEST(IntegrateWeighted, ClosedFormCases) {
  auto gauss = make(Weight1D::zero(), 0.5, 2, -kInf, kInf);
  auto one = [](double) { return 1.0; };
  auto r = isoflow::integrate_weighted(one, -kInf, kInf, gauss);
  EXPECT_NEAR(r.value, kSqrt2Pi, 1e-8 * kSqrt2Pi);

  auto r01 = isoflow::integrate_weighted(one, 0.0, 1.0, gauss);
  EXPECT_NEAR(r01.value, kMassUnitSlab, 1e-12);

  for (double c : {0.3, 1.0, 4.0}) {
    auto d = make(Weight1D::zero(), c, 2, -kInf, kInf);
    auto odd = isoflow::integrate_weighted([](double t) { return t; }, -kInf, kInf, d);
    EXPECT_NEAR(odd.value, 0.0, 1e-13);
    // Gaussian moments: int t^2 e^{-ct^2} = sqrt(pi/c)/(2c), int t^4 = 3 sqrt(pi/c)/(4c^2)
    const double base = std::sqrt(std::numbers::pi / c);
    auto m2 = isoflow::integrate_weighted([](double t) { return t * t; }, -kInf, kInf, d);
    auto m4 = isoflow::integrate_weighted([](double t) { return t * t * t * t; }, -kInf, kInf, d);
    EXPECT_NEAR(m2.value, base / (2 * c), 1e-8 * base / (2 * c));
    EXPECT_NEAR(m4.value, 3 * base / (4 * c * c), 1e-8 * 3 * base / (4 * c * c));
  }

  // shifted Gaussian: int e^{t - t^2/2} = sqrt(2 pi) e^{1/2}
  auto shifted = make(Weight1D::affine(1, 0), 0.5, 2, -kInf, kInf);
  auto rs = isoflow::integrate_weighted(one, -kInf, kInf, shifted);
  EXPECT_NEAR(rs.value, kSqrt2Pi * std::exp(0.5), 1e-8 * rs.value);
}

TEST(IntegrateWeighted, LogPowerEndpoint) {
  // int_0^inf t^m e^{-t^2/2} dt = 2^{(m-1)/2} Gamma((m+1)/2)
  for (double m : {0.5, 1.0, 2.0, 3.7}) {
    auto d = make(Weight1D::log_power(m), 0.5, 2, 0.0, kInf);
    auto r = isoflow::integrate_weighted([](double) { return 1.0; }, 0.0, kInf, d);
    const double exact = std::pow(2.0, (m - 1) / 2) * std::tgamma((m + 1) / 2);
    EXPECT_NEAR(r.value, exact, 1e-9 * exact) << m;
  }
}

TEST(IntegrateWeighted, TailSoundness) {
  const std::vector<Density> densities = {
      make(Weight1D::zero(), 0.5, 2, -kInf, kInf),
      make(Weight1D::quadratic(1, 0.5, 0), 0.25, 2, -kInf, kInf),
      make(Weight1D::log_power(2), 0.5, 2, 0.0, kInf),
      make(Weight1D::affine(2, 0), 1.0, 2, -1.0, kInf),
  };
  for (const auto& d : densities) {
    isoflow::QuadratureSpec spec;
    auto base = isoflow::integrate_weighted([](double t) { return t * t; }, d.slab().lo,
                                            d.slab().hi, d, spec);
    auto w = isoflow::tail_window(d, spec);
    // integrate over a window 1.5x wider
    const double lo = std::isinf(d.slab().lo) ? 1.5 * w.lo : d.slab().lo;
    const double hi = std::isinf(d.slab().hi) ? 1.5 * w.hi : d.slab().hi;
    auto wide = isoflow::gauss_kronrod([&](double t) { return t * t * d.vertical_density(t); },
                                       lo, hi, spec, std::vector<double>{w.lo, w.hi});
    EXPECT_LE(std::abs(wide.value - base.value), base.error + wide.error);
  }
}

TEST(IntegrateWeighted, RejectsIntervalOutsideSlab) {
  auto d = make(Weight1D::zero(), 0.5, 2, 0.0, 1.0);
  EXPECT_THROW(isoflow::integrate_weighted([](double) { return 1.0; }, -0.5, 1.0, d),
               isoflow::DomainError);
}

TEST(Normalizers, ClosedForms) {
  auto n1 = isoflow::normalizers(make(Weight1D::zero(), 0.5, 2, -kInf, kInf));
  EXPECT_NEAR(n1.alpha, 1.0 / kSqrt2Pi, 1e-15);
  EXPECT_NEAR(n1.beta, 1.0 / kSqrt2Pi, 1e-10);
  auto n2 = isoflow::normalizers(make(Weight1D::zero(), 1.0, 2, -kInf, kInf));
  EXPECT_NEAR(n2.alpha, 1.0 / std::sqrt(std::numbers::pi), 1e-15);
  EXPECT_NEAR(n2.beta, 1.0 / std::sqrt(std::numbers::pi), 1e-10);
  auto n3 = isoflow::normalizers(make(Weight1D::affine(1, 0), 0.5, 2, -kInf, kInf));
  EXPECT_NEAR(n3.beta, kBetaAffine, 1e-10);
}

TEST(GaussianFactor, ClosedForms) {
  EXPECT_EQ(isoflow::gaussian_factor(0, 3.0), 1.0);
  EXPECT_NEAR(isoflow::gaussian_factor(2, std::numbers::pi), 1.0, 1e-15);
  EXPECT_NEAR(isoflow::gaussian_factor(1, 0.5), kSqrt2Pi, 1e-15);
  EXPECT_THROW(isoflow::gaussian_factor(-1, 1.0), isoflow::ValidationError);
}

}  // namespace
