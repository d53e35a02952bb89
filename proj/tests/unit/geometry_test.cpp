#include <cmath>
#include <numbers>
#include <random>
#include <sstream>
#include <vector>

#include <gtest/gtest.h>

#include "isoflow/geometry.hpp"

namespace {

using isoflow::Density;
using isoflow::kInf;
using isoflow::Slab;
using isoflow::Weight1D;

// Frozen with tests/oracles/frozen_values.py: omega'' * int x^2 e^{-x^2/2} dx.
constexpr double kWitnessQuadratic = -5.0132565492620010048;

Density plane(Weight1D w, double c = 0.5, double a = -kInf, double b = kInf) {
  return Density(std::move(w), c, 2, Slab{a, b});
}

isoflow::DiscreteCurve line(double x0, double t0, double x1, double t1, int n) {
  std::vector<double> x(n), t(n);
  for (int i = 0; i < n; ++i) {
    const double u = static_cast<double>(i) / (n - 1);
    x[i] = x0 + u * (x1 - x0);
    t[i] = t0 + u * (t1 - t0);
  }
  auto c = isoflow::make_curve(std::move(x), std::move(t));
  c.step = std::hypot(x1 - x0, t1 - t0) / (n - 1);
  return c;
}

double weighted_integral(const Density& d, const isoflow::DiscreteCurve& c, const std::vector<double>& u) {
  auto w = isoflow::detail::area_weights(d, c);
  double s = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) s += w[i] * u[i];
  return s;
}

TEST(FMeanCurvature, LinesFromTheSubstitution) {
  auto quad = plane(Weight1D::quadratic(1, 0.3, 0));
  auto vertical = line(1.0, -2.0, 1.0, 2.0, 21);
  for (std::size_t i = 0; i < vertical.size(); ++i) EXPECT_NEAR(isoflow::f_mean_curvature(quad, vertical, i), -1.0, 1e-14);

  auto horizontal = line(-2.0, 0.7, 2.0, 0.7, 21);
  const double expect = -(-2.0 * 0.7 + 0.3) + 2 * 0.5 * 0.7;
  for (std::size_t i = 0; i < horizontal.size(); ++i)
    EXPECT_NEAR(isoflow::f_mean_curvature(quad, horizontal, i), expect, 1e-14);

  auto gauss = plane(Weight1D::zero());
  auto diag = line(-1.0, -2.0, 1.0, 2.0, 21);
  EXPECT_LE(isoflow::f_mean_curvature_spread(gauss, diag).spread(), 1e-12);
  EXPECT_NEAR(isoflow::f_mean_curvature_spread(gauss, diag).mean, 0.0, 1e-12);
}

TEST(FMeanCurvature, ConstancyClassification) {
  auto quad = plane(Weight1D::quadratic(1, 0, 0));
  const double r = std::sqrt(0.5);
  EXPECT_GT(isoflow::f_mean_curvature_spread(quad, line(-r, -r, r, r, 41)).spread(), 0.01);
  EXPECT_LE(isoflow::f_mean_curvature_spread(quad, line(0.3, -1, 0.3, 1, 41)).spread(), 1e-10);
  EXPECT_LE(isoflow::f_mean_curvature_spread(quad, line(-1, 0.4, 1, 0.4, 41)).spread(), 1e-10);
  auto aff = plane(Weight1D::affine(1.5, 0));
  EXPECT_LE(isoflow::f_mean_curvature_spread(aff, line(-r + 0.2, -r, r + 0.2, r, 41)).spread(), 1e-10);
}

TEST(FMeanCurvature, RejectsPiecewiseLinear) {
  auto d = plane(Weight1D::piecewise_linear({-1, 0, 1}, {0, 1, 0}), 0.5, -1, 1);
  auto c = line(0, -0.5, 0, 0.5, 5);
  EXPECT_THROW(isoflow::f_mean_curvature(d, c, 2), isoflow::SmoothnessError);
}

TEST(CmcShoot, MinimalLineThroughOrigin) {
  auto d = plane(Weight1D::zero());
  for (double angle : {0.0, 0.4, 1.3, 2.9}) {
    auto c = isoflow::cmc_shoot(d, 0.0, 0.0, 0.0, angle, 1e-3, 2.0);
    double worst = 0.0;
    for (std::size_t i = 0; i < c.size(); ++i)
      worst = std::max(worst, std::abs(-std::sin(angle) * c.x[i] + std::cos(angle) * c.t[i]));
    EXPECT_LE(worst, 1e-10);
  }
}

TEST(CmcShoot, VerticalLineAtUnitDistance) {
  auto d = plane(Weight1D::zero());
  auto c = isoflow::cmc_shoot(d, -1.0, 1.0, 0.0, std::numbers::pi / 2, 1e-3, 1.5);
  for (std::size_t i = 0; i < c.size(); ++i) EXPECT_NEAR(c.x[i], 1.0, 1e-12);
  EXPECT_NEAR(c.t.back(), 1.5, 1e-12);
  EXPECT_LE(isoflow::shoot_residual(d, c, -1.0), 1e-8);
}

TEST(CmcShoot, AffineTiltedLineStaysStraight) {
  auto d = plane(Weight1D::affine(1, 0));
  const double th = 0.6;
  const double nx = -std::sin(th), nt = std::cos(th);
  const double x0 = 0.5, t0 = -0.2;
  const double h = -(1.0 * nt - 2 * 0.5 * (x0 * nx + t0 * nt));
  auto c = isoflow::cmc_shoot(d, h, x0, t0, th, 1e-3, 2.0);
  for (std::size_t i = 0; i < c.size(); ++i)
    EXPECT_NEAR(nx * (c.x[i] - x0) + nt * (c.t[i] - t0), 0.0, 1e-10);
  EXPECT_LE(isoflow::shoot_residual(d, c, h), 1e-8);
}

TEST(CmcShoot, ResidualIsFourthOrder) {
  auto d = plane(Weight1D::zero());
  std::vector<double> res;
  for (double h : {4e-2, 2e-2, 1e-2}) res.push_back(isoflow::shoot_residual(d, isoflow::cmc_shoot(d, -1.0, 0.5, -0.3, 1.2, h, 2.0), -1.0));
  EXPECT_GT(res[0] / res[1], 12.0);
  EXPECT_GT(res[1] / res[2], 12.0);
}

TEST(CmcShoot, StopsOnSlabBoundary) {
  auto d = plane(Weight1D::quadratic(1, 0, 0), 0.5, -1, 1);
  auto c = isoflow::cmc_shoot(d, 0.3, 0.2, 0.0, 1.2, 1e-3, 10.0);
  EXPECT_TRUE(c.end_on_boundary);
  EXPECT_DOUBLE_EQ(c.t.back(), 1.0);
  EXPECT_FALSE(c.start_on_boundary);
}

TEST(Jacobi, StraightLinesAreExact) {
  auto aff = plane(Weight1D::affine(2, 0));
  EXPECT_LE(isoflow::jacobi_residual(aff, line(-1, -1, 1, 1.5, 51), {1.0, 0.0}), 1e-10);
  auto quad = plane(Weight1D::quadratic(1, 0, 0));
  EXPECT_LE(isoflow::jacobi_residual(quad, line(0.7, -2, 0.7, 2, 51), {1.0, 0.0}), 1e-12);
}

TEST(Jacobi, RejectsNonConstantCurvature) {
  auto quad = plane(Weight1D::quadratic(1, 0, 0));
  EXPECT_THROW(isoflow::jacobi_residual(quad, line(-1, -1, 1, 1, 41), {1.0, 0.0}), isoflow::PreconditionError);
}

TEST(Jacobi, SecondOrderConvergenceOnShotCurves) {
  auto d = plane(Weight1D::zero());
  for (double target : {0.0, -1.0}) {
    std::vector<double> res;
    for (double h : {4e-3, 2e-3, 1e-3}) {
      auto c = isoflow::cmc_shoot(d, target, 0.6, -0.5, 1.0, h, 2.5);
      res.push_back(isoflow::jacobi_residual(d, c, {1.0, 0.0}));
    }
    EXPECT_GE(res[0] / res[1], 3.5) << target;
    EXPECT_GE(res[1] / res[2], 3.5) << target;
    EXPECT_LE(res[2], 1e-4);
  }
}

TEST(IndexForm, ZeroFunction) {
  auto d = plane(Weight1D::zero());
  auto c = line(0, -3, 0, 3, 101);
  std::vector<double> z(c.size(), 0.0);
  EXPECT_EQ(isoflow::index_form(d, c, z, z).value, 0.0);
}

TEST(IndexForm, GaussianCoordinateFunctionIsNeutral) {
  auto d = plane(Weight1D::zero());
  auto v = isoflow::parallel_halfspace_stability(d, 0.0);
  EXPECT_TRUE(v.stable);
  EXPECT_NEAR(v.witness, 0.0, 1e-6);
  EXPECT_EQ(v.closed_form, 0.0);
}

TEST(Stability, QuadraticIsUnstableWithWitness) {
  auto d = plane(Weight1D::quadratic(1, 0, 0));
  auto v = isoflow::parallel_halfspace_stability(d, 0.0);
  EXPECT_FALSE(v.stable);
  EXPECT_NEAR(v.closed_form, kWitnessQuadratic, 1e-13);
  EXPECT_NEAR(v.witness / kWitnessQuadratic, 1.0, 1e-4);
  EXPECT_LE(v.witness_error, 1e-6);
}

TEST(Stability, OffsetLevelScalesWithDensity) {
  auto d = plane(Weight1D::quadratic(1, 0.5, 0.2), 0.5, -1, 2);
  auto v = isoflow::parallel_halfspace_stability(d, 0.8);
  EXPECT_NEAR(v.witness / v.closed_form, 1.0, 1e-4);
}

TEST(Stability, AffineStablePiecewiseRejected) {
  EXPECT_TRUE(isoflow::parallel_halfspace_stability(plane(Weight1D::affine(1, 0)), 0.5).stable);
  auto pl = plane(Weight1D::piecewise_linear({-1, 0, 1}, {0, 1, 0}), 0.5, -1, 1);
  EXPECT_THROW(isoflow::parallel_halfspace_stability(pl, 0.5), isoflow::SmoothnessError);
}

TEST(IndexForm, VerticalLineStableForMeanZeroFunctions) {
  auto d = plane(Weight1D::quadratic(1, 0.2, 0), 0.5, -1, 1);
  auto c = line(0.3, -1, 0.3, 1, 201);
  std::mt19937_64 rng(11);
  std::normal_distribution<double> coef(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> u(c.size());
    double a[4];
    for (double& x : a) x = coef(rng);
    for (std::size_t i = 0; i < u.size(); ++i) {
      const double t = c.t[i];
      u[i] = a[0] * t + a[1] * t * t + a[2] * std::sin(3 * t) + a[3] * std::cos(5 * t);
    }
    const double mean = weighted_integral(d, c, u) / weighted_integral(d, c, std::vector<double>(u.size(), 1.0));
    for (double& x : u) x -= mean;
    EXPECT_GE(isoflow::index_form(d, c, u, u).value, -1e-6);
  }
}

TEST(QForm, AgreesWithIndexFormForBump) {
  auto d = plane(Weight1D::quadratic(0.5, 0, 0));
  auto c = line(0.4, -2, 0.4, 2, 4001);
  std::vector<double> u(c.size());
  for (std::size_t i = 0; i < u.size(); ++i) {
    const double t = c.t[i];
    u[i] = std::abs(t) < 1 ? std::exp(-1.0 / (1 - t * t)) : 0.0;
  }
  const double i_f = isoflow::index_form(d, c, u, u).value;
  const double q_f = isoflow::q_form(d, c, u).value;
  EXPECT_NEAR(q_f, i_f, 1e-4);
}

TEST(QForm, ConstantOnClosedCurve) {
  auto d = plane(Weight1D::quadratic(0.5, 0, 0));
  const int n = 2000;
  std::vector<double> x(n), t(n);
  for (int i = 0; i < n; ++i) {
    const double a = 2 * std::numbers::pi * i / n;
    x[i] = 0.2 + std::cos(a);
    t[i] = std::sin(a);
  }
  auto c = isoflow::make_curve(x, t, true);
  std::vector<double> u(n, 1.0);
  auto q = isoflow::q_form(d, c, u);
  auto w = isoflow::detail::area_weights(d, c);
  double expect = 0.0;
  for (int i = 0; i < n; ++i) expect -= w[i] * (isoflow::ric_normal(d, c.t[i], c.nt[i]) + c.k[i] * c.k[i]);
  EXPECT_LT(q.value, 0.0);
  EXPECT_NEAR(q.value, expect, 1e-12 * std::abs(expect));
  EXPECT_EQ(q.boundary_term, 0.0);
}

TEST(TestFunction, VerticalLineTranslationIsTrivial) {
  auto d = plane(Weight1D::zero(), 0.5, 0, 1);
  auto c = line(0.5, 0, 0.5, 1, 51);
  auto tf = isoflow::translation_test_function(d, c, {1.0, 0.0});
  EXPECT_FALSE(tf.degenerate);
  EXPECT_NEAR(tf.alpha, 1.0, 1e-15);
  for (double v : tf.u) EXPECT_NEAR(v, 0.0, 1e-15);
  auto q = isoflow::q_form(d, c, tf.u);
  EXPECT_GE(q.value, -1e-6);

  auto deg = isoflow::translation_test_function(d, c, {0.0, 1.0});
  EXPECT_TRUE(deg.degenerate);
}

TEST(TestFunction, MeanZeroOnShotCurve) {
  auto d = plane(Weight1D::zero());
  auto c = isoflow::cmc_shoot(d, -1.0, 0.6, -0.5, 1.0, 1e-3, 2.5);
  auto tf = isoflow::translation_test_function(d, c, {1.0, 0.0});
  const double area = weighted_integral(d, c, std::vector<double>(c.size(), 1.0));
  EXPECT_LE(std::abs(weighted_integral(d, c, tf.u)), 1e-10 * area);
}

TEST(Curve, CsvHeader) {
  std::ostringstream os;
  isoflow::write_curve_csv(os, line(0, 0, 1, 1, 3));
  EXPECT_EQ(os.str().substr(0, 11), "x,t,Nx,Nt,k");
}

}  // namespace
