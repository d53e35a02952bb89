#include <cmath>
#include <numbers>
#include <random>
#include <sstream>
#include <vector>

#include <gtest/gtest.h>

#include "isoflow/optimize.hpp"

namespace {

using isoflow::ChordSpline;
using isoflow::Density;
using isoflow::kInf;
using isoflow::Slab;
using isoflow::Weight1D;

constexpr double kMassUnitSlab = 0.85562439189214880317;
constexpr double kMassSymmetricSlab = 1.7112487837842976063;  // int_{-1}^{1} e^{-t^2/2}

Density slab(Weight1D w, double c, double a, double b) { return Density(std::move(w), c, 2, Slab{a, b}); }

TEST(ChordSpline, PartitionOfUnityAndDerivatives) {
  ChordSpline x(-1.0, 2.0, {0.3, -0.2, 0.5, 1.0, 0.1, -0.4, 0.8, 0.2, 0.0, 0.6});
  for (double t : {-1.0, -0.37, 0.0, 0.5, 1.21, 2.0}) {
    auto b = x.basis(t);
    double s0 = 0, s1 = 0, s2 = 0;
    for (int j = 0; j < 4; ++j) {
      s0 += b.vals[0][j];
      s1 += b.vals[1][j];
      s2 += b.vals[2][j];
    }
    EXPECT_NEAR(s0, 1.0, 1e-14);
    EXPECT_NEAR(s1, 0.0, 1e-12);
    EXPECT_NEAR(s2, 0.0, 1e-10);
  }
  for (double t : {-0.8, 0.1, 0.77, 1.6}) {
    const double h = 1e-5;
    auto e = x.eval(t);
    EXPECT_NEAR(e[1], (x.eval(t + h)[0] - x.eval(t - h)[0]) / (2 * h), 1e-8);
    EXPECT_NEAR(e[2], (x.eval(t + h)[1] - x.eval(t - h)[1]) / (2 * h), 1e-6);
  }
  EXPECT_DOUBLE_EQ(x.eval(-1.0)[0], 0.3);
  EXPECT_DOUBLE_EQ(x.eval(2.0)[0], 0.6);
}

TEST(ChordSpline, ReproducesLines) {
  auto x = ChordSpline::line(-1, 1, 12, 0.25, 0.7);
  for (double t : {-1.0, -0.3, 0.4, 1.0}) {
    auto e = x.eval(t);
    EXPECT_NEAR(e[0], 0.25 + 0.7 * t, 1e-14);
    EXPECT_NEAR(e[1], 0.7, 1e-12);
    EXPECT_NEAR(e[2], 0.0, 1e-10);
  }
}

TEST(ChordSpline, CurveSamplesStayInside) {
  for (double hi : {0.1, 0.3, 0.7, 1.0 / 3.0, 2.9}) {
    const auto x = ChordSpline::line(-0.2, hi, 10, 0.0, 0.5);
    for (int n : {2, 7, 101, 201, 333}) {
      const auto c = isoflow::chord_curve(x, n);
      EXPECT_EQ(c.t.front(), -0.2);
      EXPECT_EQ(c.t.back(), hi);
    }
  }
}

TEST(ChordSpline, Validation) {
  EXPECT_THROW(ChordSpline(0, 1, std::vector<double>(7, 0.0)), isoflow::ValidationError);
  EXPECT_THROW(ChordSpline(0, 1, std::vector<double>(33, 0.0)), isoflow::ValidationError);
  std::vector<double> bad(10, 0.0);
  bad[3] = std::nan("");
  EXPECT_THROW(ChordSpline(0, 1, bad), isoflow::ValidationError);
  auto d = slab(Weight1D::zero(), 0.5, 0.0, 1.0);
  EXPECT_THROW(isoflow::weighted_length(d, ChordSpline::line(0, 2, 10, 0, 0)), isoflow::ValidationError);
}

TEST(WeightedLength, VerticalChordOracle) {
  auto d = slab(Weight1D::zero(), 0.5, 0.0, 1.0);
  EXPECT_NEAR(isoflow::weighted_length(d, ChordSpline::line(0, 1, 10, 0.0, 0.0)), kMassUnitSlab, 1e-14);
  for (double s : {-1.0, 0.4, 2.0})
    EXPECT_NEAR(isoflow::weighted_length(d, ChordSpline::line(0, 1, 10, s, 0.0)), std::exp(-s * s / 2) * kMassUnitSlab,
                1e-14);
}

TEST(EnclosedArea, SymmetryAndLimits) {
  auto d = slab(Weight1D::zero(), 0.5, -1.0, 1.0);
  const double vtot = std::sqrt(2 * std::numbers::pi) * kMassSymmetricSlab;
  EXPECT_NEAR(isoflow::enclosed_area(d, ChordSpline::line(-1, 1, 10, 0, 0)), vtot / 2, 1e-13);
  EXPECT_NEAR(isoflow::enclosed_area(d, ChordSpline::line(-1, 1, 10, -40, 0)), 0.0, 1e-300);
}

TEST(EnclosedArea, TiltedChordMatchesGrid) {
  auto d = slab(Weight1D::zero(), 0.5, -1.0, 1.0);
  const double slope = std::tan(0.5);
  const double area = isoflow::enclosed_area(d, ChordSpline::line(-1, 1, 10, 0.3, slope));
  // Brute-force tensor midpoint rule on [-12, X(t)] x [-1, 1].
  const int nt = 2000;
  double brute = 0.0;
  for (int i = 0; i < nt; ++i) {
    const double t = -1 + (i + 0.5) * 2.0 / nt;
    const double X = 0.3 + slope * t;
    const int nx = 4000;
    const double hx = (X + 12) / nx;
    double row = 0.0;
    for (int j = 0; j < nx; ++j) {
      const double x = -12 + (j + 0.5) * hx;
      row += std::exp(-0.5 * x * x);
    }
    brute += row * hx * std::exp(-0.5 * t * t) * 2.0 / nt;
  }
  EXPECT_NEAR(area, brute, 1e-6);
}

TEST(ShapeGradient, MatchesFiniteDifferences) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> z(0.0, 0.3);
  for (auto w : {Weight1D::zero(), Weight1D::quadratic(1, 0.2, 0), Weight1D::affine(0.7, 0.1)}) {
    auto d = slab(w, 0.5, -1.0, 1.0);
    std::vector<double> coef(12);
    for (double& c : coef) c = z(rng);
    ChordSpline x(-1, 1, coef);
    auto g = isoflow::shape_gradient(d, x);
    for (int j = 0; j < x.size(); ++j) {
      const double h = 1e-6;
      ChordSpline p = x, q = x;
      p.coef()[j] += h;
      q.coef()[j] -= h;
      const double fl = (isoflow::weighted_length(d, p) - isoflow::weighted_length(d, q)) / (2 * h);
      const double fv = (isoflow::enclosed_area(d, p) - isoflow::enclosed_area(d, q)) / (2 * h);
      EXPECT_NEAR(g.length[j], fl, 1e-4 * std::max(std::abs(fl), 1e-2)) << j;
      EXPECT_NEAR(g.area[j], fv, 1e-6 * std::abs(fv)) << j;
    }
  }
}

TEST(Stationarity, VerticalAndTiltedChords) {
  auto d = slab(Weight1D::zero(), 0.5, -1.0, 1.0);
  auto v = isoflow::stationarity_report(d, ChordSpline::line(-1, 1, 10, 0.4, 0.0));
  EXPECT_TRUE(v.stationary);
  EXPECT_NEAR(v.hf_spread(), 0.0, 1e-12);
  auto t = isoflow::stationarity_report(d, ChordSpline::line(-1, 1, 10, 0.0, 1.0));
  EXPECT_FALSE(t.stationary);
  EXPECT_NEAR(t.angle_top_deg, 45.0, 1e-9);
}

TEST(Minimize, VerticalChordIsStationaryAtStart) {
  auto d = slab(Weight1D::zero(), 0.5, -1.0, 1.0);
  const double vtot = std::sqrt(2 * std::numbers::pi) * kMassSymmetricSlab;
  isoflow::OptimizerConfig cfg;
  cfg.target_area = vtot / 2;
  cfg.grad_tol = 1e-8;
  auto r = isoflow::minimize(d, cfg, ChordSpline::line(-1, 1, 12, 0.0, 0.0));
  ASSERT_EQ(r.trace.size(), 1u);
  EXPECT_LT(r.trace[0].grad_norm, 1e-8);
  EXPECT_EQ(r.status, isoflow::OptimizerStatus::Converged);
}

TEST(Minimize, TiltedChordStraightens) {
  auto d = slab(Weight1D::zero(), 0.5, -1.0, 1.0);
  const double vtot = std::sqrt(2 * std::numbers::pi) * kMassSymmetricSlab;
  isoflow::OptimizerConfig cfg;
  cfg.target_area = vtot / 2;
  auto r = isoflow::minimize(d, cfg, ChordSpline::line(-1, 1, 12, 0.2, std::tan(std::numbers::pi / 6)));
  EXPECT_EQ(r.status, isoflow::OptimizerStatus::Converged);
  EXPECT_NEAR(r.length / kMassSymmetricSlab, 1.0, 5e-3);
  EXPECT_GE(r.length, kMassSymmetricSlab - 1e-6);
  EXPECT_TRUE(r.stationarity.stationary);
  EXPECT_LE(r.stationarity.angle_bottom_deg, 1.0);
  for (std::size_t i = 1; i < r.trace.size(); ++i) {
    EXPECT_LE(r.trace[i].length, r.trace[i - 1].length);
    EXPECT_LE(std::abs(r.trace[i].area_err), 1e-8 * vtot);
  }
}

TEST(Minimize, QuadraticBeatsParallelCandidate) {
  auto d = slab(Weight1D::quadratic(1, 0, 0), 0.5, -1.0, 1.0);
  const double vtot = std::sqrt(2 * std::numbers::pi) * isoflow::vertical_mass(d, -1, 1).value;
  isoflow::OptimizerConfig cfg;
  cfg.target_area = vtot / 2;
  auto r = isoflow::minimize(d, cfg, ChordSpline::line(-1, 1, 12, 0.0, 1.5));
  const double parallel = std::sqrt(2 * std::numbers::pi);  // horizontal line t = 0
  EXPECT_LT(r.length, parallel);
  EXPECT_TRUE(r.stationarity.stationary);
}

TEST(Minimize, RejectsBadTarget) {
  auto d = slab(Weight1D::zero(), 0.5, -1.0, 1.0);
  isoflow::OptimizerConfig cfg;
  cfg.target_area = -1;
  EXPECT_THROW(isoflow::minimize(d, cfg, ChordSpline::line(-1, 1, 12, 0, 0)), isoflow::ValidationError);
}

TEST(Minimize, TraceCsv) {
  std::ostringstream os;
  isoflow::write_trace_csv(os, {{0, 1.0, 0.0, 0.5}});
  EXPECT_EQ(os.str(), "iter,length,area_err,grad_norm\n0,1,0,0.5\n");
}

}  // namespace
