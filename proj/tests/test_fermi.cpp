#include <gtest/gtest.h>

#include "fbloch/fermi.hpp"

using namespace fbloch;

namespace {

double max_radial_deviation(const FermiSurface& s, double r) {
  double d = 0;
  for (const auto& c : s.components)
    for (const auto& v : c.vertices) d = std::max(d, std::abs(std::hypot(v.kappa[0], v.kappa[1]) - r));
  return d;
}

}  // namespace

TEST(Extract, FreeCircle) {
  auto field = SeparableField::free();
  FermiSurface s = extract(field, 5.0);
  ASSERT_EQ(s.components.size(), 1u);
  EXPECT_TRUE(s.components[0].closed);
  EXPECT_LT(max_radial_deviation(s, std::sqrt(5.0)), 1e-5);
  EXPECT_LT(s.max_residual, 1e-6);
  EXPECT_NEAR(s.components[0].length(), two_pi * std::sqrt(5.0), 1e-2);
  auto r = curvature_check(s);
  EXPECT_TRUE(r.positive);
  EXPECT_NEAR(r.min_curvature, 1 / std::sqrt(5.0), 1e-4);
  EXPECT_NEAR(r.max_curvature, 1 / std::sqrt(5.0), 1e-4);
}

TEST(Extract, OrientationAndNormals) {
  auto field = SeparableField::free(0.3, -0.2);
  FermiSurface s = extract(field, 4.0);
  ASSERT_EQ(s.components.size(), 1u);
  const auto& v = s.components[0].vertices;
  double area = 0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const auto &a = v[i].kappa, &b = v[(i + 1) % v.size()].kappa;
    area += a[0] * b[1] - a[1] * b[0];
    // Geometric normal of the chord against the stored normal.
    Vec2 t{b[0] - a[0], b[1] - a[1]};
    double n = std::hypot(t[0], t[1]);
    Vec2 geo{t[1] / n, -t[0] / n};
    EXPECT_GT(geo[0] * v[i].normal[0] + geo[1] * v[i].normal[1], 0.99);
    // Radial direction for a free field.
    double r = std::hypot(a[0], a[1]);
    EXPECT_GT((a[0] * v[i].normal[0] + a[1] * v[i].normal[1]) / r, 0.999);
  }
  EXPECT_GT(area, 0);  // counterclockwise
}

TEST(Extract, EmptyBelowFloor) {
  auto field = SeparableField::free();
  EXPECT_TRUE(extract(field, 0.0).empty());
  EXPECT_TRUE(extract(field, -1.0).empty());
  EXPECT_THROW(curvature_check(extract(field, -1.0)), Error);
}

TEST(Extract, MonotoneDeformation) {
  auto field = SeparableField::free();
  double tau = 7.0, dt = 0.05;
  auto a = extract(field, tau), b = extract(field, tau + dt);
  double ra = 0, rb = 0;
  for (auto& v : a.components[0].vertices) ra += std::hypot(v.kappa[0], v.kappa[1]);
  for (auto& v : b.components[0].vertices) rb += std::hypot(v.kappa[0], v.kappa[1]);
  ra /= a.components[0].vertices.size();
  rb /= b.components[0].vertices.size();
  double expect = dt / (2 * std::sqrt(tau));
  EXPECT_NEAR((rb - ra) / expect, 1.0, 0.05);
}

TEST(Extract, LargeFreeCircleAcrossZones) {
  auto field = SeparableField::free();
  FermiSurface s = extract(field, 40.0, {.step = 0.1});
  ASSERT_EQ(s.components.size(), 1u);
  EXPECT_LT(max_radial_deviation(s, std::sqrt(40.0)), 1e-5);
  EXPECT_EQ(s.bragg_vertices, 0);
}

TEST(Extract, SeparableCurvatureTwoWays) {
  // Closed-form separable curvature against fourth-order differences of Lambda.
  Potential1D v1 = Potential1D::sample([](double x) { return 0.5 * std::cos(two_pi * x); }, 512);
  Potential1D v2 = Potential1D::constant(0.2);
  SeparableField field(v1, v2, 12);
  Hill1D h1(v1, 2);
  FermiSurface s = extract(field, 3.0, {.step = 0.1});
  ASSERT_EQ(s.components.size(), 1u);
  int n = 0;
  double worst = 0;
  const auto& vs = s.components[0].vertices;
  for (std::size_t i = 0; i < vs.size() && n < 200; i += std::max<std::size_t>(1, vs.size() / 200), ++n) {
    Vec2 k = vs[i].kappa;
    auto [d1, dd1] = h1.band_derivatives(1, k[0]);
    double d2 = 2 * k[1], dd2 = 2.0;
    double closed = (dd1 * d2 * d2 + dd2 * d1 * d1) / std::pow(d1 * d1 + d2 * d2, 1.5);
    double fd = curvature_fd(field, k, 1e-3);
    worst = std::max(worst, std::abs(fd - closed) / std::abs(closed));
    EXPECT_NEAR(vs[i].curvature, closed, 1e-3 * std::abs(closed));
  }
  EXPECT_LT(worst, 1e-3);
}

TEST(Extract, FreeSeparableConstantsClosedForm) {
  auto field = SeparableField::free(1.0, 2.0);
  FermiSurface s = extract(field, 7.0);
  for (auto& v : s.components[0].vertices) {
    double k1 = v.kappa[0], k2 = v.kappa[1];
    double closed = (2 * 4 * k2 * k2 + 2 * 4 * k1 * k1) / std::pow(4 * k1 * k1 + 4 * k2 * k2, 1.5);
    EXPECT_NEAR(v.curvature, closed, 1e-4);
    EXPECT_NEAR(curvature_fd(field, v.kappa, 1e-3), closed, 1e-4);
  }
}

TEST(Extract, FigureOneWeakPotential) {
  GalerkinField field(PotentialSpec::figure1(0.2), 3);
  FermiSurface low = extract(field, 5.0, {.step = 0.1});
  ASSERT_FALSE(low.empty());
  for (const auto& c : low.components) EXPECT_TRUE(c.closed);
  EXPECT_LT(low.max_residual, 1e-6);
  EXPECT_TRUE(curvature_check(low).positive);

  // Above the first gap the level set still closes up, and any negative
  // curvature sits in the thin strip along a Bragg line.
  FermiSurface s = extract(field, 15.0, {.step = 0.1});
  ASSERT_FALSE(s.empty());
  EXPECT_GT(s.bragg_vertices, 0);
  for (const auto& c : s.components) {
    EXPECT_TRUE(c.closed);
    for (const auto& v : c.vertices) {
      if (v.bragg || v.curvature >= 0) continue;
      double d = std::min(std::abs(std::abs(v.kappa[0]) - pi), std::abs(std::abs(v.kappa[1]) - pi));
      EXPECT_LT(d, 0.3) << v.kappa[0] << "," << v.kappa[1];
    }
  }
}

TEST(ReduceZone, FitsBelowThreshold) {
  auto field = SeparableField::free();
  auto s = extract(field, 1.0);
  auto r = reduce_zone(s);
  ASSERT_EQ(r.component_count(), 1);
  EXPECT_TRUE(r.closed[0]);
  for (std::size_t i = 0; i < r.pieces[0].size(); ++i) {
    EXPECT_EQ(r.pieces[0][i][0], s.components[0].vertices[i].kappa[0]);
    EXPECT_EQ(r.pieces[0][i][1], s.components[0].vertices[i].kappa[1]);
  }
}

TEST(ReduceZone, SplitsAboveThreshold) {
  auto field = SeparableField::free();
  auto r = reduce_zone(extract(field, 15.0));
  EXPECT_GT(r.component_count(), 1);
  for (const auto& piece : r.pieces)
    for (const Vec2& k : piece) {
      EXPECT_LE(std::abs(k[0]), pi);
      EXPECT_LE(std::abs(k[1]), pi);
      Vec2 f = fold(k);
      EXPECT_EQ(f[0], k[0]);
      EXPECT_EQ(f[1], k[1]);
      bool hit = false;
      for (auto& [s, v] : field.band_values(k)) hit |= std::abs(v - 15.0) < 1e-6;
      EXPECT_TRUE(hit);
    }
}

TEST(ReduceZone, ObservedThreshold) {
  // Smallest tau on a scan at which the folded free circle falls apart.
  auto field = SeparableField::free();
  double first = 0;
  for (double tau = 9.0; tau <= 11.0; tau += 0.05)
    if (reduce_zone(extract(field, tau)).component_count() > 1) {
      first = tau;
      break;
    }
  EXPECT_NEAR(first, pi * pi, 0.06);
}

TEST(Arcs, FreeQuarterCircles) {
  auto arcs = separable_arcs(Potential1D::constant(0), Potential1D::constant(0), 5.0, 64);
  EXPECT_LT(arcs.max_residual, 1e-8);
  EXPECT_LT(arcs.closure_gap, 1e-8);
  for (const auto& a : arcs.arcs)
    for (const Vec2& k : a) EXPECT_NEAR(std::hypot(k[0], k[1]), std::sqrt(5.0), 1e-8);
  for (const auto& c : arcs.curvature)
    for (double v : c) EXPECT_NEAR(v, 1 / std::sqrt(5.0), 1e-6);
  // Quadrants in order.
  EXPECT_GE(arcs.arcs[0][10][0], 0);
  EXPECT_GE(arcs.arcs[0][10][1], 0);
  EXPECT_LE(arcs.arcs[1][10][0], 0);
  EXPECT_LE(arcs.arcs[2][10][1], 0);
  EXPECT_GE(arcs.arcs[3][10][0], 0);
}

TEST(Arcs, WindowEnforced) {
  EXPECT_THROW(separable_arcs(Potential1D::constant(0), Potential1D::constant(0), 10.0), Error);
  EXPECT_THROW(separable_arcs(Potential1D::constant(1), Potential1D::constant(1), 1.5), Error);
}

TEST(Arcs, MathieuAgainstMarchingSquares) {
  Potential1D v1 = Potential1D::sample([](double x) { return 1.0 * std::cos(two_pi * x); }, 1024);
  Potential1D v2 = Potential1D::constant(0.0);
  Hill1D h1(v1, 2);
  A2Window w = a2_window(h1, Hill1D(v2, 2));
  double lambda = 0.5 * (w.lo + w.hi);
  auto arcs = separable_arcs(v1, v2, lambda, 128);
  EXPECT_LT(arcs.max_residual, 1e-8);
  EXPECT_LT(arcs.closure_gap, 1e-8);
  EXPECT_GT(arcs.min_curvature, 0);
  SeparableField field(v1, v2, 16);
  auto s = extract(field, lambda, {.step = 0.05});
  EXPECT_LT(hausdorff(arcs.points(), surface_points(s)), 2 * s.step);
  EXPECT_NEAR(curvature_check(s).min_curvature, arcs.min_curvature, 1e-3);
}
