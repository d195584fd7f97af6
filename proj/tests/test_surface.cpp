#include <gtest/gtest.h>

#include <cmath>

#include "fbloch/surface.hpp"

using namespace fbloch;

namespace {

SeparableField lemma_field() {
  auto v = [](double mu) {
    return Potential1D::sample([mu](double x) { return mu + 0.1 * std::cos(two_pi * x); }, 512);
  };
  return SeparableField(v(0.0), v(0.3), 10);
}

double lemma_lambda() {
  auto f = lemma_field();
  A2Window w = a2_window(Hill1D(f.axis(0).potential(), 2), Hill1D(f.axis(1).potential(), 2));
  return 0.5 * (w.lo + w.hi);
}

}  // namespace

TEST(FermiOscillatory, FreeDiagonal) {
  auto field = SeparableField::free();
  auto s = extract(field, 5.0);
  cplx a = fermi_oscillatory(s, field, {0.3, 0.1}, {0.3, 0.1});
  EXPECT_NEAR(a.real(), 1 / (4 * pi), 1e-9);
  EXPECT_NEAR(a.imag(), 0, 1e-12);
}

TEST(FermiOscillatory, FreeBessel) {
  // (2 pi)^{-2} int_{|k| = sqrt(l)} e^{i<k,r>} / (2 sqrt(l)) ds = J_0(sqrt(l)|r|)/(4 pi)
  auto field = SeparableField::free();
  for (double lambda : {1.0, 5.0}) {
    auto s = extract(field, lambda);
    for (double r : {0.5, 2.0, 10.0, 40.0}) {
      Vec2 x{0.2 + r * 0.6, -0.1 + r * 0.8}, y{0.2, -0.1};
      cplx a = fermi_oscillatory(s, field, x, y);
      EXPECT_NEAR(a.real(), std::cyl_bessel_j(0.0, std::sqrt(lambda) * r) / (4 * pi), 1e-9) << lambda << " " << r;
      EXPECT_NEAR(a.imag(), 0, 1e-9);
    }
  }
}

TEST(FermiOscillatory, Symmetries) {
  auto field = lemma_field();
  auto s = extract(field, lemma_lambda(), {.step = 0.1});
  Vec2 x{0.37, 0.81}, y{-1.2, 0.45};
  cplx axy = fermi_oscillatory(s, field, x, y), ayx = fermi_oscillatory(s, field, y, x);
  EXPECT_NEAR(std::abs(axy - std::conj(ayx)), 0, 1e-10);
  for (Label m : {Label{1, 0}, Label{0, -2}, Label{3, 1}}) {
    cplx l = fermi_oscillatory(s, field, {x[0] + m[0], x[1] + m[1]}, y);
    cplx r = fermi_oscillatory(s, field, x, {y[0] - m[0], y[1] - m[1]});
    EXPECT_NEAR(std::abs(l - r), 0, 1e-8 * std::abs(l) + 1e-12);
  }
}

TEST(FermiOscillatory, PolylineAgreesWithAngularRule) {
  // An open copy of the circle forces the polyline path.
  auto field = lemma_field();
  auto s = extract(field, lemma_lambda(), {.step = 0.1});
  Vec2 x{0.3, 0.2}, y{-0.4, 0.1};
  cplx spectral = fermi_oscillatory(s, field, x, y);
  FermiSurface cut = s;
  cut.components[0].closed = false;
  cut.components[0].vertices.push_back(cut.components[0].vertices.front());
  SurfaceRule rule = surface_rule(field, cut, {{x, y}}, {.rel_tol = 1e-7, .max_level = 6});
  EXPECT_FALSE(rule.spectral);
  EXPECT_NEAR(std::abs(rule.integrate(x, y) - spectral), 0, 1e-5 * std::abs(spectral));
}

TEST(FermiOscillatory, GalerkinDiagonalPositive) {
  GalerkinField field(PotentialSpec::figure1(0.2), 3);
  auto s = extract(field, 5.0, {.step = 0.1});
  Vec2 x{0.25, 0.6};
  cplx a = fermi_oscillatory(s, field, x, x);
  EXPECT_GT(a.real(), 0);
  EXPECT_NEAR(a.imag(), 0, 1e-10);
  Vec2 y{0.9, -0.3};
  EXPECT_NEAR(std::abs(fermi_oscillatory(s, field, x, y) - std::conj(fermi_oscillatory(s, field, y, x))), 0, 1e-9);
}

TEST(FermiOscillatory, EmptySurface) {
  auto field = SeparableField::free();
  EXPECT_THROW(fermi_oscillatory(extract(field, -1.0), field, {0, 0}, {0, 0}), Error);
}

TEST(Farfield, FreeResonantPoints) {
  auto field = SeparableField::free();
  double lambda = 5.0;
  auto s = extract(field, lambda);
  Vec2 y{0.1, 0.2}, v{0.6, -0.8};
  double r = 7.0;
  Vec2 x{y[0] + r * v[0], y[1] + r * v[1]};
  Farfield f = farfield_leading(s, field, x, y);
  ASSERT_EQ(f.points.size(), 2u);
  for (const auto& p : f.points) {
    EXPECT_NEAR(p.kappa[0], p.sign * std::sqrt(lambda) * v[0], 1e-8);
    EXPECT_NEAR(p.kappa[1], p.sign * std::sqrt(lambda) * v[1], 1e-8);
    EXPECT_NEAR(p.curvature, 1 / std::sqrt(lambda), 1e-8);
    EXPECT_NEAR(std::abs(p.h - 1 / (2 * std::pow(two_pi, 2) * std::sqrt(lambda))), 0, 1e-12);
  }
  // Both points together: J_0's leading asymptotic over 4 pi.
  double z = std::sqrt(lambda) * r;
  double expect = std::sqrt(2 / (pi * z)) * std::cos(z - pi / 4) / (4 * pi);
  EXPECT_NEAR(f.value.real(), expect, 1e-9);
  EXPECT_NEAR(f.value.imag(), 0, 1e-9);
}

TEST(Farfield, SignConvention) {
  // The point with normal +(x-y)/|x-y| carries e^{-i pi/4}; the opposite
  // convention would give cos(z + pi/4).
  auto field = SeparableField::free();
  auto s = extract(field, 5.0);
  Farfield f = farfield_leading(s, field, {3, 0}, {0, 0});
  for (const auto& p : f.points) EXPECT_EQ(p.sign > 0, p.kappa[0] > 0);
  double z = 3 * std::sqrt(5.0), amp = std::sqrt(2 / (pi * z)) / (4 * pi);
  EXPECT_NEAR(f.value.real(), amp * std::cos(z - pi / 4), 1e-12);
  EXPECT_GT(std::abs(f.value.real() - amp * std::cos(z + pi / 4)), 0.1 * amp);
}

TEST(Farfield, RotationInvariantForFreeField) {
  auto field = SeparableField::free();
  auto s = extract(field, 5.0);
  Vec2 y{0, 0};
  cplx a = farfield_leading(s, field, {4, 0}, y).value;
  cplx b = farfield_leading(s, field, {4 * std::cos(1.1), 4 * std::sin(1.1)}, y).value;
  EXPECT_NEAR(std::abs(a - b), 0, 1e-10);
}

TEST(Farfield, MatchesSurfaceIntegralAtLargeDistance) {
  for (bool free : {true, false}) {
    std::unique_ptr<ExtendedZoneField> field;
    double lambda = 5.0;
    if (free) {
      field = std::make_unique<SeparableField>(SeparableField::free());
    } else {
      field = std::make_unique<SeparableField>(lemma_field());
      lambda = lemma_lambda();
    }
    auto s = extract(*field, lambda, {.step = 0.1});
    Vec2 y{0.3, 0.4};
    double r = 60.0;
    Vec2 x{y[0] + r * 0.8, y[1] + r * 0.6};
    cplx a = fermi_oscillatory(s, *field, x, y);
    Farfield f = farfield_leading(s, *field, x, y);
    // Envelope of the leading term: sum of the moduli of both contributions.
    double env = 0;
    for (const auto& p : f.points) env += std::sqrt(two_pi / r) * std::abs(p.h) / std::sqrt(p.curvature);
    EXPECT_LT(std::abs(a - f.value), 0.02 * env) << free;
  }
}

TEST(Farfield, Errors) {
  auto field = SeparableField::free();
  auto s = extract(field, 5.0);
  EXPECT_THROW(farfield_leading(s, field, {0.5, 0}, {0, 0}), Error);
  FermiSurface bent = s;
  bent.components[0].vertices[3].curvature = -0.1;
  try {
    farfield_leading(bent, field, {4, 0}, {0, 0});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::CurvatureVanishes);
  }
}
