#include <gtest/gtest.h>

#include <random>

#include "fbloch/oscillatory.hpp"
#include "oracles.hpp"

using namespace fbloch;

TEST(Cutoff, Invariants) {
  CutoffChi chi(2.0);
  for (double t = -3; t <= 3; t += 0.01) {
    double c = chi(t);
    EXPECT_GE(c, 0.0);
    EXPECT_LE(c, 1.0);
    EXPECT_EQ(c, chi(-t));
    if (std::abs(t) <= 1.0) {
      EXPECT_EQ(c, 1.0);
    }
    if (std::abs(t) >= 2.0) {
      EXPECT_EQ(c, 0.0);
    }
  }
  EXPECT_NEAR(chi(1.5), 0.5, 1e-15);
}

TEST(Plemelj, ConstantDensityClosedForm) {
  CutoffChi flat(1.0, CutoffChi::Profile::Flat);
  Density one = [](double) { return cplx(1.0); };
  cplx lim = plemelj_limit(one, 3.0, flat, 1);
  EXPECT_NEAR(std::abs(lim - I * pi), 0.0, 1e-14);
  for (double eps : {1e-1, 1e-2, 1e-3}) {
    cplx r = plemelj_regularized(one, 3.0, flat, 1, eps);
    EXPECT_NEAR(std::abs(r - 2.0 * I * std::atan(1.0 / eps)), 0.0, 1e-12);
    EXPECT_NEAR(std::abs(r - lim), pi - 2 * std::atan(1.0 / eps), 1e-12);
  }
  EXPECT_NEAR(std::abs(plemelj_limit(one, 3.0, flat, -1) + I * pi), 0.0, 1e-14);
}

TEST(Plemelj, VanishingAtLambda) {
  CutoffChi chi(1.0);
  Density a = [](double tau) { return cplx(tau - 2.0); };
  cplx lim = plemelj_limit(a, 2.0, chi, 1);
  // int chi = 2 (rho/2 + int_{rho/2}^{rho} chi) = 1.5 rho by the symmetry chi(rho/2 + s) + chi(rho - s) = 1.
  EXPECT_NEAR(lim.real(), 1.5, 1e-12);
  EXPECT_NEAR(lim.imag(), 0.0, 1e-14);
}

TEST(Plemelj, LorentzianAgainstPartialFractions) {
  // a(tau) = 1/(1 + (tau - lambda - c)^2), flat window: the principal value has a
  // closed form from 1/(t(1+(t-c)^2)) = A/t + A(2c - t)/(1+(t-c)^2), A = 1/(1+c^2).
  double lambda = 0.7, c = 0.3, rho = 1.2;
  Density a = [&](double tau) { return cplx(1.0 / (1.0 + std::pow(tau - lambda - c, 2))); };
  double A = 1.0 / (1 + c * c);
  auto F = [&](double u) { return -0.5 * A * std::log(1 + u * u) + c * A * std::atan(u); };
  double pv = F(rho - c) - F(-rho - c);
  cplx expect = pv + I * pi * A;
  CutoffChi flat(rho, CutoffChi::Profile::Flat);
  EXPECT_NEAR(std::abs(plemelj_limit(a, lambda, flat, 1) - expect), 0.0, 1e-11);

  // Smooth cutoff: composite Simpson on the folded integrand, which is smooth here.
  CutoffChi chi(rho);
  int n = 200000;
  double h = rho / n, s = 0;
  for (int i = 0; i <= n; ++i) {
    double t = i * h;
    double g = i == 0 ? 2 * (2 * c * A * A) : chi(t) * (a(lambda + t) - a(lambda - t)).real() / t;
    s += g * (i == 0 || i == n ? 1 : (i % 2 ? 4 : 2));
  }
  s *= h / 3;
  EXPECT_NEAR(std::abs(plemelj_limit(a, lambda, chi, 1) - (s + I * pi * A)), 0.0, 1e-9);
}

TEST(Plemelj, SampledDensityWindowAndInterpolation) {
  Density a = [](double tau) { return cplx(std::sin(tau), std::cos(2 * tau)); };
  auto sd = SampledDensity::sample(a, 1.0, 0.5, 129);
  for (double t = 0.5; t <= 1.5; t += 0.013) EXPECT_NEAR(std::abs(sd(t) - a(t)), 0.0, 1e-7);
  CutoffChi chi(0.5);
  EXPECT_NEAR(std::abs(plemelj_limit(sd, 1.0, chi, 1) - plemelj_limit(a, 1.0, chi, 1)), 0.0, 1e-7);
  EXPECT_THROW(plemelj_limit(sd, 1.0, CutoffChi(0.4), 1), Error);
  EXPECT_THROW(plemelj_limit(sd, 1.1, chi, 1), Error);
  EXPECT_THROW(SampledDensity(1.0, 0.5, std::vector<cplx>(64)), Error);
}

TEST(Plemelj, HolderEstimateFromSamples) {
  Density a = [](double tau) { return cplx(std::sqrt(std::abs(tau - 2.0))); };
  auto sd = SampledDensity::sample(a, 2.0, 1.0, 4097);
  EXPECT_NEAR(sd.holder().beta, 0.5, 0.02);
}

TEST(Plemelj, Rates) {
  std::vector<double> eps{1e-1, 3e-2, 1e-2, 3e-3, 1e-3, 3e-4, 1e-4};
  CutoffChi chi(1.0);
  for (double beta : {0.3, 0.5}) {
    Density a = [beta](double tau) {
      double t = tau - 1.0;
      return cplx(1.0 + std::pow(std::abs(t), beta) * (1 + 0.5 * t));
    };
    RateFit f = plemelj_rate(a, 1.0, chi, eps);
    EXPECT_GE(f.slope, beta - 0.1) << beta;
  }
  Density lip = [](double tau) { return cplx(1.0 + std::sin(tau - 1.0)); };
  EXPECT_GE(plemelj_rate(lip, 1.0, chi, eps).slope, 0.9);
  Density one = [](double) { return cplx(2.0); };
  EXPECT_NEAR(plemelj_rate(one, 1.0, CutoffChi(1.0, CutoffChi::Profile::Flat), eps).slope, 1.0, 0.01);
  EXPECT_THROW(plemelj_regularized(one, 1.0, chi, 1, 0.0), Error);
}

TEST(Fresnel, WorkedValueAndStructure) {
  auto q = QuadraticForm::diagonal({1.0});
  Eigen::VectorXd z = Eigen::VectorXd::Zero(1);
  cplx v = fresnel_ft(q, 1.0, z);
  EXPECT_NEAR(v.real(), 0.5, 1e-15);
  EXPECT_NEAR(v.imag(), 0.5, 1e-15);
  auto q2 = QuadraticForm::diagonal({1.0, -1.0});
  EXPECT_EQ(q2.signature, 0);
  cplx v2 = fresnel_ft(q2, 2.0, Eigen::VectorXd::Zero(2));
  EXPECT_NEAR(v2.imag(), 0.0, 1e-15);
  Eigen::VectorXd xi(2);
  xi << 0.3, -1.1;
  cplx v3 = fresnel_ft(q2, 2.0, xi);
  double quad = 0.09 - 1.21;
  EXPECT_NEAR(std::abs(v3 - v2 * std::exp(-I * quad / 8.0)), 0.0, 1e-15);
  EXPECT_THROW(QuadraticForm::diagonal({1.0, 1e-12}), Error);
}

TEST(Fresnel, AgainstDampedQuadrature) {
  std::vector<std::vector<double>> forms{{1.0}, {-1.0}, {1.0, 1.0}, {1.0, -1.0}};
  double worst = 0;
  for (const auto& diag : forms) {
    auto q = QuadraticForm::diagonal(diag);
    for (double sigma : {1.0, 7.0, 50.0}) {
      Eigen::VectorXd xi(diag.size());
      for (std::size_t i = 0; i < diag.size(); ++i) xi[i] = 0.4 + 0.9 * i;
      cplx ref = 1.0;
      for (std::size_t i = 0; i < diag.size(); ++i) ref *= oracle::fresnel_1d(diag[i], sigma, xi[i]);
      cplx v = fresnel_ft(q, sigma, xi);
      worst = std::max(worst, std::abs(v - ref) / std::abs(ref));
    }
  }
  EXPECT_LT(worst, 1e-4);
}

TEST(Fresnel, RotatedForm) {
  // A = R diag(2, -0.5) R^T; the oracle works in the eigenbasis.
  double c = std::cos(0.4), s = std::sin(0.4);
  Eigen::Matrix2d R;
  R << c, -s, s, c;
  Eigen::Matrix2d D = Eigen::Vector2d(2.0, -0.5).asDiagonal();
  Eigen::MatrixXd A = R * D * R.transpose();
  A = 0.5 * (A + A.transpose()).eval();
  QuadraticForm q(A);
  Eigen::VectorXd xi(2);
  xi << 0.5, 0.2;
  Eigen::VectorXd eta = R.transpose() * xi;
  cplx ref = oracle::fresnel_1d(2.0, 3.0, eta[0]) * oracle::fresnel_1d(-0.5, 3.0, eta[1]);
  EXPECT_LT(std::abs(fresnel_ft(q, 3.0, xi) - ref) / std::abs(ref), 1e-4);
}

namespace {
cplx bump(const Eigen::VectorXd& x) {
  double r2 = x.squaredNorm();
  return r2 < 1 ? cplx(std::exp(1 - 1 / (1 - r2))) : cplx(0);
}
}  // namespace

TEST(Xi, GaussianSmallAtLargeSigma) {
  auto q = QuadraticForm::diagonal({1.0});
  auto g = [](const Eigen::VectorXd& x) { return cplx(std::exp(-x.squaredNorm())); };
  double sigma = 100;
  cplx xi = xi_correction(g, 7.0, q, sigma);
  double lead = std::sqrt(pi / sigma);
  EXPECT_LT(std::abs(xi), 0.02 * lead);
  // Gaussian: int e^{-x^2 + i sigma x^2} = sqrt(pi/(1 - i sigma)).
  cplx exact = std::sqrt(pi / (1.0 - I * sigma)) - lead * std::exp(I * pi / 4.0);
  EXPECT_NEAR(std::abs(xi - exact), 0.0, 1e-10);
}

TEST(Xi, DecayLinearityAndZeroAtOrigin) {
  auto q = QuadraticForm::diagonal({1.0});
  std::vector<double> sig, val;
  for (double s = 1; s <= 100; s *= 1.6) {
    sig.push_back(s);
    val.push_back(std::abs(xi_correction(bump, 1.0, q, s)));
  }
  EXPECT_LE(fit_loglog(sig, val).slope, -0.9);

  auto f0 = [](const Eigen::VectorXd& x) { return x[0] * x[0] * bump(x); };
  auto sum = [&](const Eigen::VectorXd& x) { return bump(x) + f0(x); };
  cplx a = xi_correction(bump, 1.0, q, 20), b = xi_correction(f0, 1.0, q, 20), ab = xi_correction(sum, 1.0, q, 20);
  EXPECT_NEAR(std::abs(ab - a - b), 0.0, 1e-10);
  std::vector<double> v0;
  for (double s : sig) v0.push_back(std::abs(xi_correction(f0, 1.0, q, s)));
  EXPECT_LT(fit_loglog(sig, v0).slope, -0.5);
}

TEST(Xi, TwoDimensionalFactorizes) {
  auto q = QuadraticForm::diagonal({1.0, -1.0});
  auto g2 = [](const Eigen::VectorXd& x) { return cplx(std::exp(-x.squaredNorm())); };
  double sigma = 5;
  cplx xi = xi_correction(g2, 6.5, q, sigma);
  cplx exact = std::sqrt(pi / (1.0 - I * sigma)) * std::sqrt(pi / (1.0 + I * sigma)) - pi / sigma;
  EXPECT_NEAR(std::abs(xi - exact), 0.0, 1e-9);
}

TEST(Dirichlet, WorkedValues) {
  EXPECT_DOUBLE_EQ(dirichlet_shell({0.0}, 1), 2.0);
  EXPECT_DOUBLE_EQ(dirichlet_shell({0.0, 0.0}, 1), 16.0);
  EXPECT_DOUBLE_EQ(dirichlet_kernel(0, 0.0), 3.0);
  EXPECT_NEAR(dirichlet_shell({0.7, 1.3}, 3), dirichlet_shell({0.7 + two_pi, 1.3}, 3), 1e-10);
}

TEST(Dirichlet, MatchesLatticeSum) {
  std::mt19937 rng(5);
  std::uniform_real_distribution<double> u(-7, 7);
  double worst = 0;
  for (int t = 0; t < 100; ++t)
    for (int d = 1; d <= 2; ++d)
      for (int j = 0; j <= 6; ++j) {
        std::vector<double> xi(d);
        for (auto& z : xi) z = u(rng);
        worst = std::max(worst, std::abs(dirichlet_shell(xi, j) - oracle::shell_direct(xi, j)));
      }
  EXPECT_LT(worst, 1e-10);
  // Near the removable points.
  for (int j = 0; j <= 6; ++j)
    EXPECT_NEAR(dirichlet_shell({two_pi + 1e-10, 3e-9}, j), oracle::shell_direct({two_pi + 1e-10, 3e-9}, j), 1e-8);
}

TEST(Dirichlet, ShellIntegralAgainstFineQuadrature) {
  for (int j : {1, 4}) {
    // Midpoint rule with 2e5 cells as an independent reference.
    int n = 200000;
    double h = two_pi / n, ref = 0;
    for (int i = 0; i < n; ++i) ref += std::abs(oracle::shell_direct({-pi + (i + 0.5) * h, 0.3}, j)) * h;
    EXPECT_NEAR(shell_integral(j, -pi, pi, 0.3), ref, 1e-6 * ref);
  }
}

TEST(Dirichlet, GrowthAndHolder) {
  std::vector<int> js{1, 2, 3, 4, 5, 6, 7, 8};
  ShellFit f = shell_integral_bound(js, -pi, pi, 0.0, 0.25);
  // At s = 0 the factor D_j(0) ~ 2^{j+1} makes this the worst case.
  EXPECT_GT(f.exponent, 0.95);
  EXPECT_TRUE(f.within);
  ShellFit g = shell_integral_bound(js, -pi, pi, 0.8, 0.25);
  EXPECT_LT(g.exponent, f.exponent);
  EXPECT_GT(f.constant, 0.0);
  LineFit h = shell_holder_fit(4, -pi, pi, 0.5, {1e-1, 1e-2, 1e-3, 1e-4});
  EXPECT_GE(h.slope, 0.125 - 0.05);
}
