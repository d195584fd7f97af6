#ifndef FBLOCH_SPECIAL_HPP
#define FBLOCH_SPECIAL_HPP

#include "common.hpp"

namespace fbloch {

inline constexpr double euler_gamma = 0.57721566490153286061;

// Power series of J0 and Y0, used for |z| < 8.
inline cplx bessel_j0_series(cplx z) {
  cplx q = -0.25 * z * z, term = 1.0, s = 1.0;
  for (int m = 1; m < 80; ++m) {
    term *= q / (double(m) * m);
    s += term;
    if (std::abs(term) < 1e-18 * std::abs(s)) break;
  }
  return s;
}

inline cplx bessel_y0_series(cplx z) {
  if (z == 0.0) throw Error(Errc::OriginSingularity, "Y0 is singular at z = 0");
  cplx q = 0.25 * z * z, term = 1.0, s = 0.0;
  double harm = 0.0;
  for (int m = 1; m < 80; ++m) {
    term *= q / (double(m) * m);
    harm += 1.0 / m;
    cplx t = (m % 2 ? 1.0 : -1.0) * harm * term;
    s += t;
    if (std::abs(t) < 1e-18 * std::abs(s) && m > 4) break;
  }
  return (2.0 / pi) * ((std::log(0.5 * z) + euler_gamma) * bessel_j0_series(z) + s);
}

// Hankel's integral
//   H_nu(z) = sqrt(2/(pi z)) e^{i(z - nu pi/2 - pi/4)} / Gamma(nu+1/2)
//             * int_0^inf e^{-u} u^{nu-1/2} (1 + iu/(2z))^{nu-1/2} du,
// with u = v^2 and panelled Gauss-Legendre on v in [0,7].
inline cplx hankel_h1_integral(double nu, cplx z) {
  const GaussRule& g = gauss_legendre(24);
  cplx acc = 0.0;
  for (int p = 0; p < 14; ++p) {
    double a = 0.5 * p, b = a + 0.5;
    for (std::size_t i = 0; i < g.x.size(); ++i) {
      double v = 0.5 * (a + b) + 0.25 * g.x[i];
      double v2 = v * v;
      cplx f = std::exp(-v2) * std::pow(v, 2.0 * nu) * std::pow(1.0 + I * v2 / (2.0 * z), nu - 0.5);
      acc += 0.25 * g.w[i] * f;
    }
  }
  acc *= 2.0 / std::tgamma(nu + 0.5);
  return std::sqrt(2.0 / (pi * z)) * std::exp(I * (z - nu * pi / 2 - pi / 4)) * acc;
}

// Leading terms of the large-argument expansion.
inline cplx hankel_h1_asymptotic(double nu, cplx z, int terms = 1) {
  cplx s = 0.0, t = 1.0;
  double mu = 4 * nu * nu;
  for (int k = 0; k < terms; ++k) {
    s += t;
    double odd = 2 * k + 1;
    t *= I * (mu - odd * odd) / (8.0 * (k + 1) * z);
  }
  return std::sqrt(2.0 / (pi * z)) * std::exp(I * (z - nu * pi / 2 - pi / 4)) * s;
}

// Principal-branch H^(1)_nu for Im z >= 0.
inline cplx hankel_h1(double nu, cplx z) {
  if (z == 0.0) throw Error(Errc::OriginSingularity, "H1 is singular at z = 0");
  require(nu >= 0.0, "order must be >= 0");
  require(z.imag() >= 0.0, "hankel_h1 expects Im z >= 0");
  if (nu == 0.0 && std::abs(z) < 8.0) return bessel_j0_series(z) + I * bessel_y0_series(z);
  if (std::abs(z) >= 2.0 && z.real() > 0.0) return hankel_h1_integral(nu, z);
  if (z.imag() == 0.0 && z.real() > 0.0)
    return {std::cyl_bessel_j(nu, z.real()), std::cyl_neumann(nu, z.real())};
  throw Error(Errc::InvalidInput, "hankel_h1: order/argument combination not supported");
}

// Kernel of (-Delta - lambda - i eps)^{-1} in d = 2: (i/4) H0(sqrt(lambda + i eps) r)
// for eps >= 0 (outgoing), its conjugate for eps < 0.
inline cplx free_green_2d(double lambda, double eps, double r) {
  if (eps < 0) return std::conj(free_green_2d(lambda, -eps, r));
  cplx w = std::sqrt(cplx(lambda, eps));
  return 0.25 * I * hankel_h1(0.0, w * r);
}

}  // namespace fbloch

#endif
