#ifndef FBLOCH_OSCILLATORY_HPP
#define FBLOCH_OSCILLATORY_HPP

#include <Eigen/Dense>
#include <functional>

#include "special.hpp"

namespace fbloch {

// Even cutoff with chi = 1 on [-rho/2, rho/2] and supp chi in [-rho, rho].
// Smooth profile: with u = (|t| - rho/2)/(rho/2) in (0,1) and psi(u) = e^{-1/u},
//   chi(t) = psi(1-u) / (psi(1-u) + psi(u)).
// Flat is the indicator of [-rho, rho]; it is only used for closed-form checks.
struct CutoffChi {
  enum class Profile { Smooth, Flat };
  double rho = 1.0;
  Profile profile = Profile::Smooth;

  CutoffChi() = default;
  explicit CutoffChi(double r, Profile p = Profile::Smooth) : rho(r), profile(p) {
    require(r > 0 && std::isfinite(r), "cutoff radius must be > 0");
  }

  double operator()(double t) const {
    double a = std::abs(t);
    if (profile == Profile::Flat) return a <= rho ? 1.0 : 0.0;
    if (a <= 0.5 * rho) return 1.0;
    if (a >= rho) return 0.0;
    double u = (a - 0.5 * rho) / (0.5 * rho);
    double p = std::exp(-1.0 / (1.0 - u)), q = std::exp(-1.0 / u);
    return p / (p + q);
  }
};

using Density = std::function<cplx(double)>;

struct HolderEstimate {
  double beta = 0.0;
  double coefficient = 0.0;
};

// Density samples on a uniform grid over [lambda - rho, lambda + rho],
// interpolated by local 4-point Lagrange stencils.
class SampledDensity {
 public:
  SampledDensity(double lambda, double rho, std::vector<cplx> values) : lambda_(lambda), rho_(rho), v_(std::move(values)) {
    require(rho > 0, "window radius must be > 0");
    require(v_.size() >= 65, "a sampled density needs >= 65 points");
    h_ = 2.0 * rho_ / (v_.size() - 1);
  }

  static SampledDensity sample(const Density& a, double lambda, double rho, int n = 257) {
    std::vector<cplx> v(n);
    for (int i = 0; i < n; ++i) v[i] = a(lambda - rho + 2.0 * rho * i / (n - 1));
    return SampledDensity(lambda, rho, std::move(v));
  }

  double lambda() const { return lambda_; }
  double rho() const { return rho_; }
  const std::vector<cplx>& values() const { return v_; }

  cplx operator()(double tau) const {
    double s = (tau - (lambda_ - rho_)) / h_;
    int n = static_cast<int>(v_.size());
    if (s < -1e-9 || s > n - 1 + 1e-9) throw Error(Errc::WindowMismatch, "density evaluated outside its window");
    int i0 = std::clamp(static_cast<int>(std::floor(s)) - 1, 0, n - 4);
    cplx acc = 0;
    for (int a = 0; a < 4; ++a) {
      double w = 1.0;
      for (int b = 0; b < 4; ++b)
        if (b != a) w *= (s - (i0 + b)) / double(a - b);
      acc += w * v_[i0 + a];
    }
    return acc;
  }

  Density as_function() const {
    return [self = *this](double tau) { return self(tau); };
  }

  // Fit of log max|a(lambda +- t) - a(lambda)| against log t over dyadic t.
  HolderEstimate holder() const {
    int n = static_cast<int>(v_.size()), mid = (n - 1) / 2;
    cplx a0 = (*this)(lambda_);
    std::vector<double> ts, ds;
    for (int step = 1; step <= mid / 2; step *= 2) {
      double d = 0;
      for (int i = 0; i < n; ++i)
        if (std::abs(i - mid) <= step) d = std::max(d, std::abs(v_[i] - a0));
      if (d > 0) {
        ts.push_back(step * h_);
        ds.push_back(d);
      }
    }
    HolderEstimate e;
    if (ts.size() < 2) return e;
    LineFit f = fit_loglog(ts, ds);
    e.beta = f.slope;
    e.coefficient = std::exp(f.intercept);
    return e;
  }

 private:
  double lambda_, rho_, h_;
  std::vector<cplx> v_;
};

namespace detail {

// Integrates f over (0, b] on dyadic panels down to b 2^{-levels}, plus
// `top` uniform panels on [b/2, b].
template <class F>
cplx dyadic_integrate(F&& f, double b, int levels = 200, int top = 8, int n = 16) {
  cplx acc = 0;
  double lo = 0.5 * b, w = (b - lo) / top;
  for (int p = 0; p < top; ++p) acc += gauss_integrate(f, lo + p * w, lo + (p + 1) * w, n);
  double hi = lo;
  for (int m = 0; m < levels; ++m) {
    double a = 0.5 * hi;
    acc += gauss_integrate(f, a, hi, n);
    hi = a;
  }
  return acc;
}

inline void check_window(const SampledDensity& a, double lambda, const CutoffChi& chi) {
  if (std::abs(a.lambda() - lambda) > 1e-12 * std::max(1.0, std::abs(lambda)) ||
      std::abs(a.rho() - chi.rho) > 1e-12 * chi.rho)
    throw Error(Errc::WindowMismatch, "density window and cutoff support disagree");
}

}  // namespace detail

// lim_{eps -> 0+} int chi(t) a(lambda + t) / (t -+ i eps) dt
//   = int chi(t) (a(lambda+t) - a(lambda)) / t dt +- i pi a(lambda).
inline cplx plemelj_limit(const Density& a, double lambda, const CutoffChi& chi, int side) {
  require(side == 1 || side == -1, "side must be +1 or -1");
  cplx a0 = a(lambda);
  auto g = [&](double t) { return chi(t) * (a(lambda + t) - a(lambda - t)) / t; };
  return detail::dyadic_integrate(g, chi.rho) + double(side) * I * pi * a0;
}

inline cplx plemelj_limit(const SampledDensity& a, double lambda, const CutoffChi& chi, int side) {
  detail::check_window(a, lambda, chi);
  return plemelj_limit(a.as_function(), lambda, chi, side);
}

// int chi(t) a(lambda + t) / (t -+ i eps) dt for eps > 0. The a(lambda) part is
// done in closed form up to the transition band of chi.
inline cplx plemelj_regularized(const Density& a, double lambda, const CutoffChi& chi, int side, double eps) {
  require(side == 1 || side == -1, "side must be +1 or -1");
  if (!(eps > 0)) throw Error(Errc::EpsilonZero, "regularization parameter must be > 0");
  cplx a0 = a(lambda);
  cplx z = double(side) * I * eps;
  auto g = [&](double t) { return chi(t) * ((a(lambda + t) - a0) / (t - z) + (a(lambda - t) - a0) / (-t - z)); };
  cplx body = detail::dyadic_integrate(g, chi.rho);
  double im;
  if (chi.profile == CutoffChi::Profile::Flat) {
    im = 2.0 * std::atan(chi.rho / eps);
  } else {
    double r = chi.rho;
    cplx band = gauss_integrate([&](double t) { return cplx(chi(t) * eps / (t * t + eps * eps)); }, 0.5 * r, r, 64);
    im = 2.0 * (std::atan(0.5 * r / eps) + band.real());
  }
  return body + double(side) * I * im * a0;
}

inline cplx plemelj_regularized(const SampledDensity& a, double lambda, const CutoffChi& chi, int side, double eps) {
  detail::check_window(a, lambda, chi);
  return plemelj_regularized(a.as_function(), lambda, chi, side, eps);
}

struct RateFit {
  cplx limit;
  std::vector<double> eps, error;
  double slope = 0.0;
};

// Log-log slope of |regularized(eps) - limit| against eps.
inline RateFit plemelj_rate(const Density& a, double lambda, const CutoffChi& chi, const std::vector<double>& eps_list,
                            int side = 1) {
  require(eps_list.size() >= 2, "need >= 2 eps values");
  RateFit r;
  r.limit = plemelj_limit(a, lambda, chi, side);
  r.eps = eps_list;
  r.error.resize(eps_list.size());
  parallel_for(eps_list.size(), [&](std::size_t i) {
    r.error[i] = std::abs(plemelj_regularized(a, lambda, chi, side, eps_list[i]) - r.limit);
  });
  r.slope = fit_loglog(r.eps, r.error).slope;
  return r;
}

// Symmetric invertible form on R^n, n = d - 1.
struct QuadraticForm {
  Eigen::MatrixXd A;
  int signature = 0;
  double abs_det = 0.0;
  Eigen::VectorXd eigenvalues;
  Eigen::MatrixXd eigenvectors;

  QuadraticForm() = default;
  explicit QuadraticForm(const Eigen::MatrixXd& m, double det_tol = 1e-10) : A(m) {
    require(m.rows() == m.cols() && m.rows() >= 1, "form must be square");
    require((m - m.transpose()).cwiseAbs().maxCoeff() == 0.0, "form must be exactly symmetric");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
    eigenvalues = es.eigenvalues();
    eigenvectors = es.eigenvectors();
    abs_det = std::abs(eigenvalues.prod());
    if (!(abs_det > det_tol)) throw Error(Errc::SingularForm, "quadratic form is singular");
    for (int i = 0; i < eigenvalues.size(); ++i) signature += eigenvalues[i] > 0 ? 1 : -1;
  }

  static QuadraticForm diagonal(std::vector<double> d) {
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(d.size(), d.size());
    for (std::size_t i = 0; i < d.size(); ++i) m(i, i) = d[i];
    return QuadraticForm(m);
  }

  int dim() const { return static_cast<int>(A.rows()); }
  double operator()(const Eigen::VectorXd& x) const { return x.dot(A * x); }
};

// (2 pi)^{-n/2} int e^{i sigma <x,Ax>} e^{-i<x,xi>} dx in closed form.
inline cplx fresnel_ft(const QuadraticForm& q, double sigma, const Eigen::VectorXd& xi) {
  require(sigma > 0, "sigma must be > 0");
  require(xi.size() == q.dim(), "xi has the wrong dimension");
  int n = q.dim();
  double quad = xi.dot(q.A.ldlt().solve(xi));
  return std::pow(2.0 * sigma, -0.5 * n) / std::sqrt(q.abs_det) * std::exp(I * (pi * q.signature / 4.0)) *
         std::exp(-I * quad / (4.0 * sigma));
}

struct QuadratureOptions {
  double rel_tol = 1e-9;
  double abs_tol = 1e-13;
  int max_doublings = 8;
};

namespace detail {

// Gauss-Legendre on m uniform panels of [a,b].
template <class F>
cplx panel_integrate(F&& f, double a, double b, int m, int n = 16) {
  cplx acc = 0;
  double w = (b - a) / m;
  for (int p = 0; p < m; ++p) acc += gauss_integrate(f, a + p * w, a + (p + 1) * w, n);
  return acc;
}

// int |f| over [a,b] on m panels; sign changes are located by bisection
// so that every sub-panel integrand is smooth.
template <class F>
double abs_integrate(F&& f, double a, double b, int m, int n = 16) {
  double acc = 0, w = (b - a) / m;
  const int probes = 2 * n;
  for (int p = 0; p < m; ++p) {
    double lo = a + p * w;
    double x0 = lo, f0 = f(lo);
    for (int q = 1; q <= probes; ++q) {
      double x1 = lo + w * q / probes, f1 = f(x1);
      if ((f0 < 0) != (f1 < 0)) {
        double l = x0, r = x1, fl = f0;
        for (int it = 0; it < 60 && r - l > 1e-15 * (1 + std::abs(l)); ++it) {
          double c = 0.5 * (l + r), fc = f(c);
          if ((fc < 0) == (fl < 0)) {
            l = c;
            fl = fc;
          } else {
            r = c;
          }
        }
        double root = 0.5 * (l + r);
        acc += std::abs(gauss_integrate(f, x0, root, n));
        x0 = root;
      }
      f0 = f1;
    }
    acc += std::abs(gauss_integrate(f, x0, lo + w, n));
  }
  return acc;
}

}  // namespace detail

// Xi(f) = int f e^{i sigma <x,Ax>} dx - f(0) (pi/sigma)^{n/2} |det A|^{-1/2} e^{i pi sgn/4}
// for f supported in [-R, R]^n, n in {1, 2}.
inline cplx xi_correction(const std::function<cplx(const Eigen::VectorXd&)>& f, double R, const QuadraticForm& q,
                          double sigma, const QuadratureOptions& opt = {}) {
  require(sigma > 0 && R > 0, "sigma and R must be > 0");
  int n = q.dim();
  require(n == 1 || n == 2, "xi_correction supports n = 1, 2");
  double anorm = q.eigenvalues.cwiseAbs().maxCoeff();
  double width = (two_pi / (sigma * std::max(1.0, anorm))) / 8.0;
  int m = std::max(4, static_cast<int>(std::ceil(2 * R / width)));
  auto integral = [&](int panels) -> cplx {
    if (n == 1) {
      Eigen::VectorXd x(1);
      return detail::panel_integrate(
          [&](double t) {
            x[0] = t;
            return f(x) * std::exp(I * (sigma * q(x)));
          },
          -R, R, panels);
    }
    std::vector<cplx> rows(panels);
    double w = 2 * R / panels;
    parallel_for(panels, [&](std::size_t p) {
      Eigen::VectorXd x(2);
      double a = -R + p * w;
      rows[p] = gauss_integrate(
          [&](double s) {
            return detail::panel_integrate(
                [&](double t) {
                  x[0] = s;
                  x[1] = t;
                  return f(x) * std::exp(I * (sigma * q(x)));
                },
                -R, R, panels);
          },
          a, a + w);
    });
    cplx acc = 0;
    for (const cplx& r : rows) acc += r;
    return acc;
  };
  cplx prev = integral(m);
  for (int k = 0; k < opt.max_doublings; ++k) {
    m *= 2;
    cplx cur = integral(m);
    if (std::abs(cur - prev) <= opt.rel_tol * std::abs(cur) + opt.abs_tol) {
      Eigen::VectorXd zero = Eigen::VectorXd::Zero(n);
      cplx lead = f(zero) * std::pow(pi / sigma, 0.5 * n) / std::sqrt(q.abs_det) * std::exp(I * (pi * q.signature / 4.0));
      return cur - lead;
    }
    prev = cur;
  }
  throw Error(Errc::QuadratureNotConverged, "oscillatory quadrature did not settle under panel doubling");
}

// D_j(z) = sum_{|m| <= 2^j} e^{imz} = sin((2^j + 1/2) z) / sin(z/2).
inline double dirichlet_kernel(int j, double z) {
  require(j >= 0 && j < 30, "shell index out of range");
  long N = 1L << j;
  double s = std::sin(0.5 * z);
  if (std::abs(s) < 1e-8) {
    double acc = 1.0;
    for (long m = 1; m <= N; ++m) acc += 2.0 * std::cos(m * z);
    return acc;
  }
  return std::sin((N + 0.5) * z) / s;
}

// g_j = prod_p D_j(xi_p) - prod_p D_{j-1}(xi_p) for j >= 1, g_0 = prod_p D_0(xi_p).
inline double dirichlet_shell(const std::vector<double>& xi, int j) {
  require(!xi.empty(), "xi must be non-empty");
  double a = 1.0, b = 1.0;
  for (double z : xi) {
    a *= dirichlet_kernel(j, z);
    if (j >= 1) b *= dirichlet_kernel(j - 1, z);
  }
  return j >= 1 ? a - b : a;
}

struct ShellFit {
  std::vector<int> j;
  std::vector<double> integral;
  double exponent = 0.0;  // log2 growth rate
  double constant = 0.0;  // max_j integral / 2^{j(1+delta)}
  bool within = false;    // exponent <= 1 + delta + 0.1
};

// int_{K} |g_j(xi', s)| dxi' for d = 2, K = [k_lo, k_hi].
inline double shell_integral(int j, double k_lo, double k_hi, double s) {
  require(k_hi > k_lo, "empty interval");
  double width = (two_pi / ((1L << j) + 1.0)) / 8.0;
  int m = std::max(8, static_cast<int>(std::ceil((k_hi - k_lo) / width)));
  return detail::abs_integrate([&](double x) { return dirichlet_shell({x, s}, j); }, k_lo, k_hi, m);
}

inline ShellFit shell_integral_bound(const std::vector<int>& js, double k_lo, double k_hi, double s, double delta) {
  require(js.size() >= 2, "need >= 2 shells");
  ShellFit r;
  r.j = js;
  r.integral.resize(js.size());
  parallel_for(js.size(), [&](std::size_t i) { r.integral[i] = shell_integral(js[i], k_lo, k_hi, s); });
  std::vector<double> x, y;
  for (std::size_t i = 0; i < js.size(); ++i) {
    x.push_back(js[i]);
    y.push_back(std::log2(r.integral[i]));
    r.constant = std::max(r.constant, r.integral[i] / std::exp2(js[i] * (1 + delta)));
  }
  r.exponent = fit_line(x, y).slope;
  r.within = r.exponent <= 1 + delta + 0.1;
  return r;
}

// Fits the exponent of int_K |g_j(xi', s) - g_j(xi', s + h)| in h.
inline LineFit shell_holder_fit(int j, double k_lo, double k_hi, double s, const std::vector<double>& hs) {
  std::vector<double> d(hs.size());
  double width = (two_pi / ((1L << j) + 1.0)) / 8.0;
  int m = std::max(8, static_cast<int>(std::ceil((k_hi - k_lo) / width)));
  for (std::size_t i = 0; i < hs.size(); ++i)
    d[i] = detail::abs_integrate([&](double x) { return dirichlet_shell({x, s}, j) - dirichlet_shell({x, s + hs[i]}, j); },
                                 k_lo, k_hi, m);
  return fit_loglog(hs, d);
}

}  // namespace fbloch

#endif
