#ifndef FBLOCH_COMMON_HPP
#define FBLOCH_COMMON_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstdlib>
#include <map>
#include <mutex>
#include <numbers>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

namespace fbloch {

using cplx = std::complex<double>;
inline constexpr double pi = std::numbers::pi;
inline constexpr double two_pi = 2.0 * std::numbers::pi;
inline constexpr cplx I{0.0, 1.0};

enum class Errc {
  InvalidInput,
  BandNotResolved,
  DegenerateEdge,
  BandEdgeSingularity,
  OutOfBand,
  NoConvergence,
  AmbiguousLabeling,
  OutsideSampledRegion,
  AliasRisk,
  IrregularFrequency,
  FrequencyOutsideWindow,
  WindowMismatch,
  SingularForm,
  QuadratureNotConverged,
  NoResonantPoint,
  CurvatureVanishes,
  OriginSingularity,
  EpsilonZero,
  TailDominant,
  EmptyLevelSet,
};

inline const char* errc_name(Errc c) {
  switch (c) {
    case Errc::InvalidInput: return "InvalidInput";
    case Errc::BandNotResolved: return "BandNotResolved";
    case Errc::DegenerateEdge: return "DegenerateEdge";
    case Errc::BandEdgeSingularity: return "BandEdgeSingularity";
    case Errc::OutOfBand: return "OutOfBand";
    case Errc::NoConvergence: return "NoConvergence";
    case Errc::AmbiguousLabeling: return "AmbiguousLabeling";
    case Errc::OutsideSampledRegion: return "OutsideSampledRegion";
    case Errc::AliasRisk: return "AliasRisk";
    case Errc::IrregularFrequency: return "IrregularFrequency";
    case Errc::FrequencyOutsideWindow: return "FrequencyOutsideWindow";
    case Errc::WindowMismatch: return "WindowMismatch";
    case Errc::SingularForm: return "SingularForm";
    case Errc::QuadratureNotConverged: return "QuadratureNotConverged";
    case Errc::NoResonantPoint: return "NoResonantPoint";
    case Errc::CurvatureVanishes: return "CurvatureVanishes";
    case Errc::OriginSingularity: return "OriginSingularity";
    case Errc::EpsilonZero: return "EpsilonZero";
    case Errc::TailDominant: return "TailDominant";
    case Errc::EmptyLevelSet: return "EmptyLevelSet";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}
  Errc code() const { return code_; }

 private:
  Errc code_;
};

inline void require(bool ok, const std::string& what) {
  if (!ok) throw Error(Errc::InvalidInput, what);
}

// Thread count from FBLOCH_THREADS, else hardware concurrency.
inline int thread_count() {
  if (const char* s = std::getenv("FBLOCH_THREADS")) {
    int n = std::atoi(s);
    if (n > 0) return n;
  }
  unsigned h = std::thread::hardware_concurrency();
  return h == 0 ? 1 : static_cast<int>(h);
}

// Runs f(i) for i in [0,n). Callers write into pre-indexed slots, so results
// do not depend on the schedule.
template <class F>
void parallel_for(std::size_t n, F&& f) {
  int nt = std::min<std::size_t>(static_cast<std::size_t>(thread_count()), n);
  if (nt <= 1) {
    for (std::size_t i = 0; i < n; ++i) f(i);
    return;
  }
  std::vector<std::thread> pool;
  std::exception_ptr err;
  std::mutex m;
  for (int t = 0; t < nt; ++t) {
    pool.emplace_back([&, t] {
      try {
        for (std::size_t i = t; i < n; i += nt) f(i);
      } catch (...) {
        std::lock_guard<std::mutex> lk(m);
        if (!err) err = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  if (err) std::rethrow_exception(err);
}

struct GaussRule {
  std::vector<double> x, w;  // on [-1,1]
};

inline const GaussRule& gauss_legendre(int n) {
  static std::mutex m;
  static std::map<int, GaussRule> cache;
  std::lock_guard<std::mutex> lk(m);
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;
  GaussRule r;
  r.x.resize(n);
  r.w.resize(n);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double z = std::cos(pi * (i + 0.75) / (n + 0.5));
    double pp = 0.0;
    for (int it2 = 0; it2 < 100; ++it2) {
      double p1 = 1.0, p2 = 0.0;
      for (int j = 0; j < n; ++j) {
        double p3 = p2;
        p2 = p1;
        p1 = ((2.0 * j + 1.0) * z * p2 - j * p3) / (j + 1.0);
      }
      pp = n * (z * p1 - p2) / (z * z - 1.0);
      double z1 = z;
      z = z1 - p1 / pp;
      if (std::abs(z - z1) < 1e-15) break;
    }
    r.x[i] = -z;
    r.x[n - 1 - i] = z;
    r.w[i] = r.w[n - 1 - i] = 2.0 / ((1.0 - z * z) * pp * pp);
  }
  return cache.emplace(n, std::move(r)).first->second;
}

// Integrates f over [a,b] with an n-point Gauss-Legendre rule.
template <class F>
auto gauss_integrate(F&& f, double a, double b, int n = 16) {
  const GaussRule& g = gauss_legendre(n);
  double h = 0.5 * (b - a), c = 0.5 * (a + b);
  decltype(f(a)) s{};
  for (int i = 0; i < n; ++i) s += g.w[i] * f(c + h * g.x[i]);
  return s * h;
}

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double residual = 0.0;  // rms
};

inline LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  require(x.size() == y.size() && x.size() >= 2, "fit_line needs >= 2 points");
  double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  LineFit f;
  double den = n * sxx - sx * sx;
  f.slope = (n * sxy - sx * sy) / den;
  f.intercept = (sy - f.slope * sx) / n;
  double r = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    double e = y[i] - (f.slope * x[i] + f.intercept);
    r += e * e;
  }
  f.residual = std::sqrt(r / n);
  return f;
}

// Log-log fit of |y| against x.
inline LineFit fit_loglog(const std::vector<double>& x, const std::vector<double>& y) {
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < x.size(); ++i) {
    lx.push_back(std::log(x[i]));
    ly.push_back(std::log(std::abs(y[i])));
  }
  return fit_line(lx, ly);
}

inline double wrap_to_zone(double k) {
  double w = std::remainder(k, two_pi);
  if (w >= pi) w -= two_pi;
  return w;
}

}  // namespace fbloch

#endif
