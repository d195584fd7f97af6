// Assumption verifiers, exponent regions, the separable perturbation check
// and the mountain-pass sign test.
#ifndef FBLOCH_CHECKS_HPP
#define FBLOCH_CHECKS_HPP

#include <boost/rational.hpp>
#include <functional>
#include <optional>

#include "fermi.hpp"
#include "surface.hpp"

namespace fbloch {

using Rational = boost::rational<long long>;

// Exponent in [1, inf]. Infinity is a flag, never a huge number.
struct Exponent {
  bool inf = false;
  Rational v{1};

  Exponent() = default;
  Exponent(long long n) : v(n) {}
  Exponent(Rational r) : v(r) {}
  static Exponent infinity() {
    Exponent e;
    e.inf = true;
    e.v = 0;
    return e;
  }
  Rational reciprocal() const { return inf ? Rational(0) : Rational(1) / v; }
  double to_double() const { return inf ? INFINITY : boost::rational_cast<double>(v); }
  std::string str() const {
    if (inf) return "inf";
    return v.denominator() == 1 ? std::to_string(v.numerator())
                                : std::to_string(v.numerator()) + "/" + std::to_string(v.denominator());
  }
  static Exponent from_reciprocal(Rational r) { return r == Rational(0) ? infinity() : Exponent(Rational(1) / r); }
};

inline bool operator<(const Exponent& a, const Exponent& b) {
  if (a.inf) return false;
  if (b.inf) return true;
  return a.v < b.v;
}
inline bool operator<=(const Exponent& a, const Exponent& b) { return !(b < a); }
// Mixed rational-integer comparisons recurse under C++20 rewriting in this
// Boost version, so every comparison below is rational against rational.
inline bool operator==(const Exponent& a, const Exponent& b) { return a.inf == b.inf && (a.inf || a.v == b.v); }

namespace region {

inline Rational R(long long a, long long b = 1) { return Rational(a, b); }

// q < pd/(d-2p) when p <= d/2, with d = 2p meaning q < inf.
inline bool nonresonant_upper(int d, const Rational& p, const Exponent& q) {
  if (p > R(d, 2)) return true;
  Rational den = d - 2 * p;
  if (den == Rational(0)) return !q.inf;
  return q < Exponent(p * d / den);
}

inline bool admissible_pq(int d, const Exponent& p, const Exponent& q) {
  if (p.inf || p.v < Rational(1)) return false;
  const Rational& P = p.v;
  Rational t = R(2 * (d + 1), d + 3), u = R(2 * d, d + 1);
  bool b1 = P < t && Exponent(2 * d * P / (2 + P * (d - 3))) < q;
  bool b2 = t <= P && P < u && Exponent(2 * P / (2 * d - P * (d + 1))) < q;
  return (b1 || b2) && nonresonant_upper(d, P, q);
}

inline bool pq_nonresonant(int d, const Exponent& p, const Exponent& q) {
  if (d < 2) return false;
  if (!(Exponent(1) <= p && p <= Exponent(2) && Exponent(2) <= q)) return false;
  Rational gap = p.reciprocal() - q.reciprocal();
  return Rational(0) <= gap && gap < R(2, d);
}

inline bool resonant_admissible(int d, const Exponent& p, const Exponent& q) {
  if (p.inf || p.v < Rational(1)) return false;
  const Rational& P = p.v;
  Rational t = R(2 * (d + 1), d + 3), u = R(2 * d, d + 1);
  if (P <= t) return Exponent(2 * d * P / (2 + P * (d - 3))) < q;
  if (P < u) return Exponent(2 * P / (2 * d - P * (d + 1))) < q;
  return false;
}

inline bool riesz(int d, const Exponent& p, const Exponent& q) {
  Rational x = p.reciprocal(), y = q.reciprocal();
  return R(d + 1, 2) - d * x + y < R(0) && R(3 - d, 2) + d * y - x < R(0);
}

inline bool gutierrez(int d, const Exponent& p, const Exponent& q) {
  Rational x = p.reciprocal(), y = q.reciprocal(), g = x - y;
  return x > R(d + 1, 2 * d) && y < R(d - 1, 2 * d) && R(2, d + 1) <= g && g <= R(2, d);
}

// Corollary window 2(d+1)/(d-1) < q < 2d/(d-2), read as q < inf for d = 2,
// together with the dual pairing p = q'.
inline bool nlh_window(int d, const Exponent& q) {
  if (d < 2) return false;
  bool upper = d == 2 ? !q.inf : q < Exponent(R(2 * d, d - 2));
  return Exponent(R(2 * (d + 1), d - 1)) < q && upper;
}

inline bool self_dual(const Exponent& p, const Exponent& q) { return p.reciprocal() + q.reciprocal() == R(1); }

}  // namespace region

struct ExponentRegion {
  int d = 2;
  Exponent p, q;
  bool admissible_pq = false;
  bool pq_nonresonant = false;
  bool resonant_admissible = false;
  bool riesz = false;
  bool gutierrez = false;
  bool nlh_window = false;  // self-dual pair with q in the corollary window
  bool consistent = true;   // resonant_admissible == riesz
};

inline ExponentRegion exponent_region(int d, const Exponent& p, const Exponent& q) {
  require(d >= 1, "dimension must be positive");
  require(Exponent(1) <= p && Exponent(1) <= q, "exponents must be >= 1");
  ExponentRegion r;
  r.d = d;
  r.p = p;
  r.q = q;
  r.admissible_pq = region::admissible_pq(d, p, q);
  r.pq_nonresonant = region::pq_nonresonant(d, p, q);
  r.resonant_admissible = region::resonant_admissible(d, p, q);
  r.riesz = region::riesz(d, p, q);
  r.gutierrez = region::gutierrez(d, p, q);
  r.nlh_window = region::self_dual(p, q) && region::nlh_window(d, q);
  r.consistent = r.resonant_admissible == r.riesz;
  return r;
}

struct BoundaryProbe {
  Exponent p, q;
  bool resonant_admissible = false, riesz = false;
};

struct EquivalenceScan {
  int d = 2;
  long long points = 0;
  long long inside = 0;   // points where both say yes
  long long skipped = 0;  // points exactly on a boundary line
  long long disagreements = 0;
  std::vector<std::pair<Exponent, Exponent>> witnesses;  // first few disagreements
  std::vector<BoundaryProbe> boundary;
};

namespace detail {

// True when (1/p, 1/q) sits exactly on one of the lines bounding either
// characterization.
inline bool on_region_boundary(int d, const Rational& x, const Rational& y) {
  using region::R;
  return x == R(d + 3, 2 * (d + 1)) || x == R(d + 1, 2 * d) || R(d + 1, 2) - d * x + y == R(0) ||
         R(3 - d, 2) + d * y - x == R(0);
}

}  // namespace detail

// Grid (1/p, 1/q) = (i/n, j/n), i = 1..n, j = 0..n, plus probes at
// p = 2(d+1)/(d+3) +- 1e-6 around both lower bounds for q.
inline EquivalenceScan region_equivalence_scan(int d, int n = 150) {
  require(d >= 2 && n >= 2, "scan needs d >= 2 and n >= 2");
  EquivalenceScan out;
  out.d = d;
  struct Row {
    long long points = 0, inside = 0, skipped = 0, bad = 0;
    std::vector<std::pair<Exponent, Exponent>> witnesses;
  };
  std::vector<Row> rows(n);
  parallel_for(n, [&](std::size_t k) {
    Row& row = rows[k];
    Rational x(static_cast<long long>(k) + 1, n);
    for (int j = 0; j <= n; ++j) {
      Rational y(j, n);
      if (detail::on_region_boundary(d, x, y)) {
        ++row.skipped;
        continue;
      }
      Exponent p = Exponent::from_reciprocal(x), q = Exponent::from_reciprocal(y);
      bool a = region::resonant_admissible(d, p, q), b = region::riesz(d, p, q);
      ++row.points;
      if (a && b) ++row.inside;
      if (a != b) {
        ++row.bad;
        if (row.witnesses.size() < 4) row.witnesses.push_back({p, q});
      }
    }
  });
  for (auto& r : rows) {
    out.points += r.points;
    out.inside += r.inside;
    out.skipped += r.skipped;
    out.disagreements += r.bad;
    for (auto& w : r.witnesses)
      if (out.witnesses.size() < 8) out.witnesses.push_back(w);
  }
  Rational t = region::R(2 * (d + 1), d + 3), eta(1, 1000000);
  for (Rational P : {t - eta, t + eta}) {
    Rational lo1 = 2 * d * P / (2 + P * (d - 3)), lo2 = 2 * P / (2 * d - P * (d + 1));
    for (Rational L : {lo1, lo2})
      for (Rational Q : {L - eta, L + eta}) {
        if (Q < Rational(1)) continue;
        BoundaryProbe b;
        b.p = Exponent(P);
        b.q = Exponent(Q);
        b.resonant_admissible = region::resonant_admissible(d, b.p, b.q);
        b.riesz = region::riesz(d, b.p, b.q);
        out.boundary.push_back(b);
        if (b.resonant_admissible != b.riesz) ++out.disagreements;
      }
  }
  return out;
}

// ---------------------------------------------------------------------------

struct AssumptionConfig {
  double rho = 0.25;    // A2 checked on F_tau for |tau - lambda| <= rho
  int S = 5;            // Galerkin truncation
  double step = 0.1;    // marching-squares step
  int a3_kpoints = 3;   // per axis
  int a3_smax = 3;
  int a3_nx = 16;
  int smooth_samples = 12;
  double smooth_h = 0.04;
  double smooth_tol = 0.05;
};

struct A1Report {
  bool pass = true;
  std::vector<std::string> reasons;
  double sup_bound = 0;  // bound on |V|
};

struct A2Report {
  bool pass = true;
  bool regular = true;  // nonvanishing gradient on every sampled surface
  double min_curvature = INFINITY;
  std::optional<Vec2> witness;  // failing vertex
  double witness_tau = 0;
  std::vector<std::string> reasons;
  // Sampled neighbourhood U: bounding box of the surfaces.
  Vec2 u_lo{INFINITY, INFINITY}, u_hi{-INFINITY, -INFINITY};
  std::optional<std::pair<double, double>> separable_window;
  // Divided-difference smoothness proxy.
  double smooth_lambda = 0;  // worst relative change of third differences under h -> h/2
  double smooth_psi = 0;
  bool smooth_stable = true;
  std::string smoothness_note = "not certifiable: finite differences cannot resolve Holder classes";
};

struct A3Summary {
  bool pass = true;
  double max_ratio = 0;
  double growth_slope = 0;
  std::optional<Label> witness;
  Vec2 witness_k{0, 0};
};

struct AssumptionReport {
  double lambda = 0;
  A1Report a1;
  A2Report a2;
  A3Summary a3;
  bool regular_frequency = false;  // grad Lambda != 0 on F_lambda
  bool pass() const { return a1.pass && a2.pass && a3.pass; }
};

namespace detail {

inline double third_difference(const std::function<double(double)>& f, double h) {
  return (f(2 * h) - 2 * f(h) + 2 * f(-h) - f(-2 * h)) / (2 * h * h * h);
}

inline double state_norm2(const BlochState& st) {
  if (st.separable) {
    double a = 0, b = 0;
    for (auto& [q, c] : st.axis[0]) a += std::norm(c);
    for (auto& [q, c] : st.axis[1]) b += std::norm(c);
    return a * b;
  }
  double s = 0;
  for (auto& [q, c] : st.terms) s += std::norm(c);
  return s;
}

}  // namespace detail

inline AssumptionReport verify_assumptions(const PotentialSpec& pot, double lambda, const AssumptionConfig& cfg = {}) {
  require(pot.d == 2, "assumption checks are two-dimensional");
  AssumptionReport rep;
  rep.lambda = lambda;

  // A1: A = I, V real and bounded.
  if (pot.mode == PotentialSpec::Mode::Fourier) {
    for (auto& [n, v] : pot.coeffs) {
      rep.a1.sup_bound += std::abs(v);
      cplx partner = pot.coefficient({-n[0], -n[1]});
      if (std::abs(partner - std::conj(v)) > 1e-12 * std::max(1.0, std::abs(v))) {
        rep.a1.pass = false;
        rep.a1.reasons.push_back("V not real: coefficient (" + std::to_string(n[0]) + "," + std::to_string(n[1]) +
                                 ") has no conjugate partner");
      }
    }
  } else {
    for (const auto& part : pot.parts) rep.a1.sup_bound += std::max(std::abs(part.min_value()), std::abs(part.max_value()));
  }
  if (!std::isfinite(rep.a1.sup_bound)) {
    rep.a1.pass = false;
    rep.a1.reasons.push_back("V is not bounded");
  }

  // A2(b) on nearby surfaces.
  auto field = make_field(pot, cfg.S);
  A2Report& a2 = rep.a2;
  if (pot.mode == PotentialSpec::Mode::Separable) {
    A2Window w = a2_window(Hill1D(pot.parts[0], 2), Hill1D(pot.parts[1], 2));
    a2.separable_window = {w.lo, w.hi};
  }
  FermiSurface at_lambda;
  for (double f : {-1.0, -0.5, 0.0, 0.5, 1.0}) {
    double tau = lambda + f * cfg.rho;
    FermiSurface s = extract(*field, tau, {.step = cfg.step});
    if (f == 0.0) at_lambda = s;
    auto fail = [&](const std::string& why, std::optional<Vec2> k) {
      if (a2.pass) {
        a2.witness = k;
        a2.witness_tau = tau;
      }
      a2.pass = false;
      a2.reasons.push_back(why + " at tau = " + std::to_string(tau));
    };
    if (s.empty()) {
      fail("empty level set", std::nullopt);
      continue;
    }
    if (s.irregular) {
      a2.regular = false;
      fail("vanishing gradient", std::nullopt);
      continue;
    }
    for (const auto& c : s.components)
      for (const auto& v : c.vertices) {
        for (int i = 0; i < 2; ++i) {
          a2.u_lo[i] = std::min(a2.u_lo[i], v.kappa[i]);
          a2.u_hi[i] = std::max(a2.u_hi[i], v.kappa[i]);
        }
        if (v.bragg && a2.pass) fail("surface crosses a Bragg line", v.kappa);
      }
    CurvatureReport cr = curvature_check(s);
    a2.min_curvature = std::min(a2.min_curvature, cr.min_curvature);
    if (!cr.positive) fail("curvature " + std::to_string(cr.min_curvature), cr.witness);
  }

  // A2(a) proxy: third differences of Lambda and |Psi(x0)|^2 along both axes.
  if (!at_lambda.empty() && !at_lambda.irregular) {
    std::vector<Vec2> pts;
    for (const auto& c : at_lambda.components)
      for (std::size_t i = 0; i < c.vertices.size(); i += std::max<std::size_t>(1, c.vertices.size() / cfg.smooth_samples))
        if (!c.vertices[i].bragg) pts.push_back(c.vertices[i].kappa);
    std::vector<double> dl(pts.size()), dp(pts.size());
    Vec2 x0{0.3, 0.7};
    parallel_for(pts.size(), [&](std::size_t i) {
      for (int axis = 0; axis < 2; ++axis) {
        auto shifted = [&](double t) {
          Vec2 k = pts[i];
          k[axis] += t;
          return k;
        };
        std::function<double(double)> L = [&](double t) { return field->lambda(shifted(t)); };
        std::function<double(double)> P = [&](double t) { return std::norm(field->state(shifted(t), true).psi(x0)); };
        double h = cfg.smooth_h;
        double l1 = detail::third_difference(L, h), l2 = detail::third_difference(L, h / 2);
        double p1 = detail::third_difference(P, h), p2 = detail::third_difference(P, h / 2);
        dl[i] = std::max(dl[i], std::abs(l1 - l2) / std::max(1.0, std::abs(l2)));
        dp[i] = std::max(dp[i], std::abs(p1 - p2) / std::max(1.0, std::abs(p2)));
      }
    });
    for (std::size_t i = 0; i < pts.size(); ++i) {
      a2.smooth_lambda = std::max(a2.smooth_lambda, dl[i]);
      a2.smooth_psi = std::max(a2.smooth_psi, dp[i]);
    }
    a2.smooth_stable = a2.smooth_lambda < cfg.smooth_tol && a2.smooth_psi < cfg.smooth_tol;
  }

  // A3: sup |psi_s| / ||psi_s|| over a k-grid. The offset keeps the grid off
  // the symmetric momenta, where degenerate free labels mix into standing
  // waves and the ratio jumps to 2 without any growth in s.
  std::vector<Vec2> ks;
  int m = cfg.a3_kpoints;
  for (int a = 0; a < m; ++a)
    for (int b = 0; b < m; ++b)
      ks.push_back({-pi + two_pi * (a + 0.5) / m + 0.1234, -pi + two_pi * (b + 0.5) / m + 0.2345});
  int S3 = std::max(cfg.S, 4);
  A3Report a3 = a3_check(pot, ks, TruncationBox(2, S3), std::min(cfg.a3_smax, S3 - 2), cfg.a3_nx);
  rep.a3.max_ratio = a3.max_ratio;
  rep.a3.growth_slope = a3.growth_slope;
  rep.a3.pass = !a3.growing;
  for (const auto& row : a3.rows)
    if (row.ratio == a3.max_ratio) {
      rep.a3.witness = row.s;
      rep.a3.witness_k = row.k;
    }

  // Regular means a nonvanishing gradient on F_lambda.
  rep.regular_frequency = !at_lambda.empty() && !at_lambda.irregular;
  return rep;
}

// ---------------------------------------------------------------------------

struct Lemma13Axis {
  double mu = 0;
  double sup_deviation = 0;  // ||V - mu||_inf
  double min_E2 = 0;         // min of E_1'' on I
  double min_E2_k = 0;
  double dev0 = 0, dev1 = 0, dev2 = 0;  // sup on I of |E - (mu + k^2)|, |E' - 2k|, |E'' - 2|
  bool convex = false;
  bool close = false;
};

struct Lemma13Report {
  double eps = 0;
  double half_width = 0;  // I = [-h, h]
  double bound = 0;       // min(eps/4, 1)
  std::array<Lemma13Axis, 2> axes;
  double window_lo = 0, window_hi = 0;  // (mu1+mu2+eps, mu1+mu2+pi^2-eps)
  double a2_lo = 0, a2_hi = 0;
  bool window_contained = false;
  std::vector<double> lambdas;
  double max_abs_k = 0;            // over F_lambda for the sampled lambdas
  double min_curvature = INFINITY;  // on F_lambda at mid-window
  bool inside_I = false;
  bool curvature_positive = false;
  std::vector<std::string> failures;
  bool pass() const { return failures.empty(); }
};

inline Lemma13Report lemma13_verify(const Potential1D& v1, const Potential1D& v2, double mu1, double mu2, double eps,
                                    int samples = 401, int lambdas = 5, int arc_samples = 32) {
  require(eps > 0 && eps < pi * pi / 2, "eps must lie in (0, pi^2/2)");
  Lemma13Report r;
  r.eps = eps;
  r.half_width = pi - eps / (8 * pi);
  r.bound = std::min(eps / 4, 1.0);
  Hill1D h[2] = {Hill1D(v1, 2), Hill1D(v2, 2)};
  double mus[2] = {mu1, mu2};
  const Potential1D* vs[2] = {&v1, &v2};
  for (int i = 0; i < 2; ++i) {
    Lemma13Axis& a = r.axes[i];
    a.mu = mus[i];
    a.sup_deviation = vs[i]->sup_deviation(mus[i]);
    a.min_E2 = INFINITY;
    std::vector<std::array<double, 3>> vals(samples);
    parallel_for(samples, [&](std::size_t j) {
      double k = -r.half_width + 2 * r.half_width * j / (samples - 1);
      auto [e1, e2] = h[i].band_derivatives(1, k);
      vals[j] = {h[i].band_value(1, k), e1, e2};
    });
    for (int j = 0; j < samples; ++j) {
      double k = -r.half_width + 2 * r.half_width * j / (samples - 1);
      auto [E, e1, e2] = vals[j];
      if (e2 < a.min_E2) {
        a.min_E2 = e2;
        a.min_E2_k = k;
      }
      a.dev0 = std::max(a.dev0, std::abs(E - (a.mu + k * k)));
      a.dev1 = std::max(a.dev1, std::abs(e1 - 2 * k));
      a.dev2 = std::max(a.dev2, std::abs(e2 - 2));
    }
    a.convex = a.min_E2 > 0;
    a.close = std::max({a.dev0, a.dev1, a.dev2}) < r.bound;
    std::string tag = "axis " + std::to_string(i + 1) + ": ";
    if (!a.convex) r.failures.push_back(tag + "E'' = " + std::to_string(a.min_E2) + " at k = " + std::to_string(a.min_E2_k));
    if (!a.close) r.failures.push_back(tag + "C^2 deviation above min(eps/4, 1)");
  }

  r.window_lo = mu1 + mu2 + eps;
  r.window_hi = mu1 + mu2 + pi * pi - eps;
  A2Window w = a2_window(h[0], h[1]);
  r.a2_lo = w.lo;
  r.a2_hi = w.hi;
  r.window_contained = w.lo <= r.window_lo && r.window_hi <= w.hi;
  if (!r.window_contained) r.failures.push_back("spectral window not inside the admissibility window");

  // The extreme |k_i| on F_lambda sits on an axis: Z_i(lambda - E_1^{V_j}(0)).
  r.inside_I = true;
  for (int j = 0; j < lambdas; ++j) {
    double lam = r.window_lo + (r.window_hi - r.window_lo) * (j + 0.5) / lambdas;
    r.lambdas.push_back(lam);
    if (!w.contains(lam)) {
      r.inside_I = false;
      r.failures.push_back("lambda = " + std::to_string(lam) + " outside the admissibility window");
      continue;
    }
    for (int i = 0; i < 2; ++i)
      r.max_abs_k = std::max(r.max_abs_k, h[i].inverse_band(1, lam - h[1 - i].band(1).at0));
  }
  if (r.max_abs_k >= r.half_width) {
    r.inside_I = false;
    r.failures.push_back("F_lambda leaves I x I");
  }
  double mid = 0.5 * (r.window_lo + r.window_hi);
  r.curvature_positive = w.contains(mid);
  if (r.curvature_positive) r.min_curvature = separable_arcs(v1, v2, mid, arc_samples).min_curvature;
  if (!(r.min_curvature > 0)) {
    r.curvature_positive = false;
    r.failures.push_back("F_lambda has nonpositive curvature");
  }
  return r;
}

// ---------------------------------------------------------------------------

struct MountainPass {
  double value = 0;
  int side = 1;
  int tau_nodes = 0;
  std::vector<std::string> warnings;
};

// -+ int_Omega int_{K_+-} |Psi(x,k)|^2 / (Lambda(k) - lambda) dk dx with
// K_+- = {delta <= +-(Lambda - lambda) <= 2 delta} and dk normalized by |B|.
// Coarea in tau, Gauss-Legendre in tau, Parseval in x.
inline MountainPass mountain_pass_sign(const ExtendedZoneField& field, double lambda, double delta, int side,
                                       double step = 0.1, int tau_nodes = 12) {
  require(delta > 0, "delta must be positive");
  require(side == 1 || side == -1, "side must be +1 or -1");
  MountainPass out;
  out.side = side;
  out.tau_nodes = tau_nodes;
  const GaussRule& g = gauss_legendre(tau_nodes);
  double acc = 0;
  bool bragg = false;
  for (int i = 0; i < tau_nodes; ++i) {
    double t = 1.5 * delta + 0.5 * delta * g.x[i];
    double tau = lambda + side * t;
    FermiSurface s = extract(field, tau, {.step = step});
    if (s.empty()) throw Error(Errc::EmptyLevelSet, "K is empty near tau = " + std::to_string(tau));
    bragg |= s.bragg_vertices > 0;
    Vec2 x0{0.25, 0.5};
    SurfaceRule rule = surface_rule(field, s, {{x0, x0}});
    double layer = 0;
    for (const auto& n : rule.nodes) layer += n.weight * detail::state_norm2(n.state);
    // (Lambda - lambda) = side * t, and the leading -side cancels its sign.
    acc += 0.5 * delta * g.w[i] * (-side) * layer / (side * t);
  }
  if (bragg) out.warnings.push_back("K meets a Bragg line, so K is not inside a regular neighbourhood");
  out.value = acc;
  return out;
}

}  // namespace fbloch

#endif
