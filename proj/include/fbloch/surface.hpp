// Quadrature over Fermi surfaces: a_{x,y}(tau) and its stationary-phase
// leading term.
#ifndef FBLOCH_SURFACE_HPP
#define FBLOCH_SURFACE_HPP

#include <optional>

#include "fermi.hpp"
#include "floquet.hpp"
#include "oscillatory.hpp"

namespace fbloch {

// One quadrature node. `weight` already contains ds / (|B| |grad Lambda|).
struct SurfaceNode {
  Vec2 kappa{0, 0};
  double weight = 0;
  BlochState state;
};

struct SurfaceRule {
  double tau = 0;
  std::vector<SurfaceNode> nodes;
  int level = 0;          // nodes per component = base * 2^level
  bool spectral = true;   // every component used the angular rule
  std::vector<std::string> warnings;

  // int_{F_tau} Psi(x,k) conj(Psi(y,k)) g(k) / (|B| |grad Lambda(k)|) dH^1(k)
  template <class G>
  cplx integrate(const Vec2& x, const Vec2& y, G&& g) const {
    cplx acc = 0;
    for (const auto& n : nodes) acc += n.weight * n.state.psi(x) * std::conj(n.state.psi(y)) * g(n.kappa);
    return acc;
  }
  cplx integrate(const Vec2& x, const Vec2& y) const {
    return integrate(x, y, [](const Vec2&) { return 1.0; });
  }
};

struct SurfaceQuadratureOptions {
  double rel_tol = 1e-6;
  double abs_tol = 1e-10;
  int max_level = 8;
};

namespace detail {

struct StarFrame {
  Vec2 center{0, 0};
  double r_max = 0;
  std::vector<std::pair<double, double>> polar;  // (theta, r) of the vertices, sorted
};

// A closed component is handled in polar form around its vertex centroid when
// every outward normal points away from the centroid.
inline std::optional<StarFrame> star_frame(const FermiComponent& c) {
  if (!c.closed || c.vertices.size() < 8) return std::nullopt;
  StarFrame f;
  for (const auto& v : c.vertices) {
    if (v.bragg) return std::nullopt;
    f.center[0] += v.kappa[0];
    f.center[1] += v.kappa[1];
  }
  f.center[0] /= c.vertices.size();
  f.center[1] /= c.vertices.size();
  for (const auto& v : c.vertices) {
    double dx = v.kappa[0] - f.center[0], dy = v.kappa[1] - f.center[1], r = std::hypot(dx, dy);
    if (r == 0 || (dx * v.normal[0] + dy * v.normal[1]) < 0.05 * r) return std::nullopt;
    f.polar.push_back({std::atan2(dy, dx), r});
    f.r_max = std::max(f.r_max, r);
  }
  std::sort(f.polar.begin(), f.polar.end());
  return f;
}

inline double polar_guess(const StarFrame& f, double theta) {
  auto it = std::lower_bound(f.polar.begin(), f.polar.end(), std::make_pair(theta, -1.0));
  if (it == f.polar.end()) it = f.polar.begin();
  return it->second;
}

// Root of Lambda(c + r e(theta)) = tau by Newton with a bracket fallback.
inline std::optional<BlochState> ray_point(const ExtendedZoneField& field, const StarFrame& f, double theta, double tau,
                                           bool with_psi) {
  Vec2 e{std::cos(theta), std::sin(theta)};
  double r = polar_guess(f, theta), lo = 0, hi = 2 * f.r_max + 1;
  double tol = 1e-12 * std::max(1.0, std::abs(tau));
  for (int it = 0; it < 60; ++it) {
    BlochState st = field.state({f.center[0] + r * e[0], f.center[1] + r * e[1]}, false);
    double res = st.lambda - tau, d = st.grad[0] * e[0] + st.grad[1] * e[1];
    if (std::abs(res) < tol) {
      if (d <= 0) return std::nullopt;
      return with_psi ? field.state(st.kappa, true) : st;
    }
    if (res < 0)
      lo = r;
    else
      hi = r;
    double next = d > 0 ? r - res / d : 0.5 * (lo + hi);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    r = next;
  }
  return std::nullopt;
}

// Trapezoid in theta. The integrand is smooth and periodic, so the rule
// converges spectrally.
inline std::optional<std::vector<SurfaceNode>> star_nodes(const ExtendedZoneField& field, const StarFrame& f,
                                                          double tau, int n) {
  std::vector<SurfaceNode> out(n);
  bool ok = true;
  double offset = 0.5 * two_pi / n;
  parallel_for(n, [&](std::size_t i) {
    double theta = -pi + offset + two_pi * i / n;
    auto st = ray_point(field, f, theta, tau, true);
    if (!st) {
      ok = false;
      return;
    }
    Vec2 e{std::cos(theta), std::sin(theta)};
    double dx = st->kappa[0] - f.center[0], dy = st->kappa[1] - f.center[1];
    double r = std::hypot(dx, dy), d = st->grad[0] * e[0] + st->grad[1] * e[1];
    out[i].kappa = st->kappa;
    out[i].weight = (two_pi / n) * r / (cell_volume_B(2) * d);
    out[i].state = std::move(*st);
  });
  if (!ok) return std::nullopt;
  return out;
}

// Moves a point onto the level set along the gradient direction.
inline std::optional<BlochState> project(const ExtendedZoneField& field, Vec2 k, double tau) {
  double tol = 1e-12 * std::max(1.0, std::abs(tau));
  for (int it = 0; it < 40; ++it) {
    BlochState st = field.state(k, false);
    double res = st.lambda - tau, g2 = st.grad[0] * st.grad[0] + st.grad[1] * st.grad[1];
    if (std::abs(res) < tol) return field.state(k, true);
    if (g2 == 0) return std::nullopt;
    k = {k[0] - res * st.grad[0] / g2, k[1] - res * st.grad[1] / g2};
  }
  return std::nullopt;
}

// Chord-length trapezoid on a polyline refined `level` times by projected
// midpoints. Bragg vertices carry no weight.
inline std::vector<SurfaceNode> polyline_nodes(const ExtendedZoneField& field, const FermiComponent& c, double tau,
                                               int level) {
  std::vector<Vec2> pts;
  std::vector<bool> skip;
  for (const auto& v : c.vertices) {
    pts.push_back(v.kappa);
    skip.push_back(v.bragg);
  }
  for (int l = 0; l < level; ++l) {
    std::vector<Vec2> np;
    std::vector<bool> ns;
    std::size_t n = pts.size(), m = c.closed ? n : n - 1;
    for (std::size_t i = 0; i < n; ++i) {
      np.push_back(pts[i]);
      ns.push_back(skip[i]);
      if (i >= m) continue;
      std::size_t j = (i + 1) % n;
      if (skip[i] || skip[j]) continue;
      Vec2 mid{0.5 * (pts[i][0] + pts[j][0]), 0.5 * (pts[i][1] + pts[j][1])};
      auto st = project(field, mid, tau);
      if (!st) continue;
      np.push_back(st->kappa);
      ns.push_back(false);
    }
    pts.swap(np);
    skip.swap(ns);
  }
  std::size_t n = pts.size();
  std::vector<SurfaceNode> out(n);
  parallel_for(n, [&](std::size_t i) {
    if (skip[i]) return;
    double ds = 0;
    auto add = [&](std::size_t j) {
      if (!skip[j]) ds += 0.5 * std::hypot(pts[j][0] - pts[i][0], pts[j][1] - pts[i][1]);
    };
    if (c.closed || i > 0) add((i + n - 1) % n);
    if (c.closed || i + 1 < n) add((i + 1) % n);
    BlochState st = field.state(pts[i], true);
    out[i].kappa = pts[i];
    out[i].weight = ds / (cell_volume_B(2) * st.grad_norm());
    out[i].state = std::move(st);
  });
  std::erase_if(out, [](const SurfaceNode& s) { return s.weight == 0; });
  return out;
}

// The phase e^{i<x-y,k>} has angular modes up to about r |x - y|; the
// trapezoid rule is exact below the node count.
inline int base_nodes(double r_max, double dist) {
  int n = 32;
  while (n < 1.25 * r_max * dist + 32) n *= 2;
  return n;
}

}  // namespace detail

// Rule at a fixed refinement level. Star-shaped components get
// base * 2^level angular nodes; the others a polyline refined `level` times.
inline SurfaceRule surface_rule_at(const ExtendedZoneField& field, const FermiSurface& s, int level, double dist = 0) {
  if (s.irregular) throw Error(Errc::IrregularFrequency, "surface has vertices with vanishing gradient");
  SurfaceRule rule;
  rule.tau = s.tau;
  rule.level = level;
  for (const auto& c : s.components) {
    auto frame = detail::star_frame(c);
    if (frame) {
      int n = detail::base_nodes(frame->r_max, dist) << level;
      if (auto nodes = detail::star_nodes(field, *frame, s.tau, n)) {
        rule.nodes.insert(rule.nodes.end(), nodes->begin(), nodes->end());
        continue;
      }
    }
    rule.spectral = false;
    auto nodes = detail::polyline_nodes(field, c, s.tau, level);
    rule.nodes.insert(rule.nodes.end(), nodes.begin(), nodes.end());
  }
  if (!rule.spectral) rule.warnings.push_back("polyline quadrature on a non-star or open component");
  return rule;
}

// Doubles the rule until every probe pair converges.
inline SurfaceRule surface_rule(const ExtendedZoneField& field, const FermiSurface& s,
                                const std::vector<std::pair<Vec2, Vec2>>& probes, const SurfaceQuadratureOptions& opt = {}) {
  double dist = 0;
  for (auto& [x, y] : probes) dist = std::max(dist, std::hypot(x[0] - y[0], x[1] - y[1]));
  SurfaceRule prev = surface_rule_at(field, s, 0, dist);
  auto values = [&](const SurfaceRule& r) {
    std::vector<cplx> v;
    for (auto& [x, y] : probes) v.push_back(r.integrate(x, y));
    return v;
  };
  std::vector<cplx> pv = values(prev);
  for (int level = 1; level <= opt.max_level; ++level) {
    SurfaceRule next = surface_rule_at(field, s, level, dist);
    std::vector<cplx> nv = values(next);
    bool ok = true;
    for (std::size_t i = 0; i < nv.size(); ++i)
      ok &= std::abs(nv[i] - pv[i]) < std::max(opt.rel_tol * std::abs(nv[i]), opt.abs_tol);
    if (ok) return next;
    prev = std::move(next);
    pv = std::move(nv);
  }
  throw Error(Errc::QuadratureNotConverged,
              "surface quadrature did not settle after " + std::to_string(opt.max_level) + " doublings");
}

// a_{x,y}(tau) = int_{F_tau} Psi(x,k) conj(Psi(y,k)) / (|B| |grad Lambda(k)|) dH^1(k)
inline cplx fermi_oscillatory(const FermiSurface& s, const ExtendedZoneField& field, const Vec2& x, const Vec2& y,
                              const SurfaceQuadratureOptions& opt = {}) {
  if (s.empty()) throw Error(Errc::EmptyLevelSet, "no Fermi surface at tau = " + std::to_string(s.tau));
  return surface_rule(field, s, {{x, y}}, opt).integrate(x, y);
}

struct ResonantPoint {
  Vec2 kappa{0, 0};
  int sign = 1;  // normal = sign * (x - y)/|x - y|
  double curvature = 0;
  cplx h = 0;    // h_{x,y}(k)
};

struct Farfield {
  cplx value = 0;
  std::vector<ResonantPoint> points;
};

// Leading term of a_{x,y} for large |x - y|:
//   (2 pi/|x-y|)^{1/2} sum_{k, +-} e^{i(<x-y,k> -+ pi/4)} h_{x,y}(k) K(k)^{-1/2}
// with sgn(A) = +1 for positively curved components and outward normals.
inline Farfield farfield_leading(const FermiSurface& s, const ExtendedZoneField& field, const Vec2& x, const Vec2& y) {
  Vec2 d{x[0] - y[0], x[1] - y[1]};
  double dist = std::hypot(d[0], d[1]);
  require(dist >= 1, "farfield needs |x - y| >= 1");
  auto report = curvature_check(s);
  if (!report.positive)
    throw Error(Errc::CurvatureVanishes, "curvature " + std::to_string(report.min_curvature) + " on the surface");
  Vec2 v{d[0] / dist, d[1] / dist};
  Farfield out;
  for (const auto& c : s.components) {
    auto frame = detail::star_frame(c);
    if (!frame) throw Error(Errc::NoResonantPoint, "component is not star-shaped around its centroid");
    // Signed angle from +-v to the normal, as a function of the ray angle.
    auto mismatch = [&](double theta, int sign) -> std::optional<double> {
      auto st = detail::ray_point(field, *frame, theta, s.tau, false);
      if (!st) return std::nullopt;
      double g = st->grad_norm();
      double nx = st->grad[0] / g, ny = st->grad[1] / g;
      return std::atan2(sign * (nx * v[1] - ny * v[0]), sign * (nx * v[0] + ny * v[1]));
    };
    const auto& polar = frame->polar;
    std::size_t n = polar.size();
    for (int sign : {1, -1}) {
      int found = 0;
      for (std::size_t i = 0; i < n; ++i) {
        double ta = polar[i].first, tb = polar[(i + 1) % n].first;
        if (tb <= ta) tb += two_pi;
        auto fa = mismatch(ta, sign), fb = mismatch(tb, sign);
        if (!fa || !fb) throw Error(Errc::NoResonantPoint, "ray solve failed near a resonant point");
        if (std::abs(*fa) > 0.5 * pi || std::abs(*fb) > 0.5 * pi) continue;
        if ((*fa > 0) == (*fb > 0) && *fa != 0) continue;
        for (int it = 0; it < 60 && tb - ta > 1e-14; ++it) {
          double tm = 0.5 * (ta + tb);
          auto fm = mismatch(tm, sign);
          if (!fm) throw Error(Errc::NoResonantPoint, "ray solve failed near a resonant point");
          if ((*fm > 0) == (*fa > 0)) {
            ta = tm;
            fa = fm;
          } else {
            tb = tm;
          }
        }
        auto st = detail::ray_point(field, *frame, 0.5 * (ta + tb), s.tau, true);
        ResonantPoint p;
        p.kappa = st->kappa;
        p.sign = sign;
        p.curvature = st->curvature();
        if (!(p.curvature > 1e-10)) throw Error(Errc::CurvatureVanishes, "curvature vanishes at a resonant point");
        double phase = d[0] * p.kappa[0] + d[1] * p.kappa[1];
        p.h = st->psi(x) * std::conj(st->psi(y)) * std::exp(-I * phase) / (cell_volume_B(2) * st->grad_norm());
        out.value += std::sqrt(two_pi / dist) * std::exp(I * (phase - sign * pi / 4)) * p.h / std::sqrt(p.curvature);
        out.points.push_back(p);
        ++found;
      }
      if (found == 0) throw Error(Errc::NoResonantPoint, "no resonant point for this direction");
    }
  }
  return out;
}

}  // namespace fbloch

#endif
