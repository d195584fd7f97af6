#ifndef FBLOCH_FERMI_HPP
#define FBLOCH_FERMI_HPP

#include <unordered_map>

#include "field.hpp"

namespace fbloch {

struct FermiVertex {
  Vec2 kappa{0, 0};
  Vec2 normal{0, 0};  // grad Lambda / |grad Lambda|
  double grad_norm = 0;
  double curvature = 0;
  double residual = 0;  // |Lambda - tau|
  // Set when the edge root sits on a jump of Lambda (a Bragg line with an
  // open gap) rather than on the level set.
  bool bragg = false;
};

struct FermiComponent {
  std::vector<FermiVertex> vertices;
  bool closed = true;

  double length() const {
    double L = 0;
    std::size_t n = vertices.size();
    for (std::size_t i = 0; i + (closed ? 0 : 1) < n; ++i) {
      const Vec2 &a = vertices[i].kappa, &b = vertices[(i + 1) % n].kappa;
      L += std::hypot(b[0] - a[0], b[1] - a[1]);
    }
    return L;
  }
};

struct FermiSurface {
  double tau = 0;
  double step = 0;    // grid spacing used for marching squares
  double window = 0;  // half-width of the extended-zone window
  std::vector<FermiComponent> components;
  bool irregular = false;
  int bragg_vertices = 0;
  double max_residual = 0;  // over regular vertices
  std::vector<std::string> warnings;

  std::size_t vertex_count() const {
    std::size_t n = 0;
    for (const auto& c : components) n += c.vertices.size();
    return n;
  }
  bool empty() const { return components.empty(); }
};

struct ExtractOptions {
  double step = 0.05;
  double window = 0;  // 0 picks sqrt(tau - floor) plus a margin
  double residual_tol = 1e-6;
  double grad_threshold = 1e-4;
  int max_window_growth = 4;
};

namespace detail {

// Safeguarded Newton for Lambda(a + t(b-a)) = tau on t in [0,1], given the
// sign of Lambda - tau at both ends.
inline FermiVertex refine_edge(const ExtendedZoneField& field, double tau, const Vec2& a, const Vec2& b, double fa,
                               const ExtractOptions& opt) {
  Vec2 e{b[0] - a[0], b[1] - a[1]};
  double lo = 0, hi = 1;
  bool lo_neg = fa < 0;
  double t = 0.5;
  BlochState st;
  double g = 0;
  for (int it = 0; it < 100; ++it) {
    st = field.state({a[0] + t * e[0], a[1] + t * e[1]}, false);
    g = st.lambda - tau;
    if (std::abs(g) < 1e-12 * std::max(1.0, std::abs(tau))) break;
    if ((g < 0) == lo_neg)
      lo = t;
    else
      hi = t;
    if (hi - lo < 1e-14) break;
    double dg = st.grad[0] * e[0] + st.grad[1] * e[1];
    double tn = dg != 0 ? t - g / dg : -1;
    t = (tn > lo && tn < hi) ? tn : 0.5 * (lo + hi);
  }
  FermiVertex v;
  v.kappa = st.kappa;
  v.residual = std::abs(g);
  v.grad_norm = st.grad_norm();
  if (v.grad_norm > 0) v.normal = {st.grad[0] / v.grad_norm, st.grad[1] / v.grad_norm};
  v.curvature = v.grad_norm > 0 ? st.curvature() : 0.0;
  v.bragg = v.residual > opt.residual_tol;
  return v;
}

}  // namespace detail

// Lambda = tau in the extended zone by marching squares. Grid nodes sit at
// half-integer multiples of h = pi/n, so Bragg lines fall midway between nodes.
inline FermiSurface extract(const ExtendedZoneField& field, double tau, const ExtractOptions& opt = {}) {
  require(opt.step > 0, "grid step must be > 0");
  FermiSurface out;
  out.tau = tau;
  int n_per = std::max(1, static_cast<int>(std::ceil(pi / opt.step)));
  double h = pi / n_per;
  out.step = h;
  double floor = field.lambda_floor();
  if (tau <= floor) return out;
  double R = opt.window > 0 ? opt.window : std::sqrt(tau - floor) + 0.5 + 3 * h;

  for (int attempt = 0; attempt <= opt.max_window_growth; ++attempt, R *= 1.5) {
    out.components.clear();
    out.warnings.clear();
    out.window = R;
    int M = static_cast<int>(std::ceil(R / h));
    int Nn = 2 * M;  // nodes per axis, x_i = (i - M + 1/2) h
    auto node = [&](int i) { return (i - M + 0.5) * h; };
    int P = 2 * n_per;
    auto kidx = [&](int i) { return ((i - M) % P + P) % P; };

    // Lambda at the nodes, one eigensolve per distinct reduced k.
    std::vector<double> f(static_cast<std::size_t>(Nn) * Nn);
    std::vector<int> used;
    // Separable fields are cheap pointwise; Galerkin fields share one solve per reduced k.
    const bool pointwise = dynamic_cast<const SeparableField*>(&field) != nullptr;
    if (!pointwise) {
      std::vector<char> seen(static_cast<std::size_t>(P) * P, 0);
      for (int i = 0; i < Nn; ++i)
        for (int j = 0; j < Nn; ++j) {
          int key = kidx(i) * P + kidx(j);
          if (!seen[key]) {
            seen[key] = 1;
            used.push_back(key);
          }
        }
    }
    std::vector<std::unordered_map<long, double>> table(static_cast<std::size_t>(P) * P);
    parallel_for(used.size(), [&](std::size_t u) {
      int key = used[u];
      Vec2 k{wrap_to_zone((key / P + 0.5) * h), wrap_to_zone((key % P + 0.5) * h)};
      auto& m = table[key];
      for (auto& [s, v] : field.band_values(k)) m[(static_cast<long>(s[0]) << 32) ^ (s[1] & 0xffffffffL)] = v;
    });
    parallel_for(static_cast<std::size_t>(Nn), [&](std::size_t ii) {
      int i = static_cast<int>(ii);
      for (int j = 0; j < Nn; ++j) {
        Vec2 kap{node(i), node(j)};
        Label s;
        Vec2 k;
        split_momentum(kap[0], k[0], s[0]);
        split_momentum(kap[1], k[1], s[1]);
        double lam;
        if (pointwise) {
          lam = field.lambda(kap);
        } else {
          const auto& m = table[kidx(i) * P + kidx(j)];
          auto it = m.find((static_cast<long>(s[0]) << 32) ^ (s[1] & 0xffffffffL));
          lam = it != m.end() ? it->second : field.lambda(kap);
        }
        f[static_cast<std::size_t>(i) * Nn + j] = lam - tau;
      }
    });
    auto F = [&](int i, int j) { return f[static_cast<std::size_t>(i) * Nn + j]; };
    auto neg = [&](int i, int j) { return F(i, j) < 0; };

    // Edge ids: 2*(i*Nn+j) for (i,j)-(i+1,j), +1 for (i,j)-(i,j+1).
    auto hedge = [&](int i, int j) { return 2L * (static_cast<long>(i) * Nn + j); };
    auto vedge = [&](int i, int j) { return 2L * (static_cast<long>(i) * Nn + j) + 1; };
    std::unordered_map<long, std::vector<long>> adj;
    bool touches_boundary = false;
    for (int i = 0; i + 1 < Nn; ++i)
      for (int j = 0; j + 1 < Nn; ++j) {
        bool b0 = neg(i, j), b1 = neg(i + 1, j), b2 = neg(i + 1, j + 1), b3 = neg(i, j + 1);
        int code = b0 | (b1 << 1) | (b2 << 2) | (b3 << 3);
        if (code == 0 || code == 15) continue;
        if (i == 0 || j == 0 || i + 2 == Nn || j + 2 == Nn) touches_boundary = true;
        long eb = hedge(i, j), er = vedge(i + 1, j), et = hedge(i, j + 1), el = vedge(i, j);
        std::vector<std::pair<long, long>> segs;
        auto crossing = [](bool x, bool y) { return x != y; };
        std::vector<long> cut;
        if (crossing(b0, b1)) cut.push_back(eb);
        if (crossing(b1, b2)) cut.push_back(er);
        if (crossing(b2, b3)) cut.push_back(et);
        if (crossing(b3, b0)) cut.push_back(el);
        if (cut.size() == 2) {
          segs.push_back({cut[0], cut[1]});
        } else {
          // Saddle: decide by the cell average.
          double c = 0.25 * (F(i, j) + F(i + 1, j) + F(i + 1, j + 1) + F(i, j + 1));
          bool center_neg = c < 0;
          if (center_neg == b0) {
            segs.push_back({eb, er});
            segs.push_back({et, el});
          } else {
            segs.push_back({eb, el});
            segs.push_back({er, et});
          }
        }
        for (auto& [p, q] : segs) {
          adj[p].push_back(q);
          adj[q].push_back(p);
        }
      }
    if (touches_boundary && attempt < opt.max_window_growth) continue;
    if (touches_boundary) out.warnings.push_back("surface reaches the extraction window; curves may be open");

    // Chain edges into polylines.
    std::vector<std::vector<long>> chains;
    std::vector<bool> closed;
    std::unordered_map<long, bool> visited;
    auto walk = [&](long start) {
      std::vector<long> chain{start};
      visited[start] = true;
      long prev = -1, cur = start;
      while (true) {
        long nxt = -1;
        for (long q : adj[cur])
          if (q != prev && !visited[q]) {
            nxt = q;
            break;
          }
        if (nxt < 0) break;
        visited[nxt] = true;
        chain.push_back(nxt);
        prev = cur;
        cur = nxt;
      }
      return chain;
    };
    for (auto& [e, nb] : adj)
      if (nb.size() == 1 && !visited[e]) {
        chains.push_back(walk(e));
        closed.push_back(false);
      }
    std::vector<long> keys;
    for (auto& [e, nb] : adj) keys.push_back(e);
    std::sort(keys.begin(), keys.end());
    for (long e : keys)
      if (!visited[e]) {
        chains.push_back(walk(e));
        closed.push_back(true);
      }

    // Refine every crossing.
    std::vector<long> all;
    for (auto& c : chains) all.insert(all.end(), c.begin(), c.end());
    std::vector<FermiVertex> verts(all.size());
    parallel_for(all.size(), [&](std::size_t q) {
      long e = all[q];
      long base = e / 2;
      int i = static_cast<int>(base / Nn), j = static_cast<int>(base % Nn);
      int i2 = e % 2 ? i : i + 1, j2 = e % 2 ? j + 1 : j;
      verts[q] = detail::refine_edge(field, tau, {node(i), node(j)}, {node(i2), node(j2)}, F(i, j), opt);
    });
    std::size_t pos = 0;
    for (std::size_t c = 0; c < chains.size(); ++c) {
      FermiComponent comp;
      comp.closed = closed[c];
      comp.vertices.assign(verts.begin() + pos, verts.begin() + pos + chains[c].size());
      pos += chains[c].size();
      // Orient so the normal points to the right of the direction of travel.
      double turn = 0;
      std::size_t n = comp.vertices.size();
      for (std::size_t q = 0; q + 1 < n; ++q) {
        const auto &a = comp.vertices[q], &b = comp.vertices[q + 1];
        Vec2 t{b.kappa[0] - a.kappa[0], b.kappa[1] - a.kappa[1]};
        turn += t[0] * a.normal[1] - t[1] * a.normal[0];
      }
      if (turn > 0) std::reverse(comp.vertices.begin(), comp.vertices.end());
      out.components.push_back(std::move(comp));
    }
    break;
  }

  out.max_residual = 0;
  out.bragg_vertices = 0;
  for (const auto& c : out.components)
    for (const auto& v : c.vertices) {
      if (v.bragg) {
        ++out.bragg_vertices;
        continue;
      }
      out.max_residual = std::max(out.max_residual, v.residual);
      if (v.grad_norm < opt.grad_threshold) out.irregular = true;
    }
  if (out.irregular) out.warnings.push_back("IrregularFrequency: |grad Lambda| below threshold on the surface");
  if (out.bragg_vertices > 0)
    out.warnings.push_back(std::to_string(out.bragg_vertices) + " vertices sit on jumps of Lambda across Bragg lines");
  return out;
}

// Level-set curvature from fourth-order central differences of Lambda.
inline double curvature_fd(const ExtendedZoneField& field, const Vec2& kappa, double h) {
  static const double c1[5] = {1, -8, 0, 8, -1}, c2[5] = {-1, 16, -30, 16, -1};
  double L[5][5];
  for (int a = 0; a < 5; ++a)
    for (int b = 0; b < 5; ++b)
      L[a][b] = field.lambda({kappa[0] + (a - 2) * h, kappa[1] + (b - 2) * h});
  double gx = 0, gy = 0, hxx = 0, hyy = 0, hxy = 0;
  for (int a = 0; a < 5; ++a) {
    gx += c1[a] * L[a][2];
    gy += c1[a] * L[2][a];
    hxx += c2[a] * L[a][2];
    hyy += c2[a] * L[2][a];
    for (int b = 0; b < 5; ++b) hxy += c1[a] * c1[b] * L[a][b];
  }
  gx /= 12 * h;
  gy /= 12 * h;
  hxx /= 12 * h * h;
  hyy /= 12 * h * h;
  hxy /= 144 * h * h;
  double g = std::hypot(gx, gy);
  return (hxx * gy * gy - 2 * hxy * gx * gy + hyy * gx * gx) / (g * g * g);
}

struct CurvatureReport {
  double min_curvature = 0;
  double max_curvature = 0;
  Vec2 witness{0, 0};  // vertex with the smallest curvature
  bool positive = false;
  int components = 0;
  int skipped = 0;  // Bragg vertices
};

inline CurvatureReport curvature_check(const FermiSurface& s) {
  if (s.irregular) throw Error(Errc::IrregularFrequency, "surface has vertices with vanishing gradient");
  if (s.empty()) throw Error(Errc::EmptyLevelSet, "surface is empty");
  CurvatureReport r;
  r.min_curvature = INFINITY;
  r.max_curvature = -INFINITY;
  r.components = static_cast<int>(s.components.size());
  for (const auto& c : s.components)
    for (const auto& v : c.vertices) {
      if (v.bragg) {
        ++r.skipped;
        continue;
      }
      if (v.curvature < r.min_curvature) {
        r.min_curvature = v.curvature;
        r.witness = v.kappa;
      }
      r.max_curvature = std::max(r.max_curvature, v.curvature);
    }
  r.positive = r.min_curvature > 0;
  return r;
}

inline Vec2 fold(const Vec2& k) { return {wrap_to_zone(k[0]), wrap_to_zone(k[1])}; }

struct ReducedZoneSurface {
  double tau = 0;
  std::vector<std::vector<Vec2>> pieces;  // connected pieces inside B
  std::vector<bool> closed;
  int component_count() const { return static_cast<int>(pieces.size()); }
};

// Folds every vertex into B and splits polylines where the folding jumps.
inline ReducedZoneSurface reduce_zone(const FermiSurface& s) {
  ReducedZoneSurface r;
  r.tau = s.tau;
  auto jump = [](const Vec2& a, const Vec2& b) { return std::abs(a[0] - b[0]) > pi || std::abs(a[1] - b[1]) > pi; };
  for (const auto& c : s.components) {
    std::vector<Vec2> pts;
    for (const auto& v : c.vertices) pts.push_back(fold(v.kappa));
    std::size_t n = pts.size();
    if (n == 0) continue;
    std::size_t start = 0;
    bool any = false;
    if (c.closed)
      for (std::size_t q = 0; q < n; ++q)
        if (jump(pts[q], pts[(q + 1) % n])) {
          start = (q + 1) % n;
          any = true;
          break;
        }
    if (c.closed && !any) {
      r.pieces.push_back(pts);
      r.closed.push_back(true);
      continue;
    }
    std::vector<Vec2> cur;
    for (std::size_t q = 0; q < n; ++q) {
      const Vec2& p = pts[(start + q) % n];
      if (!cur.empty() && jump(cur.back(), p)) {
        r.pieces.push_back(cur);
        r.closed.push_back(false);
        cur.clear();
      }
      cur.push_back(p);
    }
    if (!cur.empty()) {
      r.pieces.push_back(cur);
      r.closed.push_back(false);
    }
  }
  return r;
}

// Symmetric Hausdorff distance between two point sets.
inline double hausdorff(const std::vector<Vec2>& a, const std::vector<Vec2>& b) {
  auto one = [](const std::vector<Vec2>& p, const std::vector<Vec2>& q) {
    double worst = 0;
    for (const Vec2& x : p) {
      double best = INFINITY;
      for (const Vec2& y : q) best = std::min(best, std::hypot(x[0] - y[0], x[1] - y[1]));
      worst = std::max(worst, best);
    }
    return worst;
  };
  return std::max(one(a, b), one(b, a));
}

inline std::vector<Vec2> surface_points(const FermiSurface& s) {
  std::vector<Vec2> p;
  for (const auto& c : s.components)
    for (const auto& v : c.vertices) p.push_back(v.kappa);
  return p;
}

// The four quadrant arcs of F_lambda for V = V1(x1) + V2(x2) in the first
// band window, with Z_i the increasing inverse of E_1^{V_i} on [0, pi).
struct SeparableArcs {
  double lambda = 0;
  std::array<std::vector<Vec2>, 4> arcs;
  std::array<std::vector<double>, 4> curvature;  // closed form
  std::array<std::pair<double, double>, 4> r_range;
  double window_lo = 0, window_hi = 0;
  double max_residual = 0;
  double closure_gap = 0;  // largest gap between consecutive arc ends
  double min_curvature = 0;

  std::vector<Vec2> points() const {
    std::vector<Vec2> p;
    for (const auto& a : arcs) p.insert(p.end(), a.begin(), a.end());
    return p;
  }
};

struct A2Window {
  double lo = 0, hi = 0;
  bool contains(double lambda) const { return lo < lambda && lambda < hi; }
};

inline A2Window a2_window(const Hill1D& h1, const Hill1D& h2) {
  const BandInterval &b1 = h1.band(1), &b2 = h2.band(1);
  return {b1.at0 + b2.at0, std::min(b1.at0 + b2.atpi, b1.atpi + b2.at0)};
}

inline SeparableArcs separable_arcs(const Potential1D& v1, const Potential1D& v2, double lambda, int n = 256) {
  require(n >= 2, "need >= 2 samples per arc");
  Hill1D h1(v1, 2), h2(v2, 2);
  A2Window w = a2_window(h1, h2);
  SeparableArcs s;
  s.lambda = lambda;
  s.window_lo = w.lo;
  s.window_hi = w.hi;
  if (!w.contains(lambda))
    throw Error(Errc::FrequencyOutsideWindow, "lambda " + std::to_string(lambda) + " outside (" +
                                                  std::to_string(w.lo) + ", " + std::to_string(w.hi) + ")");
  double e1 = h1.band(1).at0, e2 = h2.band(1).at0;
  // Arc ends land on the band bottom up to rounding in lambda - r.
  auto Z = [](const Hill1D& h, double E) {
    double b = h.band(1).at0;
    return E <= b + 1e-13 * std::max(1.0, std::abs(b)) ? 0.0 : h.inverse_band(1, E);
  };
  auto Z1 = [&](double E) { return Z(h1, E); };
  auto Z2 = [&](double E) { return Z(h2, E); };
  s.r_range = {std::pair{e2, lambda - e1}, {e1, lambda - e2}, {e2, lambda - e1}, {e1, lambda - e2}};
  for (int a = 0; a < 4; ++a) {
    auto [r0, r1] = s.r_range[a];
    for (int q = 0; q < n; ++q) {
      double u = static_cast<double>(q) / (n - 1);
      double r = r0 + (r1 - r0) * 0.5 * (1 - std::cos(pi * u));
      r = std::clamp(r, r0, r1);
      Vec2 k;
      switch (a) {
        case 0: k = {Z1(lambda - r), Z2(r)}; break;
        case 1: k = {-Z1(r), Z2(lambda - r)}; break;
        case 2: k = {-Z1(lambda - r), -Z2(r)}; break;
        default: k = {Z1(r), -Z2(lambda - r)}; break;
      }
      s.arcs[a].push_back(k);
      double res = std::abs(h1.band_value(1, k[0]) + h2.band_value(1, k[1]) - lambda);
      s.max_residual = std::max(s.max_residual, res);
      auto [d1, dd1] = h1.band_derivatives(1, k[0]);
      auto [d2, dd2] = h2.band_derivatives(1, k[1]);
      double g2 = d1 * d1 + d2 * d2;
      s.curvature[a].push_back((dd1 * d2 * d2 + dd2 * d1 * d1) / std::pow(g2, 1.5));
    }
  }
  for (int a = 0; a < 4; ++a) {
    const Vec2 &end = s.arcs[a].back(), &next = s.arcs[(a + 1) % 4].front();
    s.closure_gap = std::max(s.closure_gap, std::hypot(end[0] - next[0], end[1] - next[1]));
  }
  s.min_curvature = INFINITY;
  for (const auto& c : s.curvature)
    for (double v : c) s.min_curvature = std::min(s.min_curvature, v);
  return s;
}

}  // namespace fbloch

#endif
