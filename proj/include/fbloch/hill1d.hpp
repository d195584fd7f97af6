#ifndef FBLOCH_HILL1D_HPP
#define FBLOCH_HILL1D_HPP

#include <array>
#include <vector>

#include "common.hpp"

namespace fbloch {

// Piecewise-constant 1-periodic potential on [0,1]. Sampled potentials are
// converted to cells holding the average of their linear interpolant.
class Potential1D {
 public:
  struct Cell {
    double length;
    double value;
  };

  Potential1D() : cells_{{1.0, 0.0}} { rebuild(); }

  static Potential1D from_cells(std::vector<Cell> cells) {
    require(!cells.empty(), "potential needs at least one cell");
    double total = 0.0;
    for (const Cell& c : cells) {
      require(c.length > 0.0 && std::isfinite(c.length), "cell lengths must be positive");
      require(std::isfinite(c.value), "cell values must be finite");
      total += c.length;
    }
    require(std::abs(total - 1.0) < 1e-12, "cell lengths must sum to 1");
    Potential1D p;
    p.cells_ = std::move(cells);
    p.rebuild();
    return p;
  }

  static Potential1D from_samples(const std::vector<double>& v) {
    require(v.size() >= 8, "sampled potential needs at least 8 samples");
    std::size_t n = v.size();
    std::vector<Cell> cells(n);
    for (std::size_t j = 0; j < n; ++j) {
      require(std::isfinite(v[j]), "samples must be finite");
      cells[j] = {1.0 / static_cast<double>(n), 0.5 * (v[j] + v[(j + 1) % n])};
    }
    Potential1D p;
    p.cells_ = std::move(cells);
    p.rebuild();
    return p;
  }

  static Potential1D constant(double mu) { return from_cells({{1.0, mu}}); }

  // Samples of f on the uniform grid x_j = j/n.
  template <class F>
  static Potential1D sample(F&& f, int n) {
    std::vector<double> v(n);
    for (int j = 0; j < n; ++j) v[j] = f(static_cast<double>(j) / n);
    return from_samples(v);
  }

  const std::vector<Cell>& cells() const { return cells_; }
  const std::vector<double>& starts() const { return starts_; }

  double min_value() const {
    double m = cells_[0].value;
    for (const Cell& c : cells_) m = std::min(m, c.value);
    return m;
  }
  double max_value() const {
    double m = cells_[0].value;
    for (const Cell& c : cells_) m = std::max(m, c.value);
    return m;
  }
  double mean() const {
    double s = 0;
    for (const Cell& c : cells_) s += c.length * c.value;
    return s;
  }
  double sup_deviation(double mu) const {
    double m = 0;
    for (const Cell& c : cells_) m = std::max(m, std::abs(c.value - mu));
    return m;
  }
  bool is_constant() const {
    for (const Cell& c : cells_)
      if (c.value != cells_[0].value) return false;
    return true;
  }

  double operator()(double x) const {
    x -= std::floor(x);
    std::size_t i = cell_index(x);
    return cells_[i].value;
  }

  std::size_t cell_index(double x) const {
    auto it = std::upper_bound(starts_.begin(), starts_.end(), x);
    std::size_t i = static_cast<std::size_t>(it - starts_.begin());
    return i == 0 ? 0 : std::min(i - 1, cells_.size() - 1);
  }

  // Fourier coefficient \int_0^1 V(x) e^{-2 pi i n x} dx, exact for cells.
  cplx fourier(int n) const {
    if (n == 0) return mean();
    cplx s = 0;
    double w = two_pi * n;
    for (std::size_t i = 0; i < cells_.size(); ++i) {
      double a = starts_[i], b = a + cells_[i].length;
      s += cells_[i].value * (std::exp(-I * (w * b)) - std::exp(-I * (w * a))) / (-I * w);
    }
    return s;
  }

 private:
  void rebuild() {
    starts_.resize(cells_.size());
    double x = 0;
    for (std::size_t i = 0; i < cells_.size(); ++i) {
      starts_[i] = x;
      x += cells_[i].length;
    }
  }

  std::vector<Cell> cells_;
  std::vector<double> starts_;
};

namespace hill {

// Value with first and second derivative in E.
struct Jet {
  double v = 0, d1 = 0, d2 = 0;
};

inline Jet operator*(const Jet& a, const Jet& b) {
  return {a.v * b.v, a.d1 * b.v + a.v * b.d1, a.d2 * b.v + 2 * a.d1 * b.d1 + a.v * b.d2};
}
inline Jet operator+(const Jet& a, const Jet& b) { return {a.v + b.v, a.d1 + b.d1, a.d2 + b.d2}; }

// c = cos(sqrt(q) L), s = sin(sqrt(q) L)/sqrt(q) and their q-derivatives,
// continued analytically through q <= 0.
inline void cs_jet(double q, double L, Jet& c, Jet& s) {
  double z = q * L * L;
  if (std::abs(z) < 1.0) {
    double c0 = 0, c1 = 0, c2 = 0, s0 = 0, s1 = 0, s2 = 0;
    double f2n = 1.0, f2n1 = 1.0;  // (2n)!, (2n+1)!
    double zp = 1.0;               // (-z)^n
    double zm1 = 0.0, zm2 = 0.0;   // (-1)^n z^{n-1}, (-1)^n z^{n-2}
    for (int n = 0; n < 22; ++n) {
      if (n > 0) {
        f2n *= (2.0 * n - 1.0) * (2.0 * n);
        f2n1 *= (2.0 * n) * (2.0 * n + 1.0);
        zp *= -z;
      }
      if (n == 1) zm1 = -1.0;
      else if (n > 1) zm1 *= -z;
      if (n == 2) zm2 = 1.0;
      else if (n > 2) zm2 *= -z;
      c0 += zp / f2n;
      s0 += zp / f2n1;
      if (n >= 1) {
        c1 += n * zm1 / f2n;
        s1 += n * zm1 / f2n1;
      }
      if (n >= 2) {
        c2 += n * (n - 1.0) * zm2 / f2n;
        s2 += n * (n - 1.0) * zm2 / f2n1;
      }
    }
    double L2 = L * L;
    c = {c0, L2 * c1, L2 * L2 * c2};
    s = {L * s0, L * L2 * s1, L * L2 * L2 * s2};
    return;
  }
  double cv, sv;
  if (q > 0) {
    double w = std::sqrt(q);
    cv = std::cos(w * L);
    sv = std::sin(w * L) / w;
  } else {
    double w = std::sqrt(-q);
    cv = std::cosh(w * L);
    sv = std::sinh(w * L) / w;
  }
  double c1 = -0.5 * L * sv;
  double s1 = (L * cv - sv) / (2 * q);
  double c2 = -0.5 * L * s1;
  double s2 = (L * c1 - 3 * s1) / (2 * q);
  c = {cv, c1, c2};
  s = {sv, s1, s2};
}

using JetMatrix = std::array<Jet, 4>;  // row major 2x2

inline JetMatrix jet_mul(const JetMatrix& A, const JetMatrix& B) {
  return {A[0] * B[0] + A[1] * B[2], A[0] * B[1] + A[1] * B[3], A[2] * B[0] + A[3] * B[2],
          A[2] * B[1] + A[3] * B[3]};
}

// Propagator of (u,u') across a constant cell of length L at q = E - V.
inline JetMatrix cell_jet(double q, double L) {
  Jet c, s;
  cs_jet(q, L, c, s);
  Jet m{-q * s.v, -s.v - q * s.d1, -2 * s.d1 - q * s.d2};
  return {c, s, m, c};
}

inline std::array<double, 4> cell_matrix(double q, double L) {
  Jet c, s;
  cs_jet(q, L, c, s);
  return {c.v, s.v, -q * s.v, c.v};
}

inline JetMatrix monodromy_jet(const Potential1D& pot, double E) {
  JetMatrix M{Jet{1, 0, 0}, Jet{}, Jet{}, Jet{1, 0, 0}};
  for (const auto& cell : pot.cells()) M = jet_mul(cell_jet(E - cell.value, cell.length), M);
  return M;
}

}  // namespace hill

struct Monodromy {
  double E = 0;
  std::array<double, 4> M{};  // row major, acts on (u(0), u'(0))
  double D = 0;
  double det() const { return M[0] * M[3] - M[1] * M[2]; }
};

inline Monodromy monodromy(const Potential1D& pot, double E) {
  require(std::isfinite(E), "energy must be finite");
  std::array<double, 4> M{1, 0, 0, 1};
  for (const auto& cell : pot.cells()) {
    auto T = hill::cell_matrix(E - cell.value, cell.length);
    M = {T[0] * M[0] + T[1] * M[2], T[0] * M[1] + T[1] * M[3], T[2] * M[0] + T[3] * M[2],
         T[2] * M[1] + T[3] * M[3]};
  }
  return {E, M, M[0] + M[3]};
}

struct Discriminant {
  double D, dD, d2D;
};

inline Discriminant discriminant(const Potential1D& pot, double E) {
  auto M = hill::monodromy_jet(pot, E);
  return {M[0].v + M[3].v, M[0].d1 + M[3].d1, M[0].d2 + M[3].d2};
}

struct BandInterval {
  int l = 0;
  double lo = 0, hi = 0;  // interval with |D| <= 2
  double at0 = 0, atpi = 0;  // E_l(0), E_l(pi)
};

struct BandEdgeOptions {
  double step = 0.01 * pi * pi;  // E-scan step
  double tol = 1e-12;
  double touch_tol = 1e-9;  // |D|-2 at an extremum treated as a closed gap
};

// Bloch solution of -u''+Vu=Eu with u(x+1)=e^{ik}u(x).
struct BlochFunction {
  double E = 0, k = 0;
  cplx u0, du0;  // normalized initial data
  std::vector<cplx> x_samples;  // on the uniform grid handed to band_function
  int multiplicity = 1;
};

class Hill1D {
 public:
  explicit Hill1D(Potential1D pot, int l_max = 6, double E_max = -1.0,
                  BandEdgeOptions opt = {})
      : pot_(std::move(pot)), opt_(opt) {
    require(l_max >= 1, "l_max must be >= 1");
    if (E_max <= 0.0 || !std::isfinite(E_max))
      E_max = pot_.max_value() + std::pow((l_max + 0.5) * pi, 2);
    compute_edges(l_max, E_max);
  }

  const Potential1D& potential() const { return pot_; }
  const std::vector<BandInterval>& bands() const { return bands_; }
  const std::vector<double>& edges() const { return edges_; }
  int band_count() const { return static_cast<int>(bands_.size()); }

  const BandInterval& band(int l) const {
    if (l < 1 || l > band_count())
      throw Error(Errc::BandNotResolved, "band " + std::to_string(l) + " not resolved");
    return bands_[l - 1];
  }

  // Ordering chain E1(0)<E1(pi)<=E2(pi)<E2(0)<=E3(0)<... over resolved bands.
  bool interlacing_holds(double tol = 1e-10) const {
    for (int l = 1; l <= band_count(); ++l) {
      const BandInterval& b = band(l);
      if (!(b.lo < b.hi)) return false;
      if (l > 1 && band(l - 1).hi > b.lo + tol) return false;
    }
    return true;
  }

  // E_l(k) for any real k (even, 2pi-periodic).
  double band_value(int l, double k) const {
    const BandInterval& b = band(l);
    double kk = std::abs(wrap_to_zone(k));
    double c = 2.0 * std::cos(kk);
    if (kk == 0.0) return b.at0;
    if (kk == pi) return b.atpi;
    double a = b.lo, z = b.hi;
    double fa = discriminant_value(a) - c;
    for (int it = 0; it < 200 && z - a > opt_.tol * std::max(1.0, std::abs(a)); ++it) {
      double m = 0.5 * (a + z);
      double fm = discriminant_value(m) - c;
      if ((fm > 0) == (fa > 0)) {
        a = m;
        fa = fm;
      } else {
        z = m;
      }
    }
    double E = 0.5 * (a + z);
    Discriminant d = discriminant(pot_, E);
    if (std::abs(d.dD) > 1e-10) {
      double En = E - (d.D - c) / d.dD;
      if (En >= b.lo && En <= b.hi) {
        double Dn = discriminant_value(En);
        if (std::abs(Dn - c) <= std::abs(d.D - c)) E = En;
      }
    }
    return E;
  }

  int multiplicity(int l, double k) const {
    double kk = std::abs(wrap_to_zone(k));
    if (kk != 0.0 && kk != pi) return 1;
    double E = band_value(l, kk);
    for (int m : {l - 1, l + 1}) {
      if (m < 1 || m > band_count()) continue;
      double Em = kk == 0.0 ? band(m).at0 : band(m).atpi;
      if (std::abs(Em - E) < 1e-8 * std::max(1.0, std::abs(E))) return 2;
    }
    return 1;
  }

  // Band value plus the normalized Bloch function sampled on nx uniform
  // points of [0,1] (both ends included).
  BlochFunction band_function(int l, double k, int nx = 129) const {
    BlochFunction f;
    f.k = k;
    f.E = band_value(l, k);
    f.multiplicity = multiplicity(l, k);
    if (f.multiplicity > 1)
      throw Error(Errc::DegenerateEdge,
                  "band " + std::to_string(l) + " touches its neighbour at k=" + std::to_string(k));
    initial_data(f.E, k, f.u0, f.du0);
    if (nx > 0) {
      f.x_samples.resize(nx);
      for (int j = 0; j < nx; ++j) {
        double x = nx == 1 ? 0.0 : static_cast<double>(j) / (nx - 1);
        f.x_samples[j] = evaluate(f, x).first;
      }
    }
    return f;
  }

  // (phi(x), phi'(x)) for any real x via quasi-periodicity.
  std::pair<cplx, cplx> evaluate(const BlochFunction& f, double x) const {
    double n = std::floor(x);
    double t = x - n;
    if (t >= 1.0) {
      t = 0.0;
      n += 1.0;
    }
    std::size_t ci = pot_.cell_index(t);
    cplx u = f.u0, du = f.du0;
    const auto& cells = pot_.cells();
    for (std::size_t i = 0; i < ci; ++i) {
      auto T = hill::cell_matrix(f.E - cells[i].value, cells[i].length);
      cplx nu = T[0] * u + T[1] * du;
      cplx ndu = T[2] * u + T[3] * du;
      u = nu;
      du = ndu;
    }
    double dt = t - pot_.starts()[ci];
    if (dt > 0) {
      auto T = hill::cell_matrix(f.E - cells[ci].value, dt);
      cplx nu = T[0] * u + T[1] * du;
      cplx ndu = T[2] * u + T[3] * du;
      u = nu;
      du = ndu;
    }
    cplx ph = std::exp(I * (f.k * n));
    return {ph * u, ph * du};
  }

  // (dE/dk, d2E/dk2) from implicit differentiation of D(E(k)) = 2cos k.
  std::pair<double, double> band_derivatives(int l, double k) const {
    double E = band_value(l, k);
    Discriminant d = discriminant(pot_, E);
    if (std::abs(d.dD) < 1e-10)
      throw Error(Errc::BandEdgeSingularity, "D'(E) vanishes at band edge");
    double kw = wrap_to_zone(k);
    double e1 = -2.0 * std::sin(kw) / d.dD;
    double e2 = (-2.0 * std::cos(kw) - d.d2D * e1 * e1) / d.dD;
    return {e1, e2};
  }

  // k in [0,pi) with E_l(k) = E.
  double inverse_band(int l, double E) const {
    const BandInterval& b = band(l);
    double lo = std::min(b.at0, b.atpi), hi = std::max(b.at0, b.atpi);
    bool ok = l % 2 == 1 ? (E >= b.at0 && E < b.atpi) : (E > b.atpi && E <= b.at0);
    if (!ok || E < lo || E > hi)
      throw Error(Errc::OutOfBand, "energy " + std::to_string(E) + " outside band " + std::to_string(l));
    if (E == b.at0) return 0.0;
    double c = std::clamp(0.5 * discriminant_value(E), -1.0, 1.0);
    return std::acos(c);
  }

  double discriminant_value(double E) const { return monodromy(pot_, E).D; }

 private:
  void initial_data(double E, double k, cplx& u0, cplx& du0) const {
    Monodromy m = monodromy(pot_, E);
    cplx mu = std::exp(I * k);
    cplx a = m.M[0], b = m.M[1], c = m.M[2], d = m.M[3];
    cplx v1u = b, v1d = mu - a;
    cplx v2u = mu - d, v2d = c;
    double n1 = std::norm(v1u) + std::norm(v1d), n2 = std::norm(v2u) + std::norm(v2d);
    if (n1 >= n2) {
      u0 = v1u;
      du0 = v1d;
    } else {
      u0 = v2u;
      du0 = v2d;
    }
    if (std::max(n1, n2) < 1e-28) {
      u0 = 1.0;
      du0 = 0.0;
    }
    // L2 norm over [0,1], cell by cell.
    double nrm = 0.0;
    cplx u = u0, du = du0;
    for (const auto& cell : pot_.cells()) {
      double q = E - cell.value;
      int ng = 8 + static_cast<int>(std::ceil(2.0 * std::sqrt(std::abs(q)) * cell.length));
      const GaussRule& g = gauss_legendre(std::min(ng, 64));
      double acc = 0.0;
      for (std::size_t i = 0; i < g.x.size(); ++i) {
        double t = 0.5 * cell.length * (g.x[i] + 1.0);
        auto T = hill::cell_matrix(q, t);
        acc += g.w[i] * std::norm(T[0] * u + T[1] * du);
      }
      nrm += 0.5 * cell.length * acc;
      auto T = hill::cell_matrix(q, cell.length);
      cplx nu = T[0] * u + T[1] * du;
      cplx ndu = T[2] * u + T[3] * du;
      u = nu;
      du = ndu;
    }
    double s = 1.0 / std::sqrt(nrm);
    u0 *= s;
    du0 *= s;
    double scale = std::max(std::abs(u0), std::abs(du0));
    cplx ph = std::abs(u0) > 1e-8 * scale ? std::conj(u0) / std::abs(u0) : std::conj(du0) / std::abs(du0);
    u0 *= ph;
    du0 *= ph;
    u0 = {u0.real(), 0.0};
    if (std::abs(u0) <= 1e-8 * scale) du0 = {du0.real(), 0.0};
  }

  void compute_edges(int l_max, double E_max) {
    double E0 = pot_.min_value() - 1.0;
    double h = opt_.step;
    int n = std::max(16, static_cast<int>(std::ceil((E_max - E0) / h)));
    std::vector<double> Es(n + 1), dD(n + 1);
    for (int i = 0; i <= n; ++i) {
      Es[i] = E0 + (E_max - E0) * i / n;
      dD[i] = discriminant(pot_, Es[i]).dD;
    }
    // Critical points of D split the axis into monotone pieces.
    std::vector<double> crit;
    for (int i = 0; i < n; ++i) {
      if (dD[i] == 0.0) {
        crit.push_back(Es[i]);
        continue;
      }
      if ((dD[i] > 0) != (dD[i + 1] > 0) && dD[i + 1] != 0.0) {
        double a = Es[i], b = Es[i + 1], fa = dD[i];
        for (int it = 0; it < 200 && b - a > 1e-14 * std::max(1.0, std::abs(a)); ++it) {
          double m = 0.5 * (a + b);
          double fm = discriminant(pot_, m).dD;
          if ((fm > 0) == (fa > 0)) {
            a = m;
            fa = fm;
          } else {
            b = m;
          }
        }
        crit.push_back(0.5 * (a + b));
      }
    }
    std::vector<double> nodes{E0};
    std::vector<bool> is_crit{false};
    for (double c : crit) {
      nodes.push_back(c);
      is_crit.push_back(true);
    }
    nodes.push_back(E_max);
    is_crit.push_back(false);

    std::vector<double> edges;
    for (double lev : {2.0, -2.0}) {
      std::vector<double> f(nodes.size());
      for (std::size_t i = 0; i < nodes.size(); ++i) {
        f[i] = discriminant_value(nodes[i]) - lev;
        if (is_crit[i] && std::abs(f[i]) < opt_.touch_tol) {
          f[i] = 0.0;
          edges.push_back(nodes[i]);
          edges.push_back(nodes[i]);
        }
      }
      for (std::size_t i = 0; i + 1 < nodes.size(); ++i) {
        if (f[i] == 0.0 || f[i + 1] == 0.0) continue;
        if ((f[i] > 0) == (f[i + 1] > 0)) continue;
        double a = nodes[i], b = nodes[i + 1], fa = f[i];
        for (int it = 0; it < 300 && b - a > opt_.tol * std::max(1.0, std::abs(a)); ++it) {
          double m = 0.5 * (a + b);
          double fm = discriminant_value(m) - lev;
          if (fm == 0.0) {
            a = b = m;
            break;
          }
          if ((fm > 0) == (fa > 0)) {
            a = m;
            fa = fm;
          } else {
            b = m;
          }
        }
        edges.push_back(0.5 * (a + b));
      }
    }
    std::sort(edges.begin(), edges.end());
    edges_ = edges;
    int nb = static_cast<int>(edges.size() / 2);
    if (nb < l_max)
      throw Error(Errc::BandNotResolved, "found " + std::to_string(nb) + " bands below E_max, wanted " +
                                             std::to_string(l_max) + "; scan grid too coarse or E_max too low");
    for (int l = 1; l <= nb; ++l) {
      BandInterval b;
      b.l = l;
      b.lo = edges[2 * l - 2];
      b.hi = edges[2 * l - 1];
      double Dlo = discriminant_value(b.lo), Dhi = discriminant_value(b.hi);
      bool odd = l % 2 == 1;
      double want_lo = odd ? 2.0 : -2.0, want_hi = odd ? -2.0 : 2.0;
      if (std::abs(Dlo - want_lo) > 1e-6 || std::abs(Dhi - want_hi) > 1e-6)
        throw Error(Errc::BandNotResolved, "band " + std::to_string(l) + " edges do not match |D|=2 pattern");
      b.at0 = odd ? b.lo : b.hi;
      b.atpi = odd ? b.hi : b.lo;
      bands_.push_back(b);
    }
  }

  Potential1D pot_;
  BandEdgeOptions opt_;
  std::vector<BandInterval> bands_;
  std::vector<double> edges_;
};

}  // namespace fbloch

#endif
