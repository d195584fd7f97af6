#ifndef FBLOCH_FLOQUET_HPP
#define FBLOCH_FLOQUET_HPP

#include "planewave.hpp"

namespace fbloch {

inline double cell_volume_B(int d) { return std::pow(two_pi, d); }

// Finitely supported function: cells n in [lo, hi] (per axis), g midpoint
// samples per axis in every cell.
struct SampledFunction {
  int d = 2;
  int g = 8;
  Label lo{0, 0}, hi{0, 0};
  std::vector<cplx> values;  // cell-major, then x-grid

  SampledFunction() = default;
  SampledFunction(int d_, int g_, Label lo_, Label hi_) : d(d_), g(g_), lo(lo_), hi(hi_) {
    require(d == 1 || d == 2, "dimension must be 1 or 2");
    require(g >= 1, "grid must have >= 1 point per cell");
    if (d == 1) lo[1] = hi[1] = 0;
    require(hi[0] >= lo[0] && hi[1] >= lo[1], "empty support box");
    values.assign(static_cast<std::size_t>(cells()) * points(), 0.0);
  }

  int points() const { return d == 1 ? g : g * g; }
  int cells() const { return (hi[0] - lo[0] + 1) * (hi[1] - lo[1] + 1); }
  Label cell(int c) const {
    int w = hi[1] - lo[1] + 1;
    return {lo[0] + c / w, lo[1] + c % w};
  }
  int cell_index(const Label& n) const {
    if (n[0] < lo[0] || n[0] > hi[0] || n[1] < lo[1] || n[1] > hi[1]) return -1;
    return (n[0] - lo[0]) * (hi[1] - lo[1] + 1) + (n[1] - lo[1]);
  }
  Vec2 point(int p) const {
    if (d == 1) return {(p + 0.5) / g, 0.0};
    return {(p / g + 0.5) / g, (p % g + 0.5) / g};
  }
  double weight() const { return 1.0 / points(); }
  cplx& at(int c, int p) { return values[static_cast<std::size_t>(c) * points() + p]; }
  cplx at(int c, int p) const { return values[static_cast<std::size_t>(c) * points() + p]; }

  template <class F>
  void fill(F&& f) {
    for (int c = 0; c < cells(); ++c)
      for (int p = 0; p < points(); ++p) {
        Label n = cell(c);
        Vec2 x = point(p);
        at(c, p) = f(Vec2{x[0] + n[0], x[1] + n[1]});
      }
  }

  double lp_norm(double r) const {
    if (std::isinf(r)) {
      double m = 0;
      for (const cplx& v : values) m = std::max(m, std::abs(v));
      return m;
    }
    double s = 0;
    for (const cplx& v : values) s += std::pow(std::abs(v), r);
    return std::pow(s * weight(), 1.0 / r);
  }
};

// Periodic trapezoid grid on B with N points per axis.
struct KGrid {
  int d = 2;
  int N = 16;
  int size() const { return d == 1 ? N : N * N; }
  Vec2 k(int i) const {
    double h = two_pi / N;
    if (d == 1) return {-pi + h * i, 0.0};
    return {-pi + h * (i / N), -pi + h * (i % N)};
  }
  double weight() const { return std::pow(two_pi / N, d); }
};

struct FloquetField {
  int d = 2, g = 8;
  KGrid grid;
  std::vector<cplx> values;  // [k][x]
  int points() const { return d == 1 ? g : g * g; }
  cplx at(int ki, int p) const { return values[static_cast<std::size_t>(ki) * points() + p]; }
  cplx& at(int ki, int p) { return values[static_cast<std::size_t>(ki) * points() + p]; }

  double l2_norm() const {
    double s = 0;
    for (const cplx& v : values) s += std::norm(v);
    return std::sqrt(s * grid.weight() / points());
  }
};

// Uf(x,k) = |B|^{-1/2} sum_n f(x - n) e^{i<k,n>} for x in the unit cell.
inline FloquetField transform(const SampledFunction& f, const KGrid& grid) {
  require(grid.d == f.d, "grid and function dimensions differ");
  FloquetField u;
  u.d = f.d;
  u.g = f.g;
  u.grid = grid;
  u.values.assign(static_cast<std::size_t>(grid.size()) * f.points(), 0.0);
  double norm = 1.0 / std::sqrt(cell_volume_B(f.d));
  parallel_for(grid.size(), [&](std::size_t ki) {
    Vec2 k = grid.k(static_cast<int>(ki));
    for (int c = 0; c < f.cells(); ++c) {
      // f(x - n) with x in Omega and x - n in cell m means n = -m.
      Label m = f.cell(c);
      cplx ph = std::exp(I * (-(k[0] * m[0] + k[1] * m[1]))) * norm;
      for (int p = 0; p < f.points(); ++p) u.at(static_cast<int>(ki), p) += f.at(c, p) * ph;
    }
  });
  return u;
}

// U^{-1}g at the grid point p of cell n, using g(x+n,k) = e^{i<k,n>} g(x,k).
inline cplx inverse_at(const FloquetField& u, const Label& n, int p, std::vector<std::string>* warnings = nullptr) {
  int reach = std::max(std::abs(n[0]), std::abs(n[1]));
  if (warnings && 2 * reach >= u.grid.N)
    warnings->push_back("AliasRisk: k-grid with N=" + std::to_string(u.grid.N) + " cannot resolve cell offset " +
                        std::to_string(reach));
  cplx acc = 0;
  for (int ki = 0; ki < u.grid.size(); ++ki) {
    Vec2 k = u.grid.k(ki);
    acc += u.at(ki, p) * std::exp(I * (k[0] * n[0] + k[1] * n[1]));
  }
  return acc * u.grid.weight() / std::sqrt(cell_volume_B(u.d));
}

inline SampledFunction inverse(const FloquetField& u, Label lo, Label hi, std::vector<std::string>* warnings = nullptr) {
  SampledFunction f(u.d, u.g, lo, hi);
  int width = std::max(hi[0] - lo[0], hi[1] - lo[1]);
  if (width >= u.grid.N) {
    if (!warnings) throw Error(Errc::AliasRisk, "k-grid too coarse for the requested support");
    warnings->push_back("AliasRisk: support width exceeds k-grid size");
  }
  for (int c = 0; c < f.cells(); ++c)
    for (int p = 0; p < f.points(); ++p) f.at(c, p) = inverse_at(u, f.cell(c), p);
  return f;
}

// <Uf(.,k), psi_s(.,k)> over k-grid x labels, both by x-quadrature on the
// cell and through the whole-space integral |B|^{-1/2} int f conj(psi_s).
struct CoefficientTable {
  KGrid grid;
  TruncationBox box;
  std::vector<cplx> values;  // [k][label]
  double route_gap = 0;       // max difference between the two routes
  cplx at(int ki, int li) const { return values[static_cast<std::size_t>(ki) * box.size() + li]; }
};

inline CoefficientTable coefficients(const SampledFunction& f, const PotentialSpec& pot, const KGrid& grid,
                                     const TruncationBox& box) {
  require(pot.d == f.d && box.d == f.d && grid.d == f.d, "dimension mismatch");
  CoefficientTable t;
  t.grid = grid;
  t.box = box;
  t.values.assign(static_cast<std::size_t>(grid.size()) * box.size(), 0.0);
  FloquetField u = transform(f, grid);
  std::vector<double> gaps(grid.size(), 0.0);
  double norm = 1.0 / std::sqrt(cell_volume_B(f.d));
  parallel_for(grid.size(), [&](std::size_t kis) {
    int ki = static_cast<int>(kis);
    Vec2 k = grid.k(ki);
    auto pairs = bloch_eigenpairs(pot, k, box);
    // Plane waves on the cell grid.
    std::vector<cplx> wave(static_cast<std::size_t>(box.size()) * f.points());
    for (int i = 0; i < box.size(); ++i) {
      Label s = box.label(i);
      for (int p = 0; p < f.points(); ++p) {
        Vec2 x = f.point(p);
        wave[static_cast<std::size_t>(i) * f.points() + p] =
            std::exp(I * ((k[0] + two_pi * s[0]) * x[0] + (k[1] + two_pi * s[1]) * x[1]));
      }
    }
    // Route A: cell quadrature of Uf against plane waves.
    std::vector<cplx> ua(box.size(), 0.0), ub(box.size(), 0.0);
    for (int i = 0; i < box.size(); ++i) {
      cplx acc = 0;
      for (int p = 0; p < f.points(); ++p)
        acc += u.at(ki, p) * std::conj(wave[static_cast<std::size_t>(i) * f.points() + p]);
      ua[i] = acc * f.weight();
    }
    // Route B: whole-space quadrature, psi(x+m) = e^{i<k,m>} psi(x).
    for (int c = 0; c < f.cells(); ++c) {
      Label m = f.cell(c);
      cplx ph = std::exp(-I * (k[0] * m[0] + k[1] * m[1]));
      for (int i = 0; i < box.size(); ++i) {
        cplx acc = 0;
        for (int p = 0; p < f.points(); ++p)
          acc += f.at(c, p) * std::conj(wave[static_cast<std::size_t>(i) * f.points() + p]);
        ub[i] += acc * ph;
      }
    }
    for (int i = 0; i < box.size(); ++i) ub[i] *= f.weight() * norm;
    for (int li = 0; li < box.size(); ++li) {
      const VectorC& c = pairs[li].coeffs;
      cplx a = 0, b = 0;
      for (int i = 0; i < box.size(); ++i) {
        a += std::conj(c[i]) * ua[i];
        b += std::conj(c[i]) * ub[i];
      }
      t.values[static_cast<std::size_t>(ki) * box.size() + li] = a;
      gaps[ki] = std::max(gaps[ki], std::abs(a - b));
    }
  });
  for (double g : gaps) t.route_gap = std::max(t.route_gap, g);
  return t;
}

// L^r(B x Z^d) norm of a coefficient table; r = inf gives the max over samples.
inline double mixed_norm(const CoefficientTable& t, double r) {
  require(r >= 2.0, "mixed norm exponent must be >= 2");
  if (std::isinf(r)) {
    double m = 0;
    for (const cplx& v : t.values) m = std::max(m, std::abs(v));
    return m;
  }
  double s = 0;
  for (int ki = 0; ki < t.grid.size(); ++ki) {
    double row = 0;
    for (int li = 0; li < t.box.size(); ++li) row += std::pow(std::abs(t.at(ki, li)), r);
    s += row;
  }
  return std::pow(s * t.grid.weight(), 1.0 / r);
}

}  // namespace fbloch

#endif
