#ifndef FBLOCH_PLANEWAVE_HPP
#define FBLOCH_PLANEWAVE_HPP

#include <Eigen/Dense>
#include <map>
#include <optional>

#include "hill1d.hpp"

namespace fbloch {

using Label = std::array<int, 2>;  // second entry unused when d = 1
using Vec2 = std::array<double, 2>;

// Z^d-periodic potential: separable 1D parts or a finite Fourier table.
struct PotentialSpec {
  enum class Mode { Fourier, Separable };
  int d = 2;
  Mode mode = Mode::Fourier;
  std::map<Label, cplx> coeffs;   // Fourier mode
  std::vector<Potential1D> parts;  // Separable mode, one per axis

  static PotentialSpec zero(int d) {
    PotentialSpec p;
    p.d = d;
    return p;
  }

  static PotentialSpec fourier(int d, std::map<Label, cplx> c, double herm_tol = 1e-12) {
    require(d == 1 || d == 2, "dimension must be 1 or 2");
    PotentialSpec p;
    p.d = d;
    for (auto& [n, v] : c) {
      require(std::isfinite(v.real()) && std::isfinite(v.imag()), "coefficients must be finite");
      require(d == 2 || n[1] == 0, "d = 1 coefficients need n2 = 0");
      Label m{-n[0], -n[1]};
      auto it = c.find(m);
      cplx partner = it == c.end() ? cplx(0) : it->second;
      if (std::abs(partner - std::conj(v)) > herm_tol * std::max(1.0, std::abs(v)))
        throw Error(Errc::InvalidInput, "Fourier table is not Hermitian at (" + std::to_string(n[0]) + "," +
                                            std::to_string(n[1]) + ")");
    }
    p.coeffs = std::move(c);
    return p;
  }

  static PotentialSpec separable(std::vector<Potential1D> parts) {
    require(parts.size() == 1 || parts.size() == 2, "separable potentials need 1 or 2 parts");
    PotentialSpec p;
    p.d = static_cast<int>(parts.size());
    p.mode = Mode::Separable;
    p.parts = std::move(parts);
    return p;
  }

  // V(x,y) = amp sin^2(2 pi x) cos(2 pi y).
  static PotentialSpec figure1(double amp) {
    double a = amp;
    return fourier(2, {{{0, 1}, a / 4},
                       {{0, -1}, a / 4},
                       {{2, 1}, -a / 8},
                       {{2, -1}, -a / 8},
                       {{-2, 1}, -a / 8},
                       {{-2, -1}, -a / 8}});
  }

  // Fourier coefficient at n. Separable parts contribute on the axes.
  cplx coefficient(const Label& n) const {
    if (mode == Mode::Fourier) {
      auto it = coeffs.find(n);
      return it == coeffs.end() ? cplx(0) : it->second;
    }
    if (d == 1) return n[1] == 0 ? parts[0].fourier(n[0]) : cplx(0);
    cplx v = 0;
    if (n[1] == 0) v += parts[0].fourier(n[0]);
    if (n[0] == 0) v += parts[1].fourier(n[1]);
    return v;
  }

  bool is_zero() const {
    if (mode == Mode::Fourier) {
      for (auto& [n, v] : coeffs)
        if (v != 0.0) return false;
      return true;
    }
    for (const auto& p : parts)
      if (!p.is_constant() || p.cells()[0].value != 0.0) return false;
    return true;
  }

  double value(const Vec2& x) const {
    if (mode == Mode::Separable) {
      double v = parts[0](x[0]);
      if (d == 2) v += parts[1](x[1]);
      return v;
    }
    double v = 0;
    for (auto& [n, c] : coeffs) v += (c * std::exp(I * (two_pi * (n[0] * x[0] + n[1] * x[1])))).real();
    return v;
  }

  // Largest |n_i| in a Fourier table, used for the box warning.
  int support_radius() const {
    int r = 0;
    for (auto& [n, v] : coeffs) r = std::max({r, std::abs(n[0]), std::abs(n[1])});
    return r;
  }
};

// Labels {s : max|s_i| <= S}, ordered lexicographically.
struct TruncationBox {
  int d = 2;
  int S = 12;

  TruncationBox() = default;
  TruncationBox(int d_, int S_) : d(d_), S(S_) {
    require(d == 1 || d == 2, "dimension must be 1 or 2");
    require(S >= 2, "truncation S must be >= 2");
  }
  int side() const { return 2 * S + 1; }
  int size() const { return d == 1 ? side() : side() * side(); }
  Label label(int i) const {
    if (d == 1) return {i - S, 0};
    return {i / side() - S, i % side() - S};
  }
  int index(const Label& s) const {
    if (d == 1) return s[0] + S;
    return (s[0] + S) * side() + (s[1] + S);
  }
  bool contains(const Label& s) const {
    return std::abs(s[0]) <= S && (d == 1 ? s[1] == 0 : std::abs(s[1]) <= S);
  }
  bool interior(const Label& s) const {
    return std::abs(s[0]) <= S - 1 && (d == 1 || std::abs(s[1]) <= S - 1);
  }
  int max_norm(const Label& s) const { return std::max(std::abs(s[0]), d == 2 ? std::abs(s[1]) : 0); }
};

using MatrixC = Eigen::MatrixXcd;
using VectorC = Eigen::VectorXcd;

inline MatrixC assemble(const PotentialSpec& pot, const Vec2& k, const TruncationBox& box,
                        std::vector<std::string>* warnings = nullptr) {
  require(pot.d == box.d, "potential and box dimensions differ");
  if (warnings && pot.mode == PotentialSpec::Mode::Fourier && pot.support_radius() > 2 * box.S)
    warnings->push_back("potential support exceeds box differences; coefficients beyond 2S ignored");
  int n = box.size();
  MatrixC H = MatrixC::Zero(n, n);
  std::map<Label, cplx> table;
  if (!pot.is_zero()) {
    for (int a = -2 * box.S; a <= 2 * box.S; ++a) {
      for (int b = (box.d == 2 ? -2 * box.S : 0); b <= (box.d == 2 ? 2 * box.S : 0); ++b) {
        cplx v = pot.coefficient({a, b});
        if (v != 0.0) table[{a, b}] = v;
      }
    }
  }
  for (int i = 0; i < n; ++i) {
    Label s = box.label(i);
    double q0 = k[0] + two_pi * s[0], q1 = box.d == 2 ? k[1] + two_pi * s[1] : 0.0;
    H(i, i) = q0 * q0 + q1 * q1;
    for (auto& [m, v] : table) {
      Label t{s[0] - m[0], s[1] - m[1]};
      if (!box.contains(t)) continue;
      H(i, box.index(t)) += v;
    }
  }
  return H;
}

struct EigenResult {
  Eigen::VectorXd values;  // ascending
  MatrixC vectors;         // columns
};

inline EigenResult eigensolve(const MatrixC& H) {
  require(H.rows() == H.cols(), "matrix must be square");
  EigenResult r;
  int n = static_cast<int>(H.rows());
  bool diagonal = true;
  for (int i = 0; i < n && diagonal; ++i)
    for (int j = 0; j < n; ++j)
      if (i != j && H(i, j) != 0.0) {
        diagonal = false;
        break;
      }
  if (diagonal) {
    std::vector<int> idx(n);
    for (int i = 0; i < n; ++i) idx[i] = i;
    std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) { return H(a, a).real() < H(b, b).real(); });
    r.values.resize(n);
    r.vectors = MatrixC::Zero(n, n);
    for (int j = 0; j < n; ++j) {
      r.values[j] = H(idx[j], idx[j]).real();
      r.vectors(idx[j], j) = 1.0;
    }
    return r;
  }
  if (H.imag().cwiseAbs().maxCoeff() == 0.0) {
    // Real symmetric, e.g. an even real potential.
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(H.real());
    if (es.info() != Eigen::Success) throw Error(Errc::NoConvergence, "symmetric eigensolver did not converge");
    r.values = es.eigenvalues();
    r.vectors = es.eigenvectors().cast<cplx>();
    return r;
  }
  Eigen::SelfAdjointEigenSolver<MatrixC> es(H);
  if (es.info() != Eigen::Success) throw Error(Errc::NoConvergence, "Hermitian eigensolver did not converge");
  r.values = es.eigenvalues();
  r.vectors = es.eigenvectors();
  return r;
}

// Eigenpair index assigned to every label of the box (label index -> column).
struct Labeling {
  std::vector<int> column_of_label;
  std::vector<int> label_of_column;
  bool fallback = false;
};

// Dominant-component rule: eigenpairs in ascending order each take the
// unclaimed label with the largest |c_s|.
inline Labeling label_extended_zone(const EigenResult& e, const TruncationBox& box, bool allow_fallback = false,
                                    double ambiguity = 1e-6) {
  int n = static_cast<int>(e.values.size());
  Labeling L;
  L.column_of_label.assign(n, -1);
  L.label_of_column.assign(n, -1);
  try {
    for (int j = 0; j < n; ++j) {
      int best = -1, second = -1;
      double b1 = -1, b2 = -1;
      for (int i = 0; i < n; ++i) {
        if (L.column_of_label[i] >= 0) continue;
        double a = std::abs(e.vectors(i, j));
        if (a > b1) {
          second = best;
          b2 = b1;
          best = i;
          b1 = a;
        } else if (a > b2) {
          second = i;
          b2 = a;
        }
      }
      if (second >= 0 && b1 - b2 < ambiguity && b1 > 0)
        throw Error(Errc::AmbiguousLabeling, "eigenpair " + std::to_string(j) + " mixes labels (" +
                                                 std::to_string(box.label(best)[0]) + "," +
                                                 std::to_string(box.label(best)[1]) + ") and (" +
                                                 std::to_string(box.label(second)[0]) + "," +
                                                 std::to_string(box.label(second)[1]) + ")");
      L.column_of_label[best] = j;
      L.label_of_column[j] = best;
    }
  } catch (const Error&) {
    if (!allow_fallback) throw;
    L = Labeling{};
    L.fallback = true;
    L.column_of_label.assign(n, -1);
    L.label_of_column.assign(n, -1);
    // Ascending-order fallback: free energies |2 pi s|^2 sorted, ties lexicographic.
    std::vector<int> idx(n);
    for (int i = 0; i < n; ++i) idx[i] = i;
    auto free_energy = [&](int i) {
      Label s = box.label(i);
      return double(s[0]) * s[0] + double(s[1]) * s[1];
    };
    std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) { return free_energy(a) < free_energy(b); });
    for (int j = 0; j < n; ++j) {
      L.column_of_label[idx[j]] = j;
      L.label_of_column[j] = idx[j];
    }
  }
  return L;
}

// Gradient and Hessian of eigenvalue j in k (Hellmann-Feynman and its
// second-order perturbation formula).
struct EigenDerivatives {
  Vec2 grad{0, 0};
  std::array<double, 3> hess{0, 0, 0};  // kk11, kk12, kk22
};

inline EigenDerivatives eigen_derivatives(const EigenResult& e, int j, const Vec2& k, const TruncationBox& box,
                                          bool want_hessian = true) {
  int n = static_cast<int>(e.values.size());
  int d = box.d;
  std::vector<Eigen::VectorXd> dq(d, Eigen::VectorXd(n));
  for (int i = 0; i < n; ++i) {
    Label s = box.label(i);
    for (int a = 0; a < d; ++a) dq[a][i] = 2.0 * (k[a] + two_pi * s[a]);
  }
  EigenDerivatives r;
  auto cj = e.vectors.col(j);
  for (int a = 0; a < d; ++a) r.grad[a] = (cj.cwiseAbs2().array() * dq[a].array()).sum();
  if (!want_hessian) return r;
  // Matrix elements <c_m| dH/dk_a |c_j>.
  std::vector<VectorC> g(d);
  for (int a = 0; a < d; ++a) g[a] = e.vectors.adjoint() * (dq[a].cast<cplx>().asDiagonal() * cj);
  double h[2][2] = {{2.0, 0.0}, {0.0, 2.0}};
  for (int m = 0; m < n; ++m) {
    if (m == j) continue;
    double gap = e.values[j] - e.values[m];
    if (std::abs(gap) < 1e-12) continue;
    for (int a = 0; a < d; ++a)
      for (int b = a; b < d; ++b) h[a][b] += 2.0 * (std::conj(g[a][m]) * g[b][m]).real() / gap;
  }
  r.hess = {h[0][0], d == 2 ? h[0][1] : 0.0, d == 2 ? h[1][1] : 0.0};
  return r;
}

struct BlochEigenpair {
  Vec2 k{0, 0};
  Label s{0, 0};
  double lambda = 0;
  VectorC coeffs;
};

// All labelled eigenpairs at k.
inline std::vector<BlochEigenpair> bloch_eigenpairs(const PotentialSpec& pot, const Vec2& k, const TruncationBox& box,
                                                    bool allow_fallback = true) {
  EigenResult e = eigensolve(assemble(pot, k, box));
  Labeling L = label_extended_zone(e, box, allow_fallback);
  std::vector<BlochEigenpair> out(box.size());
  for (int i = 0; i < box.size(); ++i) {
    int j = L.column_of_label[i];
    out[i] = {k, box.label(i), e.values[j], e.vectors.col(j)};
  }
  return out;
}

inline cplx plane_wave_sum(const VectorC& c, const Vec2& k, const TruncationBox& box, const Vec2& x) {
  cplx acc = 0;
  for (int i = 0; i < box.size(); ++i) {
    if (c[i] == 0.0) continue;
    Label s = box.label(i);
    double ph = (k[0] + two_pi * s[0]) * x[0] + (box.d == 2 ? (k[1] + two_pi * s[1]) * x[1] : 0.0);
    acc += c[i] * std::exp(I * ph);
  }
  return acc;
}

struct GrowthFit {
  double c = 0, C = 0;
  int samples = 0;
  int violations = 0;
};

// Constants with c|s|^2 - C <= lambda_s(k) <= C|s|^2 + C over the interior labels
// at the sampled k. c is the best lower slope for a fixed offset.
inline GrowthFit growth_bounds_check(const PotentialSpec& pot, const std::vector<Vec2>& ks, const TruncationBox& box,
                                     int smax = -1) {
  if (smax < 0) smax = box.S - 1;
  struct Row {
    double s2, lam;
  };
  std::vector<std::vector<Row>> rows(ks.size());
  parallel_for(ks.size(), [&](std::size_t i) {
    auto pairs = bloch_eigenpairs(pot, ks[i], box);
    for (const auto& p : pairs) {
      if (box.max_norm(p.s) > smax) continue;
      double s2 = double(p.s[0]) * p.s[0] + double(p.s[1]) * p.s[1];
      rows[i].push_back({s2, p.lambda});
    }
  });
  GrowthFit f;
  double C = 1.0;
  for (auto& r : rows)
    for (auto& x : r) C = std::max({C, x.lam / (x.s2 + 1.0), -x.lam});
  double c = 1e300;
  for (auto& r : rows)
    for (auto& x : r) {
      ++f.samples;
      if (x.s2 > 0) c = std::min(c, (x.lam + C) / x.s2);
    }
  f.c = c == 1e300 ? 0.0 : c;
  f.C = C;
  for (auto& r : rows)
    for (auto& x : r)
      if (x.lam < f.c * x.s2 - f.C - 1e-9 || x.lam > f.C * x.s2 + f.C + 1e-9) ++f.violations;
  return f;
}

struct A3Row {
  Vec2 k;
  Label s;
  double ratio;  // sup |psi| / ||psi||_{L2(Omega)}
};

struct A3Report {
  std::vector<A3Row> rows;
  double max_ratio = 0;
  double growth_slope = 0;  // fit of log max-ratio against log(1+|s|)
  bool growing = false;
};

inline A3Report a3_check(const PotentialSpec& pot, const std::vector<Vec2>& ks, const TruncationBox& box, int smax,
                         int nx = 32) {
  std::vector<std::vector<A3Row>> rows(ks.size());
  parallel_for(ks.size(), [&](std::size_t i) {
    auto pairs = bloch_eigenpairs(pot, ks[i], box);
    for (const auto& p : pairs) {
      if (box.max_norm(p.s) > smax) continue;
      double sup = 0, l2 = p.coeffs.squaredNorm();
      int ny = box.d == 2 ? nx : 1;
      for (int a = 0; a < nx; ++a)
        for (int b = 0; b < ny; ++b) {
          Vec2 x{(a + 0.5) / nx, box.d == 2 ? (b + 0.5) / nx : 0.0};
          sup = std::max(sup, std::abs(plane_wave_sum(p.coeffs, p.k, box, x)));
        }
      rows[i].push_back({p.k, p.s, sup / std::sqrt(l2)});
    }
  });
  A3Report r;
  std::map<int, double> by_norm;
  for (auto& v : rows)
    for (auto& row : v) {
      r.rows.push_back(row);
      r.max_ratio = std::max(r.max_ratio, row.ratio);
      int m = box.max_norm(row.s);
      by_norm[m] = std::max(by_norm[m], row.ratio);
    }
  if (by_norm.size() >= 2) {
    std::vector<double> x, y;
    for (auto& [m, v] : by_norm) {
      x.push_back(std::log(1.0 + m));
      y.push_back(std::log(v));
    }
    r.growth_slope = fit_line(x, y).slope;
    r.growing = r.growth_slope > 0.1;
  }
  return r;
}

}  // namespace fbloch

#endif
