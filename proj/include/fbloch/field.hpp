#ifndef FBLOCH_FIELD_HPP
#define FBLOCH_FIELD_HPP

#include <memory>
#include <mutex>
#include <unordered_map>

#include "planewave.hpp"

namespace fbloch {

// Extended-zone data at one momentum kappa = k + 2 pi s.
struct BlochState {
  Vec2 kappa{0, 0}, k{0, 0};
  Label s{0, 0};
  double lambda = 0;
  Vec2 grad{0, 0};
  std::array<double, 3> hess{0, 0, 0};  // 11, 12, 22
  // Wavefunction: product of per-axis sums, or one 2D sum.
  bool separable = false;
  std::array<std::vector<std::pair<double, cplx>>, 2> axis;
  std::vector<std::pair<Vec2, cplx>> terms;

  cplx psi(const Vec2& x) const {
    if (separable) {
      cplx a = 0, b = 0;
      for (auto& [q, c] : axis[0]) a += c * std::exp(I * (q * x[0]));
      for (auto& [q, c] : axis[1]) b += c * std::exp(I * (q * x[1]));
      return a * b;
    }
    cplx acc = 0;
    for (auto& [q, c] : terms) acc += c * std::exp(I * (q[0] * x[0] + q[1] * x[1]));
    return acc;
  }
  double grad_norm() const { return std::hypot(grad[0], grad[1]); }
  // Curvature of the level set through kappa (level-set formula).
  double curvature() const {
    double gx = grad[0], gy = grad[1];
    double g = std::hypot(gx, gy);
    return (hess[0] * gy * gy - 2 * hess[1] * gx * gy + hess[2] * gx * gx) / (g * g * g);
  }
};

inline void split_momentum(double kappa, double& k, int& s) {
  k = wrap_to_zone(kappa);
  s = static_cast<int>(std::lround((kappa - k) / two_pi));
}

class ExtendedZoneField {
 public:
  virtual ~ExtendedZoneField() = default;
  virtual BlochState state(const Vec2& kappa, bool with_psi = true) const = 0;
  virtual double lambda(const Vec2& kappa) const { return state(kappa, false).lambda; }
  // lambda_s(k) for every label the field resolves at k.
  virtual std::vector<std::pair<Label, double>> band_values(const Vec2& k) const = 0;
  // Largest max-norm label that is trusted.
  virtual int label_radius() const = 0;
  // Lower bound for Lambda, used to size extraction windows.
  virtual double lambda_floor() const = 0;
  virtual std::string describe() const = 0;

  std::pair<double, cplx> evaluate(const Vec2& x, const Vec2& kappa) const {
    BlochState st = state(kappa, true);
    return {st.lambda, st.psi(x)};
  }
  void check_region(const Vec2& kappa) const {
    for (double c : kappa) {
      double k;
      int s;
      split_momentum(c, k, s);
      if (std::abs(s) > label_radius())
        throw Error(Errc::OutsideSampledRegion, "momentum " + std::to_string(c) + " beyond label radius " +
                                                    std::to_string(label_radius()));
    }
  }
};

// One-dimensional extended-zone band data from a Galerkin solve, exact for
// constant potentials.
class Band1D {
 public:
  struct Level {
    double E = 0, dE = 0, d2E = 0;
    std::vector<std::pair<double, cplx>> wave;  // (k + 2 pi s', c_{s'})
  };

  Band1D(Potential1D pot, int S = 16) : pot_(std::move(pot)), box_(1, S) {
    constant_ = pot_.is_constant();
    mu_ = pot_.cells()[0].value;
    if (!constant_)
      for (int n = -2 * S; n <= 2 * S; ++n) vhat_.push_back(pot_.fourier(n));
  }

  const Potential1D& potential() const { return pot_; }
  int S() const { return box_.S; }
  bool constant() const { return constant_; }

  // Levels at k for labels -S..S (index s + S).
  std::vector<Level> levels(double k) const {
    std::vector<Level> out(box_.size());
    if (constant_) {
      for (int i = 0; i < box_.size(); ++i) {
        double q = k + two_pi * box_.label(i)[0];
        out[i] = {q * q + mu_, 2 * q, 2.0, {{q, 1.0}}};
      }
      return out;
    }
    {
      std::lock_guard<std::mutex> lk(cache_->m);
      auto it = cache_->map.find(k);
      if (it != cache_->map.end()) return it->second;
    }
    int n = box_.size(), S = box_.S;
    MatrixC H(n, n);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) H(i, j) = vhat_[i - j + 2 * S];
      double q = k + two_pi * (i - S);
      H(i, i) += q * q;
    }
    EigenResult e = eigensolve(H);
    Labeling L = label_extended_zone(e, box_, true);
    for (int i = 0; i < box_.size(); ++i) {
      int j = L.column_of_label[i];
      EigenDerivatives dv = eigen_derivatives(e, j, {k, 0.0}, box_);
      Level& lv = out[i];
      lv.E = e.values[j];
      lv.dE = dv.grad[0];
      lv.d2E = dv.hess[0];
      for (int t = 0; t < box_.size(); ++t) {
        cplx c = e.vectors(t, j);
        if (std::abs(c) < 1e-15) continue;
        lv.wave.push_back({k + two_pi * box_.label(t)[0], c});
      }
      // Phase gauge: dominant coefficient real positive.
      cplx dom = e.vectors(i, j);
      cplx ph = std::abs(dom) > 0 ? std::conj(dom) / std::abs(dom) : cplx(1);
      for (auto& w : lv.wave) w.second *= ph;
    }
    std::lock_guard<std::mutex> lk(cache_->m);
    if (cache_->map.size() > 8192) cache_->map.clear();
    cache_->map.emplace(k, out);
    return out;
  }

  Level level(double kappa) const {
    double k;
    int s;
    split_momentum(kappa, k, s);
    if (constant_) {
      return {kappa * kappa + mu_, 2 * kappa, 2.0, {{kappa, 1.0}}};
    }
    if (std::abs(s) > box_.S - 1)
      throw Error(Errc::OutsideSampledRegion, "1D label beyond the truncation interior");
    return levels(k)[s + box_.S];
  }

  double floor() const { return constant_ ? mu_ : pot_.min_value(); }

 private:
  Potential1D pot_;
  TruncationBox box_;
  bool constant_ = false;
  double mu_ = 0;
  std::vector<cplx> vhat_;
  struct Cache {
    std::mutex m;
    std::unordered_map<double, std::vector<Level>> map;
  };
  std::shared_ptr<Cache> cache_ = std::make_shared<Cache>();
};

// Lambda(kappa) = Lambda_1(kappa_1) + Lambda_2(kappa_2) for V = V1(x1) + V2(x2).
class SeparableField : public ExtendedZoneField {
 public:
  SeparableField(Potential1D v1, Potential1D v2, int S = 16) : a_(std::move(v1), S), b_(std::move(v2), S) {}

  static SeparableField free(double mu1 = 0, double mu2 = 0) {
    return SeparableField(Potential1D::constant(mu1), Potential1D::constant(mu2));
  }

  const Band1D& axis(int i) const { return i == 0 ? a_ : b_; }

  BlochState state(const Vec2& kappa, bool with_psi = true) const override {
    Band1D::Level la = a_.level(kappa[0]), lb = b_.level(kappa[1]);
    BlochState st;
    st.kappa = kappa;
    split_momentum(kappa[0], st.k[0], st.s[0]);
    split_momentum(kappa[1], st.k[1], st.s[1]);
    st.lambda = la.E + lb.E;
    st.grad = {la.dE, lb.dE};
    st.hess = {la.d2E, 0.0, lb.d2E};
    st.separable = true;
    if (with_psi) {
      st.axis[0] = std::move(la.wave);
      st.axis[1] = std::move(lb.wave);
    }
    return st;
  }

  std::vector<std::pair<Label, double>> band_values(const Vec2& k) const override {
    auto la = a_.levels(k[0]), lb = b_.levels(k[1]);
    int S = a_.S();
    std::vector<std::pair<Label, double>> out;
    for (int i = 1; i + 1 < static_cast<int>(la.size()); ++i)
      for (int j = 1; j + 1 < static_cast<int>(lb.size()); ++j)
        out.push_back({{i - S, j - b_.S()}, la[i].E + lb[j].E});
    return out;
  }

  int label_radius() const override {
    return (a_.constant() && b_.constant()) ? 1 << 20 : std::min(a_.S(), b_.S()) - 1;
  }
  double lambda_floor() const override { return a_.floor() + b_.floor(); }
  std::string describe() const override {
    return std::string("separable(") + (a_.constant() ? "const" : "galerkin") + "," +
           (b_.constant() ? "const" : "galerkin") + ")";
  }

 private:
  Band1D a_, b_;
};

// General 2D Fourier potential, plane-wave Galerkin at each k.
class GalerkinField : public ExtendedZoneField {
 public:
  GalerkinField(PotentialSpec pot, int S = 12) : pot_(std::move(pot)), box_(2, S) {
    require(pot_.d == 2, "GalerkinField needs a 2D potential");
  }

  const TruncationBox& box() const { return box_; }
  const PotentialSpec& potential() const { return pot_; }
  int fallbacks() const { return fallbacks_; }

  BlochState state(const Vec2& kappa, bool with_psi = true) const override {
    check_region(kappa);
    BlochState st;
    st.kappa = kappa;
    split_momentum(kappa[0], st.k[0], st.s[0]);
    split_momentum(kappa[1], st.k[1], st.s[1]);
    auto sol = solve(st.k);
    int j = sol->L.column_of_label[box_.index(st.s)];
    st.lambda = sol->e.values[j];
    EigenDerivatives dv = eigen_derivatives(sol->e, j, st.k, box_);
    st.grad = dv.grad;
    st.hess = dv.hess;
    if (with_psi) {
      cplx dom = sol->e.vectors(box_.index(st.s), j);
      cplx ph = std::abs(dom) > 0 ? std::conj(dom) / std::abs(dom) : cplx(1);
      for (int t = 0; t < box_.size(); ++t) {
        cplx c = sol->e.vectors(t, j);
        if (std::abs(c) < 1e-15) continue;
        Label u = box_.label(t);
        st.terms.push_back({{st.k[0] + two_pi * u[0], st.k[1] + two_pi * u[1]}, c * ph});
      }
    }
    return st;
  }

  double lambda(const Vec2& kappa) const override {
    check_region(kappa);
    Vec2 k;
    Label s;
    split_momentum(kappa[0], k[0], s[0]);
    split_momentum(kappa[1], k[1], s[1]);
    auto sol = solve(k);
    return sol->e.values[sol->L.column_of_label[box_.index(s)]];
  }

  std::vector<std::pair<Label, double>> band_values(const Vec2& k) const override {
    auto sol = solve(k);
    std::vector<std::pair<Label, double>> out;
    for (int i = 0; i < box_.size(); ++i) {
      Label s = box_.label(i);
      if (!box_.interior(s)) continue;
      out.push_back({s, sol->e.values[sol->L.column_of_label[i]]});
    }
    return out;
  }

  int label_radius() const override { return box_.S - 1; }
  double lambda_floor() const override {
    double m = 0;
    for (auto& [n, v] : pot_.coeffs) m += std::abs(v);
    return -m;
  }
  std::string describe() const override { return "galerkin(S=" + std::to_string(box_.S) + ")"; }

 private:
  struct Solution {
    EigenResult e;
    Labeling L;
  };

  std::shared_ptr<const Solution> solve(const Vec2& k) const {
    auto key = std::make_pair(k[0], k[1]);
    {
      std::lock_guard<std::mutex> lk(m_);
      auto it = cache_.find(key);
      if (it != cache_.end()) return it->second;
    }
    auto sol = std::make_shared<Solution>();
    sol->e = eigensolve(assemble(pot_, k, box_));
    sol->L = label_extended_zone(sol->e, box_, true);
    std::lock_guard<std::mutex> lk(m_);
    if (sol->L.fallback) ++fallbacks_;
    if (cache_.size() > 64) cache_.clear();
    cache_.emplace(key, sol);
    return sol;
  }

  PotentialSpec pot_;
  TruncationBox box_;
  mutable std::mutex m_;
  mutable std::map<std::pair<double, double>, std::shared_ptr<const Solution>> cache_;
  mutable int fallbacks_ = 0;
};

// Field for a potential spec: separable specs get the fast tensor field.
inline std::unique_ptr<ExtendedZoneField> make_field(const PotentialSpec& pot, int S) {
  require(pot.d == 2, "fields are two-dimensional");
  if (pot.mode == PotentialSpec::Mode::Separable)
    return std::make_unique<SeparableField>(pot.parts[0], pot.parts[1], std::max(S, 8));
  if (pot.is_zero()) return std::make_unique<SeparableField>(SeparableField::free());
  return std::make_unique<GalerkinField>(pot, S);
}

}  // namespace fbloch

#endif
