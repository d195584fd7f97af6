// Resolvent kernels of -Delta + V at frequency lambda: K^eps, the
// nonresonant/resonant split, the limits K_2^+-, K^+-, K*, and the dyadic
// shell pieces.
#ifndef FBLOCH_RESOLVENT_HPP
#define FBLOCH_RESOLVENT_HPP

#include "surface.hpp"

namespace fbloch {

struct ResolventConfig {
  double lambda = 5.0;
  double rho = 0;         // 0 selects the largest clean radius <= rho_max
  double rho_max = 0.5;
  int k_grid = 0;         // midpoint grid per axis; 0 picks it from eps and rho
  int labels = 8;         // label radius S of the k-sum
  int tail_labels = 32;   // V = 0 surrogate tail runs over S < |s|_inf <= this
  int tail_grid = 16;
  int tau_points = 129;
  double max_distance = 10;  // surface rules resolve |x - y| up to this
  double extract_step = 0.1;
};

struct KernelValue {
  Vec2 x{0, 0}, y{0, 0};
  cplx value = 0;
  cplx k1 = 0, k2 = 0;
  double error = 0;  // truncation tail estimate
  int shell = -1;
};

struct LimitValue {
  cplx plus = 0, minus = 0;  // K^+, K^-
  double kstar = 0;          // (1/2) Re(K^+ + K^-)
  cplx k1 = 0;               // K_1^0
  cplx k2_plus = 0, k2_minus = 0;
  double error = 0;
};

struct DecayFit {
  double slope = 0;
  double residual = 0;
  std::vector<double> sigma;
  std::vector<double> modulus;
};

// Dyadic max-norm shell of a lattice offset: 0 for |m|_inf <= 1, else the
// j with 2^{j-1} < |m|_inf <= 2^j.
inline int shell_index(const Label& m) {
  long n = std::max(std::abs(m[0]), std::abs(m[1]));
  if (n <= 1) return 0;
  int j = 1;
  while ((1L << j) < n) ++j;
  return j;
}

inline Label cell_of(const Vec2& x) {
  return {static_cast<int>(std::floor(x[0])), static_cast<int>(std::floor(x[1]))};
}

// K^{.,j}(x,y) = K(x,y) 1_{R_j}([x] - [y]).
inline KernelValue shell_restrict(const KernelValue& k, int j) {
  Label cx = cell_of(k.x), cy = cell_of(k.y);
  KernelValue out = k;
  out.shell = j;
  if (shell_index({cx[0] - cy[0], cx[1] - cy[1]}) != j) {
    out.value = out.k1 = out.k2 = 0;
    out.error = 0;
  }
  return out;
}

class Resolvent {
 public:
  Resolvent(const ExtendedZoneField& field, ResolventConfig cfg) : field_(field), cfg_(cfg) {
    require(cfg_.labels >= 1, "label radius must be >= 1");
    require(cfg_.tau_points >= 65, "tau grid needs >= 65 points");
    separable_ = dynamic_cast<const SeparableField*>(&field_);
    if (separable_) cfg_.labels = std::min(cfg_.labels, separable_->axis(0).S() - 1);
    else cfg_.labels = std::min(cfg_.labels, field_.label_radius());
    rho_ = cfg_.rho > 0 ? cfg_.rho : select_rho();
    chi_ = CutoffChi(rho_);
  }

  const ResolventConfig& config() const { return cfg_; }
  double rho() const { return rho_; }
  const CutoffChi& chi() const { return chi_; }
  double lambda() const { return cfg_.lambda; }

  // Grid size resolving both the eps-Lorentzian and the cutoff transition.
  int grid_for(double eps) const {
    if (cfg_.k_grid > 0) return cfg_.k_grid;
    double speed = 2 * std::sqrt(std::max(cfg_.lambda - field_.lambda_floor(), 1.0));
    double w = std::min(eps != 0 ? std::abs(eps) : INFINITY, rho_ / 4) / speed;
    int n = static_cast<int>(std::ceil(2 * two_pi / w));
    n += n % 2;
    return std::clamp(n, 64, 2048);
  }

  // K^eps = avg_B sum_s psi_s(x,k) conj(psi_s(y,k)) / (lambda_s(k) - lambda - i eps).
  KernelValue kernel_eps(const Vec2& x, const Vec2& y, double eps) const {
    if (eps == 0) throw Error(Errc::EpsilonZero, "kernel_eps needs eps != 0; use the limit operations");
    KernelValue v = kernel_split(x, y, eps);
    if (v.error > 0.1 * std::abs(v.value))
      throw Error(Errc::TailDominant, "truncation tail " + std::to_string(v.error) + " exceeds 10% of the kernel");
    return v;
  }

  // (K_1^eps, K_2^eps) with weights (1 - chi) and chi. eps = 0 gives K_1^0
  // only; K_2 is then left at zero.
  KernelValue kernel_split(const Vec2& x, const Vec2& y, double eps) const {
    int N = grid_for(eps);
    auto [k1, k2] = grid_sum(N, eps, x_side(x, N), x, y);
    KernelValue v;
    v.x = x;
    v.y = y;
    v.k1 = k1;
    v.k2 = eps == 0 ? cplx(0) : k2;
    v.value = v.k1 + v.k2;
    v.error = tail_estimate(x, y, eps);
    return v;
  }

  // K_2^+- = p.v. int chi(tau - lambda) a(tau)/(tau - lambda) dtau +- i pi a(lambda).
  cplx kernel_resonant_limit(const Vec2& x, const Vec2& y, int side) const {
    return plemelj_limit(density(x, y), cfg_.lambda, chi_, side);
  }

  // K_2^eps through the same tau-samples (coarea route).
  cplx kernel_resonant_eps(const Vec2& x, const Vec2& y, double eps) const {
    if (eps == 0) throw Error(Errc::EpsilonZero, "use kernel_resonant_limit for eps = 0");
    return plemelj_regularized(density(x, y), cfg_.lambda, chi_, eps > 0 ? 1 : -1, std::abs(eps));
  }

  // tau |-> a_{x,y}(tau) on the uniform tau-grid over [lambda - rho, lambda + rho].
  SampledDensity density(const Vec2& x, const Vec2& y,
                         const std::function<cplx(const Vec2&)>& g = nullptr) const {
    double dist = std::hypot(x[0] - y[0], x[1] - y[1]);
    const auto& rules = rules_for(dist);
    std::vector<cplx> v(rules.size());
    for (std::size_t i = 0; i < rules.size(); ++i)
      v[i] = g ? rules[i].integrate(x, y, g) : rules[i].integrate(x, y);
    return SampledDensity(cfg_.lambda, rho_, std::move(v));
  }

  LimitValue kernel_limit(const Vec2& x, const Vec2& y) const {
    KernelValue k1 = kernel_split(x, y, 0.0);
    SampledDensity a = density(x, y);
    LimitValue out;
    out.k1 = k1.k1;
    out.error = k1.error;
    out.k2_plus = plemelj_limit(a, cfg_.lambda, chi_, 1);
    out.k2_minus = plemelj_limit(a, cfg_.lambda, chi_, -1);
    out.plus = out.k1 + out.k2_plus;
    out.minus = out.k1 + out.k2_minus;
    out.kstar = 0.5 * (out.plus + out.minus).real();
    if (out.error > 0.1 * std::abs(out.plus))
      throw Error(Errc::TailDominant, "truncation tail exceeds 10% of K^+");
    return out;
  }

  // Log-log fit of |K_2^side(y + sigma v, y)| against sigma.
  DecayFit decay_fit(int side, const std::vector<double>& sigmas, const Vec2& v, const Vec2& y = {0.1, 0.2}) const {
    double n = std::hypot(v[0], v[1]);
    require(n > 0, "direction must be nonzero");
    DecayFit f;
    for (double s : sigmas) {
      Vec2 x{y[0] + s * v[0] / n, y[1] + s * v[1] / n};
      f.sigma.push_back(s);
      f.modulus.push_back(std::abs(kernel_resonant_limit(x, y, side)));
    }
    LineFit l = fit_loglog(f.sigma, f.modulus);
    f.slope = l.slope;
    f.residual = l.residual;
    return f;
  }

  // U(K_2^{eps,j}(., y))(x, l) = int chi/(tau - lambda - i eps)
  //   int_{F_tau} Psi(x,k) conj(Psi(y,k)) g_j(l - k)/(|B||grad Lambda|) dH dtau.
  // eps = 0 takes the limit from side `side`.
  cplx floquet_kernel_transform(int j, const Vec2& x, const Vec2& y, const Vec2& l, double eps, int side = 1) const {
    require(j >= 0 && j <= 12, "shell index out of range");
    double reach = std::hypot(x[0] - y[0], x[1] - y[1]) + std::sqrt(2.0) * (1L << (j + 1));
    auto g = [&](const Vec2& k) { return cplx(dirichlet_shell({l[0] - k[0], l[1] - k[1]}, j)); };
    SampledDensity b = density_reach(x, y, reach, g);
    if (eps == 0) return plemelj_limit(b, cfg_.lambda, chi_, side);
    return plemelj_regularized(b, cfg_.lambda, chi_, eps > 0 ? 1 : -1, std::abs(eps));
  }

  // The same quantity from its definition: sum_{n in R_j} e^{i<n,l>} K_2^eps(x - n, y).
  cplx floquet_kernel_transform_direct(int j, const Vec2& x, const Vec2& y, const Vec2& l, double eps) const {
    if (eps == 0) throw Error(Errc::EpsilonZero, "the direct route needs eps != 0");
    int N = grid_for(eps);
    long outer = 1L << j, inner = j >= 1 ? (1L << (j - 1)) : -1;
    if (separable_) {
      // The shell sum over n = (n1, n2) factors into box sums per axis.
      auto box = [&](long R) {
        std::array<std::vector<cplx>, 2> t;
        for (int a = 0; a < 2; ++a) {
          t[a].assign(static_cast<std::size_t>(N) * nlab(), 0);
          for (long n = -R; n <= R; ++n) {
            cplx ph = std::exp(I * (double(n) * l[a]));
            auto col = axis_values(a, x[a] - n, N);
            for (std::size_t p = 0; p < col.size(); ++p) t[a][p] += ph * col[p];
          }
        }
        return t;
      };
      auto full = box(outer);
      cplx total = separable_sum(N, eps, full, {axis_values(0, y[0], N), axis_values(1, y[1], N)}).second;
      if (inner >= 0) {
        auto in = box(inner);
        total -= separable_sum(N, eps, in, {axis_values(0, y[0], N), axis_values(1, y[1], N)}).second;
      }
      return total;
    }
    cplx total = 0;
    for (long n1 = -outer; n1 <= outer; ++n1)
      for (long n2 = -outer; n2 <= outer; ++n2) {
        if (std::max(std::abs(n1), std::abs(n2)) <= inner) continue;
        Vec2 xs{x[0] - n1, x[1] - n2};
        total += std::exp(I * (n1 * l[0] + n2 * l[1])) * kernel_split(xs, y, eps).k2;
      }
    return total;
  }

  // Surfaces on the tau-grid, extracted once.
  const std::vector<FermiSurface>& surfaces() const {
    std::lock_guard<std::mutex> lk(cache_->m);
    if (cache_->surfaces.empty()) {
      for (int i = 0; i < cfg_.tau_points; ++i) {
        double tau = tau_at(i);
        FermiSurface s = extract(field_, tau, {.step = cfg_.extract_step});
        check_surface(s);
        cache_->surfaces.push_back(std::move(s));
      }
    }
    return cache_->surfaces;
  }

  double tau_at(int i) const { return cfg_.lambda - rho_ + 2.0 * rho_ * i / (cfg_.tau_points - 1); }

 private:
  using AxisTable = std::array<std::vector<cplx>, 2>;

  int nlab() const { return 2 * cfg_.labels + 1; }

  static void check_surface(const FermiSurface& s) {
    if (s.empty()) throw Error(Errc::EmptyLevelSet, "empty Fermi surface at tau = " + std::to_string(s.tau));
    if (s.irregular) throw Error(Errc::IrregularFrequency, "irregular Fermi surface at tau = " + std::to_string(s.tau));
    auto r = curvature_check(s);
    if (r.skipped > 0 || !(r.min_curvature > 0))
      throw Error(Errc::CurvatureVanishes, "Fermi surface at tau = " + std::to_string(s.tau) +
                                               " is not positively curved (min " + std::to_string(r.min_curvature) +
                                               ", " + std::to_string(r.skipped) + " gap vertices)");
  }

  // Largest rho = rho_max 2^{-i} whose probe surfaces extract cleanly with
  // |grad Lambda| > 1e-3 and curvature > 1e-3.
  double select_rho() const {
    std::optional<A2Window> window;
    if (separable_ && !(separable_->axis(0).constant() && separable_->axis(1).constant()))
      window = a2_window(Hill1D(separable_->axis(0).potential(), 2), Hill1D(separable_->axis(1).potential(), 2));
    std::string last;
    for (double rho = cfg_.rho_max; rho > 1e-3; rho *= 0.5) {
      if (window && (cfg_.lambda - rho <= window->lo || cfg_.lambda + rho >= window->hi)) {
        last = "window";
        continue;
      }
      bool ok = true;
      for (double f : {-1.0, -0.5, 0.0, 0.5, 1.0}) {
        try {
          FermiSurface s = extract(field_, cfg_.lambda + f * rho, {.step = cfg_.extract_step});
          check_surface(s);
          for (const auto& c : s.components)
            for (const auto& v : c.vertices) ok &= v.grad_norm > 1e-3 && v.curvature > 1e-3;
        } catch (const Error& e) {
          last = e.what();
          ok = false;
        }
        if (!ok) break;
      }
      if (ok) return rho;
    }
    throw Error(Errc::IrregularFrequency, "no cutoff radius with clean Fermi surfaces near lambda (" + last + ")");
  }

  const std::vector<SurfaceRule>& rules_for(double dist) const { return rules_reach(std::max(dist, cfg_.max_distance)); }

  SampledDensity density_reach(const Vec2& x, const Vec2& y, double reach,
                               const std::function<cplx(const Vec2&)>& g) const {
    const auto& rules = rules_reach(reach);
    std::vector<cplx> v(rules.size());
    for (std::size_t i = 0; i < rules.size(); ++i) v[i] = rules[i].integrate(x, y, g);
    return SampledDensity(cfg_.lambda, rho_, std::move(v));
  }

  // Rules on every tau-grid surface, resolving phases up to |x - y| = reach.
  // The refinement level is settled on three surfaces and reused.
  const std::vector<SurfaceRule>& rules_reach(double reach) const {
    const auto& surf = surfaces();
    std::lock_guard<std::mutex> lk(cache_->m);
    if (!cache_->rules.empty() && cache_->reach >= reach) return cache_->rules;
    double D = std::max(reach, cache_->reach * 2);
    std::vector<std::pair<Vec2, Vec2>> probes = {
        {{0, 0}, {D, 0}}, {{0, 0}, {0, D}}, {{0, 0}, {D / std::sqrt(2.0), D / std::sqrt(2.0)}}, {{0.3, 0.7}, {0.3, 0.7}}};
    int level = 0;
    for (int i : {0, (cfg_.tau_points - 1) / 2, cfg_.tau_points - 1})
      level = std::max(level, surface_rule(field_, surf[i], probes).level);
    std::vector<SurfaceRule> rules(surf.size());
    for (std::size_t i = 0; i < surf.size(); ++i) rules[i] = surface_rule_at(field_, surf[i], level, D);
    cache_->rules = std::move(rules);
    cache_->reach = D;
    return cache_->rules;
  }

  // Per-axis Bloch values phi_{s}(x_a, k_i), laid out [i * nlab + (s + S)].
  std::vector<cplx> axis_values(int a, double xa, int N) const {
    const Band1D& b = separable_->axis(a);
    int S = cfg_.labels;
    std::vector<cplx> out(static_cast<std::size_t>(N) * nlab());
    for (int i = 0; i < N; ++i) {
      auto lv = b.levels(-pi + (i + 0.5) * two_pi / N);
      for (int s = -S; s <= S; ++s) {
        cplx acc = 0;
        for (auto& [q, c] : lv[s + b.S()].wave) acc += c * std::exp(I * (q * xa));
        out[static_cast<std::size_t>(i) * nlab() + s + S] = acc;
      }
    }
    return out;
  }

  std::vector<double> axis_energies(int a, int N) const {
    const Band1D& b = separable_->axis(a);
    int S = cfg_.labels;
    std::vector<double> out(static_cast<std::size_t>(N) * nlab());
    for (int i = 0; i < N; ++i) {
      auto lv = b.levels(-pi + (i + 0.5) * two_pi / N);
      for (int s = -S; s <= S; ++s) out[static_cast<std::size_t>(i) * nlab() + s + S] = lv[s + b.S()].E;
    }
    return out;
  }

  AxisTable x_side(const Vec2& x, int N) const {
    if (!separable_) return {};
    return {axis_values(0, x[0], N), axis_values(1, x[1], N)};
  }

  // Splits 1/(E - lambda - i eps) into (1 - chi) and chi parts.
  std::pair<cplx, cplx> weights(double E, double eps) const {
    double t = E - cfg_.lambda;
    double c = chi_(t);
    cplx w = eps == 0 ? cplx(t == 0 ? 0.0 : 1.0 / t) : cplx(t, eps) / (t * t + eps * eps);
    return {(1 - c) * w, c * w};
  }

  std::pair<cplx, cplx> separable_sum(int N, double eps, const AxisTable& X, const AxisTable& Y) const {
    std::vector<double> E1 = axis_energies(0, N), E2 = axis_energies(1, N);
    std::size_t M = E1.size();
    std::vector<cplx> A1(M), A2(M);
    for (std::size_t p = 0; p < M; ++p) {
      A1[p] = X[0][p] * std::conj(Y[0][p]);
      A2[p] = X[1][p] * std::conj(Y[1][p]);
    }
    double lo = cfg_.lambda - rho_, hi = cfg_.lambda + rho_, inner_lo = cfg_.lambda - 0.5 * rho_,
           inner_hi = cfg_.lambda + 0.5 * rho_;
    cplx k1 = 0, k2 = 0;
    for (std::size_t q = 0; q < M; ++q) {
      cplx a1 = 0, a2 = 0;
      for (std::size_t p = 0; p < M; ++p) {
        double E = E1[p] + E2[q], t = E - cfg_.lambda;
        cplx w;
        if (eps == 0) {
          w = 1.0 / t;
        } else {
          double den = 1.0 / (t * t + eps * eps);
          w = cplx(t * den, eps * den);
        }
        if (E <= lo || E >= hi) {
          a1 += A1[p] * w;
        } else if (E >= inner_lo && E <= inner_hi) {
          a2 += A1[p] * w;
        } else {
          double c = chi_(t);
          a1 += (1 - c) * A1[p] * w;
          a2 += c * A1[p] * w;
        }
      }
      k1 += a1 * A2[q];
      k2 += a2 * A2[q];
    }
    double norm = 1.0 / (double(N) * N);
    return {k1 * norm, k2 * norm};
  }

  std::pair<cplx, cplx> grid_sum(int N, double eps, const AxisTable& X, const Vec2& x, const Vec2& y) const {
    if (separable_) return separable_sum(N, eps, X, {axis_values(0, y[0], N), axis_values(1, y[1], N)});
    int S = cfg_.labels;
    std::vector<std::pair<cplx, cplx>> part(static_cast<std::size_t>(N) * N);
    parallel_for(part.size(), [&](std::size_t idx) {
      Vec2 k{-pi + (idx / N + 0.5) * two_pi / N, -pi + (idx % N + 0.5) * two_pi / N};
      cplx a = 0, b = 0;
      for (int s1 = -S; s1 <= S; ++s1)
        for (int s2 = -S; s2 <= S; ++s2) {
          BlochState st = field_.state({k[0] + two_pi * s1, k[1] + two_pi * s2}, true);
          auto [w1, w2] = weights(st.lambda, eps);
          cplx p = st.psi(x) * std::conj(st.psi(y));
          a += w1 * p;
          b += w2 * p;
        }
      part[idx] = {a, b};
    });
    cplx k1 = 0, k2 = 0;
    for (auto& [a, b] : part) {
      k1 += a;
      k2 += b;
    }
    double norm = 1.0 / (double(N) * N);
    return {k1 * norm, k2 * norm};
  }

  // V = 0 surrogate of the labels outside the box.
  double tail_estimate(const Vec2& x, const Vec2& y, double eps) const {
    int N = cfg_.tail_grid, S = cfg_.labels, T = std::max(cfg_.tail_labels, S + 1);
    Vec2 d{x[0] - y[0], x[1] - y[1]};
    cplx acc = 0;
    for (int i = 0; i < N; ++i)
      for (int j = 0; j < N; ++j) {
        Vec2 k{-pi + (i + 0.5) * two_pi / N, -pi + (j + 0.5) * two_pi / N};
        for (int s1 = -T; s1 <= T; ++s1)
          for (int s2 = -T; s2 <= T; ++s2) {
            if (std::max(std::abs(s1), std::abs(s2)) <= S) continue;
            double q1 = k[0] + two_pi * s1, q2 = k[1] + two_pi * s2;
            acc += std::exp(I * (q1 * d[0] + q2 * d[1])) / cplx(q1 * q1 + q2 * q2 - cfg_.lambda, -eps);
          }
      }
    return std::abs(acc) / (double(N) * N);
  }

  const ExtendedZoneField& field_;
  ResolventConfig cfg_;
  const SeparableField* separable_ = nullptr;
  double rho_ = 0;
  CutoffChi chi_;
  struct Cache {
    std::mutex m;
    std::vector<FermiSurface> surfaces;
    std::vector<SurfaceRule> rules;
    double reach = 0;
  };
  std::shared_ptr<Cache> cache_ = std::make_shared<Cache>();
};

}  // namespace fbloch

#endif
