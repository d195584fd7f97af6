// fbloch: command-line front end.
//
//   fbloch bands   --potential mathieu.json --d 1
//   fbloch fermi   --config configs/figure1.json
//   fbloch kernel  --potential v0.json --eps 0.1,0.05,0 --sigma 5,10,20,40
//   fbloch verify | farfield | nlh_geometry
//
// Exit codes: 0 success, 1 internal error, 2 invalid input.

#include <iostream>
#include <random>

#include "CLI11.hpp"
#include "fbloch/io.hpp"
#include "fbloch/resolvent.hpp"

using namespace fbloch;

namespace {

// ---------------------------------------------------------------------------
// bands

json gap_report(const std::vector<std::pair<double, double>>& ranges) {
  json gaps = json::array();
  for (std::size_t n = 0; n + 1 < ranges.size(); ++n)
    if (ranges[n].second < ranges[n + 1].first)
      gaps.push_back({{"below_band", n + 1}, {"lo", ranges[n].second}, {"hi", ranges[n + 1].first}});
  json bands = json::array();
  for (std::size_t n = 0; n < ranges.size(); ++n)
    bands.push_back({{"band", n + 1}, {"lo", ranges[n].first}, {"hi", ranges[n].second}});
  return {{"bands", bands}, {"gaps", gaps}};
}

std::vector<double> k_axis(int n) {
  std::vector<double> k(n);
  for (int i = 0; i < n; ++i) k[i] = -pi + 2 * pi * i / (n - 1);
  return k;
}

// Returns {csv, report}.
std::pair<std::string, json> compute_bands_1d(const RunConfig& cfg) {
  Hill1D h(to_potential1d(cfg.potential), cfg.bands);
  auto ks = k_axis(cfg.k_grid);
  int L = std::min(cfg.bands, h.band_count());
  Csv csv({"k", "band", "E"});
  for (double k : ks)
    for (int l = 1; l <= L; ++l) csv.row(k, l, h.band_value(l, k));
  Csv edges({"band", "lo", "hi", "E_at_0", "E_at_pi"});
  std::vector<std::pair<double, double>> ranges;
  for (const auto& b : h.bands()) {
    edges.row(b.l, b.lo, b.hi, b.at0, b.atpi);
    ranges.push_back({b.lo, b.hi});
  }
  json report = gap_report(ranges);
  report["d"] = 1;
  report["interlacing"] = h.interlacing_holds();
  report["edges_csv"] = edges.str();
  return {csv.str(), report};
}

std::pair<std::string, json> compute_bands_2d(const RunConfig& cfg) {
  PotentialSpec pot = parse_potential(cfg.potential);
  require(pot.d == 2, "a d = 2 run needs a two-dimensional potential");
  TruncationBox box(2, cfg.S);
  auto ax = k_axis(cfg.k_grid);
  std::size_t nk = ax.size() * ax.size();
  std::vector<std::vector<BlochEigenpair>> pairs(nk);
  std::vector<std::vector<double>> lowest(nk);
  parallel_for(nk, [&](std::size_t i) {
    Vec2 k{ax[i / ax.size()], ax[i % ax.size()]};
    pairs[i] = bloch_eigenpairs(pot, k, box);
    std::vector<double> v;
    for (const auto& p : pairs[i]) v.push_back(p.lambda);
    std::sort(v.begin(), v.end());
    v.resize(std::min<std::size_t>(v.size(), cfg.bands));
    lowest[i] = std::move(v);
  });
  Csv csv({"k1", "k2", "s1", "s2", "lambda"});
  double free_dev = 0;
  for (const auto& row : pairs)
    for (const auto& p : row) {
      if (!box.interior(p.s)) continue;
      csv.row(p.k[0], p.k[1], p.s[0], p.s[1], p.lambda);
      double a = p.k[0] + 2 * pi * p.s[0], b = p.k[1] + 2 * pi * p.s[1];
      free_dev = std::max(free_dev, std::abs(p.lambda - (a * a + b * b)));
    }
  std::vector<std::pair<double, double>> ranges(cfg.bands, {INFINITY, -INFINITY});
  for (const auto& v : lowest)
    for (std::size_t n = 0; n < v.size(); ++n) {
      ranges[n].first = std::min(ranges[n].first, v[n]);
      ranges[n].second = std::max(ranges[n].second, v[n]);
    }
  json report = gap_report(ranges);
  report["d"] = 2;
  report["note"] = "band ranges sampled on the k grid; gaps are upper bounds on the true gaps";
  if (pot.is_zero()) report["max_deviation_from_free"] = free_dev;
  return {csv.str(), report};
}

void cmd_bands(const RunConfig& cfg, RunWriter& w) {
  auto compute = [&] { return cfg.d == 1 ? compute_bands_1d(cfg) : compute_bands_2d(cfg); };
  std::pair<std::string, json> res;
  if (cfg.cache.empty()) {
    res = compute();
  } else {
    std::string key = std::string(version) + "|" + cfg.potential.dump() + "|" + std::to_string(cfg.d) + "|" +
                      std::to_string(cfg.S) + "|" + std::to_string(cfg.k_grid) + "|" + std::to_string(cfg.bands);
    fs::path file = fs::path(cfg.cache) / ("bands-" + hex(fnv1a(key)) + ".json");
    bool hit = false;
    if (fs::exists(file)) {
      try {
        json c = read_json_file(file);
        if (c.value("key", "") == key) {
          res = {c.at("csv").get<std::string>(), c.at("report")};
          hit = true;
        }
      } catch (const std::exception&) {
        hit = false;  // unreadable entries are recomputed
      }
    }
    if (!hit) {
      res = compute();
      write_atomic(file, json{{"key", key}, {"csv", res.first}, {"report", res.second}}.dump() + "\n");
    }
    w.note("cache", {{"file", file.string()}, {"hit", hit}});
  }
  if (cfg.wants("csv")) {
    w.add("bands.csv", res.first);
    if (res.second.contains("edges_csv")) w.add("band_edges.csv", res.second["edges_csv"].get<std::string>());
  }
  res.second.erase("edges_csv");
  if (cfg.wants("json")) w.add_json("bands_report.json", res.second);
  if (cfg.d == 1 && !res.second.value("interlacing", true))
    std::cerr << "warning: interlacing chain violated\n";
}

// ---------------------------------------------------------------------------
// fermi

void cmd_fermi(const RunConfig& cfg, RunWriter& w) {
  auto field = make_field(parse_potential(cfg.potential), cfg.S);
  std::vector<FermiSurface> surfaces(cfg.tau.size());
  ExtractOptions opt{.step = cfg.step, .grad_threshold = cfg.grad_threshold};
  for (std::size_t i = 0; i < cfg.tau.size(); ++i) surfaces[i] = extract(*field, cfg.tau[i], opt);
  Csv csv({"tau", "component", "k1", "k2", "nu1", "nu2", "grad_norm", "curvature", "bragg"});
  json reports = json::array();
  for (const auto& s : surfaces) {
    for (std::size_t c = 0; c < s.components.size(); ++c)
      for (const auto& v : s.components[c].vertices)
        csv.row(s.tau, c, v.kappa[0], v.kappa[1], v.normal[0], v.normal[1], v.grad_norm, v.curvature,
                v.bragg ? 1 : 0);
    json r = {{"tau", s.tau},
              {"empty", s.empty()},
              {"components", s.components.size()},
              {"vertices", s.vertex_count()},
              {"irregular", s.irregular},
              {"bragg_vertices", s.bragg_vertices},
              {"max_residual", s.max_residual},
              {"warnings", s.warnings}};
    json closed = json::array();
    for (const auto& c : s.components) closed.push_back(c.closed);
    r["closed"] = closed;
    if (s.irregular) {
      // Report the vertex with the smallest gradient as the witness.
      const FermiVertex* worst = nullptr;
      for (const auto& c : s.components)
        for (const auto& v : c.vertices)
          if (!worst || v.grad_norm < worst->grad_norm) worst = &v;
      if (worst) r["witness"] = {{"kappa", vec_json(worst->kappa)}, {"grad_norm", worst->grad_norm}};
      std::cerr << "warning: irregular frequency tau = " << s.tau << "\n";
    } else if (!s.empty()) {
      auto cr = curvature_check(s);
      r["curvature"] = {{"min", cr.min_curvature},
                        {"max", cr.max_curvature},
                        {"positive", cr.positive},
                        {"witness", vec_json(cr.witness)},
                        {"skipped_bragg", cr.skipped}};
      auto red = reduce_zone(s);
      r["reduced_zone_pieces"] = red.component_count();
    }
    reports.push_back(r);
  }
  if (cfg.wants("csv")) w.add("fermi.csv", csv.str());
  if (cfg.wants("svg")) w.add("fermi.svg", surfaces_svg(surfaces));
  if (cfg.wants("json")) w.add_json("fermi_report.json", {{"surfaces", reports}});
}

// ---------------------------------------------------------------------------
// kernel

Vec2 unit(const Vec2& v) {
  double n = std::hypot(v[0], v[1]);
  return {v[0] / n, v[1] / n};
}

void cmd_kernel(const RunConfig& cfg, RunWriter& w) {
  auto field = make_field(parse_potential(cfg.potential), cfg.S);
  ResolventConfig rc;
  rc.lambda = cfg.lambda;
  rc.rho = cfg.rho;
  rc.rho_max = cfg.rho_max;
  rc.labels = cfg.labels;
  rc.extract_step = cfg.step;
  double reach = 10;
  for (double r : cfg.distance) reach = std::max(reach, r + 1);
  for (double s : cfg.sigma) reach = std::max(reach, s + 1);
  rc.max_distance = reach;
  Resolvent res(*field, rc);
  Vec2 v = unit(cfg.direction), y = cfg.y;

  Csv csv({"eps", "x1", "x2", "y1", "y2", "re", "im", "re_K1", "im_K1", "re_K2", "im_K2", "err"});
  Csv lim({"x1", "x2", "y1", "y2", "re_plus", "im_plus", "re_minus", "im_minus", "kstar", "re_K1", "im_K1",
           "re_K2_plus", "im_K2_plus", "re_K2_minus", "im_K2_minus", "err"});
  bool any_limit = false;
  for (double eps : cfg.eps)
    for (double r : cfg.distance) {
      Vec2 x{y[0] + r * v[0], y[1] + r * v[1]};
      if (eps == 0) {
        any_limit = true;
        auto L = res.kernel_limit(x, y);
        lim.row(x[0], x[1], y[0], y[1], L.plus.real(), L.plus.imag(), L.minus.real(), L.minus.imag(), L.kstar,
                L.k1.real(), L.k1.imag(), L.k2_plus.real(), L.k2_plus.imag(), L.k2_minus.real(), L.k2_minus.imag(),
                L.error);
      } else {
        auto K = res.kernel_split(x, y, eps);
        csv.row(eps, x[0], x[1], y[0], y[1], K.value.real(), K.value.imag(), K.k1.real(), K.k1.imag(), K.k2.real(),
                K.k2.imag(), K.error);
      }
    }
  if (cfg.wants("csv")) {
    w.add("kernel.csv", csv.str());
    if (any_limit) w.add("kernel_limit.csv", lim.str());
  }
  if (cfg.wants("json")) {
    json fits = json::array();
    if (cfg.sigma.size() >= 2)
      for (int side : {1, -1}) {
        auto f = res.decay_fit(side, cfg.sigma, v, y);
        fits.push_back({{"side", side},
                        {"slope", f.slope},
                        {"residual", f.residual},
                        {"expected_slope", -0.5},
                        {"sigma", f.sigma},
                        {"modulus", f.modulus}});
      }
    w.add_json("kernel_report.json", {{"lambda", cfg.lambda},
                                       {"rho", res.rho()},
                                       {"direction", vec_json(v)},
                                       {"y", vec_json(y)},
                                       {"decay_fits", fits}});
  }
}

// ---------------------------------------------------------------------------
// verify

// Random rational points of the unit square checked against both region
// characterizations; the seed makes the sample reproducible.
json random_region_probe(std::uint64_t seed, int count) {
  std::mt19937_64 rng(seed);
  json out = json::array();
  for (int d : {2, 3, 4}) {
    int bad = 0, inside = 0;
    for (int i = 0; i < count; ++i) {
      long long den = 2 + static_cast<long long>(rng() % 96);
      long long a = 1 + static_cast<long long>(rng() % den);  // x in (0, 1]
      long long b = static_cast<long long>(rng() % (den + 1));
      Exponent p = Exponent::from_reciprocal(Rational(a, den));
      Exponent q = Exponent::from_reciprocal(Rational(b, den));
      bool r1 = region::resonant_admissible(d, p, q), r2 = region::riesz(d, p, q);
      inside += r1;
      bad += r1 != r2;
    }
    out.push_back({{"d", d}, {"points", count}, {"inside", inside}, {"disagreements", bad}});
  }
  return out;
}

json default_exponents() {
  return json::array({{{"d", 3}, {"p", "4/3"}, {"q", "4"}},
                      {{"d", 2}, {"p", "7/6"}, {"q", "7"}},
                      {{"d", 2}, {"p", "2"}, {"q", "2"}}});
}

void cmd_verify(const RunConfig& cfg, RunWriter& w) {
  json out;
  json exps = json::array();
  for (const auto& e : cfg.exponents.empty() ? default_exponents() : cfg.exponents) {
    require(e.is_object() && e.contains("p") && e.contains("q"), "exponent entries need p and q");
    exps.push_back(to_json(exponent_region(e.value("d", 2), parse_exponent(e.at("p")), parse_exponent(e.at("q")))));
  }
  out["exponents"] = exps;
  json scans = json::array();
  for (int d : {2, 3, 4}) scans.push_back(to_json(region_equivalence_scan(d)));
  out["equivalence_scans"] = scans;
  out["random_probe"] = random_region_probe(cfg.seed, 2000);

  if (cfg.d == 2) {
    PotentialSpec pot = parse_potential(cfg.potential);
    AssumptionConfig ac;
    if (cfg.rho > 0) ac.rho = cfg.rho;
    ac.S = cfg.S;
    ac.step = cfg.step;
    auto rep = verify_assumptions(pot, cfg.lambda, ac);
    out["assumptions"] = to_json(rep);
    if (!rep.pass()) std::cerr << "warning: assumptions fail at lambda = " << cfg.lambda << "\n";
    if (!cfg.mu.empty()) {
      require(cfg.mu.size() == 2, "mu needs two entries");
      require(pot.mode == PotentialSpec::Mode::Separable, "the separable-example check needs a separable potential");
      out["separable_example"] =
          to_json(lemma13_verify(pot.parts[0], pot.parts[1], cfg.mu[0], cfg.mu[1], cfg.lemma_eps));
    }
  }
  if (cfg.wants("json")) w.add_json("verify_report.json", out);
}

// ---------------------------------------------------------------------------
// farfield

void cmd_farfield(const RunConfig& cfg, RunWriter& w) {
  auto field = make_field(parse_potential(cfg.potential), cfg.S);
  ExtractOptions opt{.step = cfg.step, .grad_threshold = cfg.grad_threshold};
  FermiSurface s = extract(*field, cfg.lambda, opt);
  if (s.empty()) throw Error(Errc::EmptyLevelSet, "no Fermi surface at lambda");
  Vec2 v = unit(cfg.direction), y = cfg.y;
  json rows = json::array();
  for (double sig : cfg.sigma) {
    Vec2 x{y[0] + sig * v[0], y[1] + sig * v[1]};
    auto lead = farfield_leading(s, *field, x, y);
    cplx a = fermi_oscillatory(s, *field, x, y);
    json pts = json::array();
    for (const auto& p : lead.points)
      pts.push_back({{"kappa", vec_json(p.kappa)}, {"sign", p.sign}, {"curvature", p.curvature}, {"h", cplx_json(p.h)}});
    rows.push_back({{"sigma", sig},
                    {"x", vec_json(x)},
                    {"leading", cplx_json(lead.value)},
                    {"oscillatory_integral", cplx_json(a)},
                    {"abs_difference", std::abs(a - lead.value)},
                    {"relative_difference", std::abs(a - lead.value) / std::abs(a)},
                    {"resonant_points", pts}});
  }
  if (cfg.wants("json"))
    w.add_json("farfield_report.json", {{"lambda", cfg.lambda}, {"direction", vec_json(v)}, {"rows", rows}});
}

// ---------------------------------------------------------------------------
// nlh_geometry

void cmd_nlh_geometry(const RunConfig& cfg, RunWriter& w) {
  auto field = make_field(parse_potential(cfg.potential), cfg.S);
  json mp = json::array();
  for (double delta : cfg.delta)
    for (int side : {1, -1}) {
      auto r = mountain_pass_sign(*field, cfg.lambda, delta, side, cfg.step);
      mp.push_back({{"delta", delta},
                    {"side", side},
                    {"value", r.value},
                    {"negative", r.value < 0},
                    {"tau_nodes", r.tau_nodes},
                    {"warnings", r.warnings}});
    }
  json exps = json::array();
  for (const auto& e : cfg.exponents.empty() ? json::array({{{"d", 2}, {"p", "7/6"}, {"q", "7"}}}) : cfg.exponents) {
    int d = e.value("d", 2);
    Exponent q = parse_exponent(e.at("q"));
    Exponent p = e.contains("p") ? parse_exponent(e.at("p")) : Exponent::from_reciprocal(Rational(1) - q.reciprocal());
    exps.push_back(to_json(exponent_region(d, p, q)));
  }
  if (cfg.wants("json"))
    w.add_json("nlh_report.json", {{"lambda", cfg.lambda}, {"mountain_pass", mp}, {"exponents", exps}});
}

// ---------------------------------------------------------------------------

bool is_validation(Errc c) {
  switch (c) {
    case Errc::InvalidInput:
    case Errc::FrequencyOutsideWindow:
    case Errc::OutOfBand:
    case Errc::EmptyLevelSet:
    case Errc::EpsilonZero:
    case Errc::OriginSingularity:
    case Errc::WindowMismatch:
    case Errc::CurvatureVanishes:
    case Errc::NoResonantPoint:
    case Errc::IrregularFrequency:
      return true;
    default:
      return false;
  }
}

// Command-line overrides; applied after the config file.
struct Overrides {
  std::string config, potential, out, cache;
  std::vector<std::string> formats;
  std::uint64_t seed = 0;
  int d = 0, S = 0, bands = 0, k_grid = 0, labels = 0;
  double lambda = 0, rho = 0, rho_max = 0, step = 0, lemma_eps = 0;
  std::vector<double> tau, eps, distance, sigma, delta, y, direction, mu;
};

struct Registered {
  CLI::App* app;
  std::map<std::string, CLI::Option*> opt;
};

Registered add_options(CLI::App* sub, Overrides& o) {
  Registered r{sub, {}};
  auto add = [&](const char* name, auto& var, const char* help) { r.opt[name] = sub->add_option(name, var, help); };
  add("--config", o.config, "JSON config (or a manifest.json to replay)");
  add("--potential", o.potential, "potential JSON file");
  add("--out", o.out, "output directory");
  add("--format", o.formats, "output formats: csv,json,svg");
  add("--seed", o.seed, "seed for randomized checks");
  add("--d", o.d, "dimension (1 or 2)");
  add("--S", o.S, "plane-wave truncation");
  add("--bands", o.bands, "number of bands");
  add("--k-grid", o.k_grid, "k points per axis");
  add("--labels", o.labels, "label radius of the resolvent k-sum");
  add("--lambda", o.lambda, "frequency");
  add("--rho", o.rho, "cutoff radius (0 picks automatically)");
  add("--rho-max", o.rho_max, "largest admissible cutoff radius");
  add("--step", o.step, "marching-squares step");
  add("--lemma-eps", o.lemma_eps, "eps of the separable-example check");
  add("--tau", o.tau, "energies for fermi");
  add("--eps", o.eps, "regularization list (0 = limit)");
  add("--distance", o.distance, "|x - y| list for kernel scans");
  add("--sigma", o.sigma, "sigma list for decay fits and farfield");
  add("--delta", o.delta, "delta list for nlh_geometry");
  add("--y", o.y, "base point y");
  add("--direction", o.direction, "direction of x - y");
  add("--mu", o.mu, "means of the separable parts");
  add("--cache", o.cache, "band cache directory");
  for (auto& [name, opt] : r.opt)
    if (opt->get_items_expected_max() > 1) opt->delimiter(',');
  return r;
}

void apply_overrides(RunConfig& c, const Registered& r, const Overrides& o) {
  auto set = [&](const char* name, auto& dst, const auto& src) {
    if (r.opt.at(name)->count()) dst = src;
  };
  if (r.opt.at("--potential")->count()) {
    c.potential_path = fs::absolute(o.potential).lexically_normal().string();
  }
  set("--out", c.out, o.out);
  set("--cache", c.cache, o.cache);
  set("--format", c.formats, o.formats);
  set("--seed", c.seed, o.seed);
  set("--d", c.d, o.d);
  set("--S", c.S, o.S);
  set("--bands", c.bands, o.bands);
  set("--k-grid", c.k_grid, o.k_grid);
  set("--labels", c.labels, o.labels);
  set("--lambda", c.lambda, o.lambda);
  set("--rho", c.rho, o.rho);
  set("--rho-max", c.rho_max, o.rho_max);
  set("--step", c.step, o.step);
  set("--lemma-eps", c.lemma_eps, o.lemma_eps);
  set("--tau", c.tau, o.tau);
  set("--eps", c.eps, o.eps);
  set("--distance", c.distance, o.distance);
  set("--sigma", c.sigma, o.sigma);
  set("--delta", c.delta, o.delta);
  set("--mu", c.mu, o.mu);
  if (r.opt.at("--y")->count()) {
    require(o.y.size() == 2, "--y takes two numbers");
    c.y = {o.y[0], o.y[1]};
  }
  if (r.opt.at("--direction")->count()) {
    require(o.direction.size() == 2, "--direction takes two numbers");
    c.direction = {o.direction[0], o.direction[1]};
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Floquet-Bloch spectral computations for periodic Schroedinger operators"};
  app.set_version_flag("--version", version);
  app.require_subcommand(1);
  Overrides o;
  using Handler = void (*)(const RunConfig&, RunWriter&);
  std::vector<std::pair<Registered, Handler>> subs;
  auto reg = [&](const char* name, const char* help, Handler h) {
    subs.push_back({add_options(app.add_subcommand(name, help), o), h});
  };
  reg("bands", "band functions on a k grid and gap report", cmd_bands);
  reg("fermi", "Fermi surfaces as CSV, SVG and a curvature report", cmd_fermi);
  reg("kernel", "resolvent kernel scans and decay fits", cmd_kernel);
  reg("verify", "assumption checks and exponent-region reports", cmd_verify);
  reg("farfield", "leading farfield term against the oscillatory integral", cmd_farfield);
  reg("nlh_geometry", "mountain-pass sign integrals and exponent window", cmd_nlh_geometry);

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  for (auto& [r, handler] : subs) {
    if (!r.app->parsed()) continue;
    try {
      RunConfig cfg;
      cfg.command = r.app->get_name();
      if (r.opt.at("--config")->count()) {
        fs::path p = fs::absolute(o.config);
        apply_json(cfg, read_json_file(p), p.parent_path());
        cfg.command = r.app->get_name();
      }
      apply_overrides(cfg, r, o);
      resolve(cfg);
      RunWriter w(cfg);
      handler(cfg, w);
      w.finish();
      std::cout << cfg.out << "\n";
      return 0;
    } catch (const Error& e) {
      std::cerr << "error: " << e.what() << "\n";
      return is_validation(e.code()) ? 2 : 1;
    } catch (const json::exception& e) {
      std::cerr << "error: InvalidInput: " << e.what() << "\n";
      return 2;
    } catch (const std::exception& e) {
      std::cerr << "internal error: " << e.what() << "\n";
      return 1;
    }
  }
  return 1;
}
