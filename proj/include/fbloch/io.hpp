// JSON configs and potentials, CSV/SVG writers, manifests, atomic output.
#ifndef FBLOCH_IO_HPP
#define FBLOCH_IO_HPP

#include <chrono>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "checks.hpp"
#include "json.hpp"

namespace fbloch {

using json = nlohmann::json;
namespace fs = std::filesystem;

inline constexpr const char* version = "0.1.0";

// ---------------------------------------------------------------------------
// Potentials

// {"cells": [[len, val], ...]}, {"samples": [...]} or {"constant": mu}.
inline Potential1D parse_potential1d(const json& j) {
  require(j.is_object(), "1D potential must be a JSON object");
  if (j.contains("cells")) {
    std::vector<Potential1D::Cell> cells;
    for (const auto& c : j.at("cells")) {
      require(c.is_array() && c.size() == 2, "cells entries are [length, value]");
      cells.push_back({c[0].get<double>(), c[1].get<double>()});
    }
    return Potential1D::from_cells(std::move(cells));
  }
  if (j.contains("samples")) return Potential1D::from_samples(j.at("samples").get<std::vector<double>>());
  if (j.contains("constant")) return Potential1D::constant(j.at("constant").get<double>());
  throw Error(Errc::InvalidInput, "1D potential needs \"cells\", \"samples\" or \"constant\"");
}

inline bool is_potential1d(const json& j) {
  return j.is_object() && (j.contains("cells") || j.contains("samples") || j.contains("constant"));
}

// {"d":2,"mode":"fourier","coeffs":[[n1,n2,re,im],...]} or
// {"mode":"separable","parts":[p1, p2]}. {"mode":"zero"} is V = 0.
inline PotentialSpec parse_potential(const json& j) {
  require(j.is_object(), "potential must be a JSON object");
  int d = j.value("d", 2);
  std::string mode = j.value("mode", "fourier");
  if (mode == "zero") return PotentialSpec::zero(d);
  if (mode == "separable") {
    std::vector<Potential1D> parts;
    for (const auto& p : j.at("parts")) parts.push_back(parse_potential1d(p));
    require(j.value("d", static_cast<int>(parts.size())) == static_cast<int>(parts.size()),
            "separable potential needs one part per axis");
    return PotentialSpec::separable(std::move(parts));
  }
  require(mode == "fourier", "unknown potential mode \"" + mode + "\"");
  std::map<Label, cplx> c;
  for (const auto& row : j.value("coeffs", json::array())) {
    require(row.is_array() && row.size() == 4, "coeffs entries are [n1, n2, re, im]");
    Label n{row[0].get<int>(), row[1].get<int>()};
    require(!c.count(n), "duplicate Fourier coefficient");
    c[n] = {row[2].get<double>(), row[3].get<double>()};
  }
  return PotentialSpec::fourier(d, std::move(c));
}

inline json potential_to_json(const Potential1D& p) {
  json cells = json::array();
  for (const auto& c : p.cells()) cells.push_back({c.length, c.value});
  return {{"cells", cells}};
}

// Samples a 1D Fourier table onto a piecewise-constant grid.
inline Potential1D to_potential1d(const json& j, int n = 512) {
  if (is_potential1d(j)) return parse_potential1d(j);
  PotentialSpec p = parse_potential(j);
  if (p.mode == PotentialSpec::Mode::Separable) return p.parts[0];
  require(p.d == 1, "a one-dimensional run needs a 1D potential");
  return Potential1D::sample([&](double x) { return p.value({x, 0}); }, n);
}

// ---------------------------------------------------------------------------
// Run configuration. The member initializers are the single defaults table
// (documented in docs/config.md).

struct RunConfig {
  std::string command;
  json potential = json{{"mode", "zero"}};  // inline object after resolution
  std::string potential_path;               // absolute, empty when inline
  int d = 2;
  int S = 8;
  int bands = 6;              // 1D bands in bands runs
  int k_grid = 17;            // per axis, inclusive of 0 and +-pi
  double lambda = 5.0;
  double rho = 0;             // 0 lets the resolvent pick
  double rho_max = 0.5;
  int labels = 8;
  double step = 0.1;          // marching-squares step
  double grad_threshold = 1e-4;  // |grad Lambda| below this marks an irregular frequency
  std::vector<double> tau{5.0};
  std::vector<double> eps{0.1, 0.05};
  std::vector<double> distance{1, 2, 5};
  std::vector<double> sigma{5, 10, 20, 40};
  std::vector<double> delta{0.1};
  Vec2 y{0.1, 0.2};
  Vec2 direction{0.6, 0.8};
  json exponents = json::array();  // [{"d":3,"p":"4/3","q":"4"}, ...]
  std::vector<double> mu;          // separable-example check when given
  double lemma_eps = 3.0;
  std::string out = "out";
  std::vector<std::string> formats{"csv", "json", "svg"};
  std::uint64_t seed = 1;
  std::string cache;  // empty disables the band cache

  bool wants(const std::string& f) const { return std::find(formats.begin(), formats.end(), f) != formats.end(); }
};

inline json to_json(const RunConfig& c) {
  return {{"command", c.command},       {"potential", c.potential}, {"d", c.d},
          {"S", c.S},                   {"bands", c.bands},         {"k_grid", c.k_grid},
          {"lambda", c.lambda},         {"rho", c.rho},             {"rho_max", c.rho_max},
          {"labels", c.labels},         {"step", c.step},           {"grad_threshold", c.grad_threshold}, {"tau", c.tau},
          {"eps", c.eps},               {"distance", c.distance},   {"sigma", c.sigma},
          {"delta", c.delta},           {"y", c.y},                 {"direction", c.direction},
          {"exponents", c.exponents},   {"mu", c.mu},               {"lemma_eps", c.lemma_eps},
          {"out", c.out},               {"formats", c.formats},     {"seed", c.seed},
          {"cache", c.cache}};
}

// Reads known keys; unknown keys are rejected so typos do not pass silently.
// A manifest is accepted too, through its "config" member.
inline void apply_json(RunConfig& c, const json& in, const fs::path& base) {
  const json& j = in.contains("config") && in.contains("manifest_version") ? in.at("config") : in;
  require(j.is_object(), "config must be a JSON object");
  static const std::set<std::string> known = {
      "command", "potential", "d",     "S",      "bands",     "k_grid", "lambda", "rho",     "rho_max",
      "labels",  "step",      "grad_threshold",      "tau",   "eps",    "distance",  "sigma",  "delta",  "y",       "direction",
      "exponents", "mu",      "lemma_eps", "out", "formats",  "seed",   "cache"};
  for (auto it = j.begin(); it != j.end(); ++it)
    require(known.count(it.key()), "unknown config key \"" + it.key() + "\"");
  auto get = [&](const char* k, auto& v) {
    if (j.contains(k)) v = j.at(k).get<std::decay_t<decltype(v)>>();
  };
  get("command", c.command);
  if (j.contains("potential")) {
    const json& p = j.at("potential");
    if (p.is_string()) {
      fs::path path = fs::path(p.get<std::string>());
      if (path.is_relative()) path = base / path;
      c.potential_path = fs::absolute(path).lexically_normal().string();
    } else {
      c.potential = p;
      c.potential_path.clear();
    }
  }
  get("d", c.d);
  get("S", c.S);
  get("bands", c.bands);
  get("k_grid", c.k_grid);
  get("lambda", c.lambda);
  get("rho", c.rho);
  get("rho_max", c.rho_max);
  get("labels", c.labels);
  get("step", c.step);
  get("grad_threshold", c.grad_threshold);
  get("tau", c.tau);
  get("eps", c.eps);
  get("distance", c.distance);
  get("sigma", c.sigma);
  get("delta", c.delta);
  get("y", c.y);
  get("direction", c.direction);
  get("exponents", c.exponents);
  get("mu", c.mu);
  get("lemma_eps", c.lemma_eps);
  get("out", c.out);
  get("formats", c.formats);
  get("seed", c.seed);
  get("cache", c.cache);
}

inline json read_json_file(const fs::path& p) {
  std::ifstream f(p);
  if (!f) throw Error(Errc::InvalidInput, "cannot open " + p.string());
  try {
    return json::parse(f);
  } catch (const json::parse_error& e) {
    throw Error(Errc::InvalidInput, p.string() + ": " + e.what());
  }
}

// Loads the potential file into the inline slot, checks ranges and makes
// every path absolute.
inline void resolve(RunConfig& c) {
  if (!c.potential_path.empty()) c.potential = read_json_file(c.potential_path);
  require(c.d == 1 || c.d == 2, "d must be 1 or 2");
  require(c.S >= 2 && c.S <= 40, "S must lie in [2, 40]");
  require(c.k_grid >= 2 && c.k_grid <= 1025, "k_grid must lie in [2, 1025]");
  require(c.bands >= 1 && c.bands <= 40, "bands must lie in [1, 40]");
  require(c.step > 0 && c.step <= 1, "step must lie in (0, 1]");
  require(c.grad_threshold > 0, "grad_threshold must be positive");
  require(c.rho >= 0 && c.rho_max > 0, "rho must be >= 0 and rho_max > 0");
  require(std::hypot(c.direction[0], c.direction[1]) > 0, "direction must be nonzero");
  for (double t : c.delta) require(t > 0, "delta values must be positive");
  for (const auto& f : c.formats)
    require(f == "csv" || f == "json" || f == "svg", "unknown format \"" + f + "\"");
  c.out = fs::absolute(c.out).lexically_normal().string();
  if (!c.cache.empty()) c.cache = fs::absolute(c.cache).lexically_normal().string();
}

inline Exponent parse_exponent(const json& j) {
  if (j.is_number_integer()) return Exponent(j.get<long long>());
  require(j.is_string(), "exponent must be an integer or a string like \"4/3\" or \"inf\"");
  std::string s = j.get<std::string>();
  if (s == "inf") return Exponent::infinity();
  auto slash = s.find('/');
  try {
    if (slash == std::string::npos) return Exponent(std::stoll(s));
    return Exponent(Rational(std::stoll(s.substr(0, slash)), std::stoll(s.substr(slash + 1))));
  } catch (const std::exception&) {
    throw Error(Errc::InvalidInput, "bad exponent \"" + s + "\"");
  }
}

// ---------------------------------------------------------------------------
// Output

inline std::string num(double v, int digits = 17) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

class Csv {
 public:
  explicit Csv(std::vector<std::string> header) {
    for (std::size_t i = 0; i < header.size(); ++i) s_ << (i ? "," : "") << header[i];
    s_ << "\n";
  }
  template <class... T>
  void row(const T&... v) {
    bool first = true;
    ((s_ << (first ? "" : ",") << cell(v), first = false), ...);
    s_ << "\n";
  }
  std::string str() const { return s_.str(); }

 private:
  static std::string cell(double v) { return num(v); }
  static std::string cell(int v) { return std::to_string(v); }
  static std::string cell(std::size_t v) { return std::to_string(v); }
  static std::string cell(const std::string& v) { return v; }
  std::ostringstream s_;
};

// Temp file plus rename, so readers never see a partial file.
inline void write_atomic(const fs::path& path, const std::string& content) {
  fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + tmp.string());
    f << content;
    if (!f) throw std::runtime_error("short write on " + tmp.string());
  }
  fs::rename(tmp, path);
}

inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::string hex(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

// Figure-style rendering: one polyline per component, one colour per tau,
// axes and the Brillouin-zone lines at odd multiples of pi.
inline std::string surfaces_svg(const std::vector<FermiSurface>& surfaces, double size = 640) {
  static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf"};
  double R = 1;
  for (const auto& s : surfaces)
    for (const auto& c : s.components)
      for (const auto& v : c.vertices) R = std::max({R, std::abs(v.kappa[0]), std::abs(v.kappa[1])});
  R *= 1.08;
  auto X = [&](double k) { return num(size / 2 + k / R * size / 2, 6); };
  auto Y = [&](double k) { return num(size / 2 - k / R * size / 2, 6); };
  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << size << "\" height=\"" << size << "\" viewBox=\"0 0 "
    << size << " " << size << "\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<g stroke=\"#999\" stroke-width=\"1\">\n";
  o << "<line x1=\"0\" y1=\"" << Y(0) << "\" x2=\"" << size << "\" y2=\"" << Y(0) << "\"/>\n";
  o << "<line x1=\"" << X(0) << "\" y1=\"0\" x2=\"" << X(0) << "\" y2=\"" << size << "\"/>\n";
  for (int m = 1; pi * (2 * m - 1) < R; ++m)
    for (int sg : {-1, 1}) {
      double k = sg * pi * (2 * m - 1);
      o << "<line stroke-dasharray=\"4 4\" x1=\"" << X(k) << "\" y1=\"0\" x2=\"" << X(k) << "\" y2=\"" << size
        << "\"/>\n";
      o << "<line stroke-dasharray=\"4 4\" x1=\"0\" y1=\"" << Y(k) << "\" x2=\"" << size << "\" y2=\"" << Y(k)
        << "\"/>\n";
    }
  o << "</g>\n";
  for (std::size_t i = 0; i < surfaces.size(); ++i) {
    const char* col = palette[i % 7];
    o << "<g fill=\"none\" stroke=\"" << col << "\" stroke-width=\"1.5\">\n";
    for (const auto& c : surfaces[i].components) {
      o << "<" << (c.closed ? "polygon" : "polyline") << " points=\"";
      for (std::size_t k = 0; k < c.vertices.size(); ++k)
        o << (k ? " " : "") << X(c.vertices[k].kappa[0]) << "," << Y(c.vertices[k].kappa[1]);
      o << "\"/>\n";
    }
    o << "<text x=\"10\" y=\"" << 20 + 16 * i << "\" fill=\"" << col << "\" stroke=\"none\" font-size=\"13\">tau = "
      << num(surfaces[i].tau) << "</text>\n";
    o << "</g>\n";
  }
  o << "</svg>\n";
  return o.str();
}

// Collects outputs for one run and writes them with a manifest.
class RunWriter {
 public:
  explicit RunWriter(const RunConfig& c) : cfg_(c), start_(std::chrono::steady_clock::now()) {}

  void add(const std::string& name, std::string content) { files_.emplace_back(name, std::move(content)); }
  void add_json(const std::string& name, const json& j) { add(name, j.dump(2) + "\n"); }
  void note(const std::string& key, json v) { extra_[key] = std::move(v); }

  // Returns the manifest that was written.
  json finish() {
    fs::path dir(cfg_.out);
    json outputs = json::array();
    for (auto& [name, content] : files_) {
      write_atomic(dir / name, content);
      outputs.push_back({{"file", name}, {"bytes", content.size()}, {"fnv1a", hex(fnv1a(content))}});
    }
    double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    json m = {{"manifest_version", 1},
              {"fbloch_version", version},
              {"compiler", __VERSION__},
              {"threads", thread_count()},
              {"elapsed_seconds", elapsed},
              {"config", to_json(cfg_)},
              {"potential_source", cfg_.potential_path},
              {"outputs", outputs}};
    for (auto& [k, v] : extra_.items()) m[k] = v;
    write_atomic(dir / "manifest.json", m.dump(2) + "\n");
    return m;
  }

 private:
  const RunConfig& cfg_;
  std::chrono::steady_clock::time_point start_;
  std::vector<std::pair<std::string, std::string>> files_;
  json extra_ = json::object();
};

// ---------------------------------------------------------------------------
// Report serialization

inline json vec_json(const Vec2& v) { return json::array({v[0], v[1]}); }
inline json cplx_json(cplx z) { return json::array({z.real(), z.imag()}); }

inline json to_json(const ExponentRegion& r) {
  return {{"d", r.d},
          {"p", r.p.str()},
          {"q", r.q.str()},
          {"admissible_pq", r.admissible_pq},
          {"pq_nonresonant", r.pq_nonresonant},
          {"resonant_admissible", r.resonant_admissible},
          {"riesz", r.riesz},
          {"gutierrez", r.gutierrez},
          {"nlh_window", r.nlh_window},
          {"consistent", r.consistent}};
}

inline json to_json(const EquivalenceScan& s) {
  json w = json::array();
  for (auto& [p, q] : s.witnesses) w.push_back({p.str(), q.str()});
  return {{"d", s.d},          {"points", s.points},   {"inside", s.inside},      {"skipped", s.skipped},
          {"disagreements", s.disagreements}, {"witnesses", w}, {"boundary_probes", s.boundary.size()},
          {"pass", s.disagreements == 0}};
}

inline json to_json(const AssumptionReport& r) {
  json a2 = {{"pass", r.a2.pass},
             {"regular", r.a2.regular},
             {"min_curvature", r.a2.min_curvature},
             {"reasons", r.a2.reasons},
             {"u_box", {vec_json(r.a2.u_lo), vec_json(r.a2.u_hi)}},
             {"smoothness",
              {{"lambda_third_difference_change", r.a2.smooth_lambda},
               {"psi_third_difference_change", r.a2.smooth_psi},
               {"stable", r.a2.smooth_stable},
               {"note", r.a2.smoothness_note}}}};
  if (r.a2.witness) a2["witness"] = {{"kappa", vec_json(*r.a2.witness)}, {"tau", r.a2.witness_tau}};
  if (r.a2.separable_window) a2["window"] = {r.a2.separable_window->first, r.a2.separable_window->second};
  json a3 = {{"pass", r.a3.pass}, {"max_ratio", r.a3.max_ratio}, {"growth_slope", r.a3.growth_slope}};
  if (r.a3.witness) a3["witness"] = {{"s", {(*r.a3.witness)[0], (*r.a3.witness)[1]}}, {"k", vec_json(r.a3.witness_k)}};
  return {{"lambda", r.lambda},
          {"pass", r.pass()},
          {"regular_frequency", r.regular_frequency},
          {"A1", {{"pass", r.a1.pass}, {"reasons", r.a1.reasons}, {"sup_bound", r.a1.sup_bound}}},
          {"A2", a2},
          {"A3", a3}};
}

inline json to_json(const Lemma13Report& r) {
  json axes = json::array();
  for (const auto& a : r.axes)
    axes.push_back({{"mu", a.mu},
                    {"sup_deviation", a.sup_deviation},
                    {"min_E2", a.min_E2},
                    {"min_E2_k", a.min_E2_k},
                    {"deviation", {a.dev0, a.dev1, a.dev2}},
                    {"convex", a.convex},
                    {"close", a.close}});
  return {{"eps", r.eps},
          {"I_half_width", r.half_width},
          {"bound", r.bound},
          {"axes", axes},
          {"window", {r.window_lo, r.window_hi}},
          {"admissibility_window", {r.a2_lo, r.a2_hi}},
          {"window_contained", r.window_contained},
          {"lambdas", r.lambdas},
          {"max_abs_k", r.max_abs_k},
          {"inside_I", r.inside_I},
          {"min_curvature", r.min_curvature},
          {"curvature_positive", r.curvature_positive},
          {"failures", r.failures},
          {"pass", r.pass()}};
}

}  // namespace fbloch

#endif
