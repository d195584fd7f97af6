#include <gtest/gtest.h>

#include <cstdlib>

#include "fbloch/io.hpp"

using namespace fbloch;

namespace {

fs::path scratch(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("fbloch_test_cli_io_" + std::to_string(::getpid())) / name;
  fs::remove_all(p);
  return p;
}

int run_cli(const std::string& args, const std::string& env = "") {
  std::string cmd = env + " " + std::string(FBLOCH_CLI) + " " + args + " >/dev/null 2>&1";
  int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p);
  return {std::istreambuf_iterator<char>(f), {}};
}

std::vector<std::vector<double>> read_csv(const fs::path& p, std::vector<std::string>* header = nullptr) {
  std::ifstream f(p);
  std::string line;
  std::getline(f, line);
  if (header) {
    std::stringstream hs(line);
    std::string h;
    while (std::getline(hs, h, ',')) header->push_back(h);
  }
  std::vector<std::vector<double>> rows;
  while (std::getline(f, line)) {
    std::stringstream ls(line);
    std::string c;
    std::vector<double> row;
    while (std::getline(ls, c, ',')) row.push_back(std::stod(c));
    rows.push_back(row);
  }
  return rows;
}

const std::string configs = std::string(FBLOCH_SOURCE_DIR) + "/configs/";

}  // namespace

TEST(Io, PotentialParsing) {
  auto v = parse_potential(json::parse(R"({"d":2,"mode":"fourier","coeffs":[[1,0,0.5,0],[-1,0,0.5,0]]})"));
  EXPECT_EQ(v.d, 2);
  EXPECT_NEAR(v.value({0.0, 0.3}), 1.0, 1e-14);
  EXPECT_NEAR(v.value({0.5, 0.3}), -1.0, 1e-14);
  EXPECT_TRUE(parse_potential(json::parse(R"({"mode":"zero"})")).is_zero());

  auto sep = parse_potential(json::parse(R"({"mode":"separable","parts":[{"cells":[[0.5,1],[0.5,-1]]},{"constant":2}]})"));
  EXPECT_EQ(sep.mode, PotentialSpec::Mode::Separable);
  EXPECT_DOUBLE_EQ(sep.value({0.25, 0.7}), 3.0);
  EXPECT_DOUBLE_EQ(sep.value({0.75, 0.7}), 1.0);

  // Non-Hermitian tables and malformed rows are input errors.
  EXPECT_THROW(parse_potential(json::parse(R"({"coeffs":[[1,0,0.5,0]]})")), Error);
  EXPECT_THROW(parse_potential(json::parse(R"({"coeffs":[[1,0,0.5]]})")), Error);
  EXPECT_THROW(parse_potential(json::parse(R"({"mode":"wavelet"})")), Error);
  EXPECT_THROW(parse_potential1d(json::parse(R"({"cells":[[0.5,1]]})")), Error);
}

TEST(Io, FourierTableSampledToCells) {
  json j = json::parse(R"({"d":1,"mode":"fourier","coeffs":[[1,0,1.0,0],[-1,0,1.0,0]]})");
  Potential1D p = to_potential1d(j, 512);
  // Piecewise-constant samples of 2cos(2 pi x): pointwise error at most
  // sup|f'| times the cell width, zero mean, first coefficient near 1.
  for (int i = 0; i < 1000; ++i) {
    double x = (i + 0.37) / 1000;
    EXPECT_LE(std::abs(p(x) - 2 * std::cos(2 * pi * x)), 4 * pi / 512);
  }
  EXPECT_NEAR(p.mean(), 0.0, 1e-12);
  EXPECT_NEAR(std::abs(p.fourier(1)), 1.0, 1e-4);
}

TEST(Io, ConfigLayering) {
  fs::path base = scratch("cfg");
  fs::create_directories(base);
  write_atomic(base / "v.json", R"({"mode":"zero"})");
  RunConfig c;
  apply_json(c, json::parse(R"({"potential":"v.json","lambda":7,"tau":[1,2],"exponents":[{"p":"4/3","q":"inf"}]})"),
             base);
  resolve(c);
  EXPECT_EQ(c.lambda, 7);
  EXPECT_EQ(c.tau, (std::vector<double>{1, 2}));
  EXPECT_TRUE(fs::path(c.potential_path).is_absolute());
  EXPECT_EQ(c.potential, json::parse(R"({"mode":"zero"})"));
  EXPECT_TRUE(fs::path(c.out).is_absolute());
  EXPECT_EQ(c.S, RunConfig{}.S);  // untouched keys keep the table defaults

  // Round trip through the manifest form.
  RunConfig d;
  apply_json(d, json{{"manifest_version", 1}, {"config", to_json(c)}}, "/");
  EXPECT_EQ(to_json(d), to_json(c));

  RunConfig e;
  EXPECT_THROW(apply_json(e, json::parse(R"({"lamda":3})"), base), Error);
  RunConfig f;
  apply_json(f, json::parse(R"({"S":1})"), base);
  EXPECT_THROW(resolve(f), Error);
  RunConfig g;
  apply_json(g, json::parse(R"({"potential":"missing.json"})"), base);
  EXPECT_THROW(resolve(g), Error);
}

TEST(Io, ExponentParsing) {
  EXPECT_EQ(parse_exponent(json(4)), Exponent(4));
  EXPECT_EQ(parse_exponent(json("4/3")), Exponent(Rational(4, 3)));
  EXPECT_TRUE(parse_exponent(json("inf")).inf);
  EXPECT_THROW(parse_exponent(json("four")), Error);
  EXPECT_THROW(parse_exponent(json(1.5)), Error);
}

TEST(Io, CsvAndHash) {
  Csv c({"a", "b", "c"});
  c.row(0.1, 3, std::string("x"));
  EXPECT_EQ(c.str(), "a,b,c\n0.10000000000000001,3,x\n");
  // Round trip is exact at 17 significant digits.
  double v = 1.0 / 3.0;
  EXPECT_EQ(std::stod(num(v)), v);
  // Published FNV-1a 64-bit test vectors.
  EXPECT_EQ(hex(fnv1a("")), "cbf29ce484222325");
  EXPECT_EQ(hex(fnv1a("a")), "af63dc4c8601ec8c");
  EXPECT_EQ(hex(fnv1a("foobar")), "85944171f73967e8");
}

TEST(Io, AtomicWriteLeavesNoTemp) {
  fs::path dir = scratch("atomic");
  write_atomic(dir / "x.txt", "one");
  write_atomic(dir / "x.txt", "two");
  EXPECT_EQ(slurp(dir / "x.txt"), "two");
  EXPECT_FALSE(fs::exists(dir / "x.txt.tmp"));
}

TEST(Io, SvgHasOnePolygonPerComponent) {
  FermiSurface s;
  s.tau = 5;
  FermiComponent c;
  for (int i = 0; i < 8; ++i) c.vertices.push_back({{std::cos(i * pi / 4), std::sin(i * pi / 4)}});
  s.components = {c, c};
  std::string svg = surfaces_svg({s});
  std::size_t count = 0;
  for (std::size_t at = svg.find("<polygon"); at != std::string::npos; at = svg.find("<polygon", at + 1)) ++count;
  EXPECT_EQ(count, 2u);
  EXPECT_EQ(svg.rfind("<svg", 0), 0u);
  EXPECT_NE(svg.find("</svg>"), std::string::npos);
}

// ---------------------------------------------------------------------------
// End-to-end runs through the binary.

TEST(Cli, ExitCodes) {
  fs::path dir = scratch("exit");
  fs::create_directories(dir);
  write_atomic(dir / "bad.json", "{\"d\": 2, \"mode\": ");
  EXPECT_EQ(run_cli("bands --potential " + (dir / "bad.json").string() + " --out " + (dir / "a").string()), 2);
  EXPECT_FALSE(fs::exists(dir / "a" / "manifest.json"));
  EXPECT_EQ(run_cli("bands --S notanumber"), 2);
  EXPECT_EQ(run_cli("nosuchcommand"), 2);
  EXPECT_EQ(run_cli("bands --S 1 --out " + (dir / "b").string()), 2);
  EXPECT_EQ(run_cli("--help"), 0);
  // Empty surface at the frequency is a validation failure.
  EXPECT_EQ(run_cli("farfield --potential " + configs + "v0.json --lambda -1 --out " + (dir / "c").string()), 2);
}

TEST(Cli, FreeBandsMatchClosedForm) {
  fs::path out = scratch("bands_v0");
  ASSERT_EQ(run_cli("bands --potential " + configs + "v0.json --d 2 --S 8 --k-grid 5 --out " + out.string()), 0);
  std::vector<std::string> h;
  auto rows = read_csv(out / "bands.csv", &h);
  EXPECT_EQ(h, (std::vector<std::string>{"k1", "k2", "s1", "s2", "lambda"}));
  ASSERT_EQ(rows.size(), 25u * 15 * 15);  // interior labels |s|_inf <= S - 1
  for (const auto& r : rows) {
    double a = r[0] + 2 * pi * r[2], b = r[1] + 2 * pi * r[3];
    EXPECT_NEAR(r[4], a * a + b * b, 1e-9 * (1 + r[4]));
  }
  json m = json::parse(slurp(out / "manifest.json"));
  EXPECT_EQ(m["config"]["S"], 8);
  EXPECT_EQ(m["config"]["potential"]["mode"], "zero");
  EXPECT_EQ(m["fbloch_version"], version);
}

TEST(Cli, MathieuEdgesInterlace) {
  fs::path out = scratch("bands_mathieu");
  ASSERT_EQ(run_cli("bands --potential " + configs + "mathieu.json --d 1 --out " + out.string()), 0);
  auto edges = read_csv(out / "band_edges.csv");
  ASSERT_GE(edges.size(), 4u);
  // Periodic/antiperiodic chain: E_l(0) and E_l(pi) alternate as band ends,
  // and each band's top does not exceed the next band's bottom.
  for (std::size_t l = 0; l < edges.size(); ++l) {
    const auto& e = edges[l];
    EXPECT_LE(e[1], e[2]);
    EXPECT_NEAR(std::min(e[3], e[4]), e[1], 1e-9);
    EXPECT_NEAR(std::max(e[3], e[4]), e[2], 1e-9);
    if (l + 1 < edges.size()) EXPECT_LE(e[2], edges[l + 1][1] + 1e-9);
  }
  EXPECT_TRUE(json::parse(slurp(out / "bands_report.json"))["interlacing"].get<bool>());
  // Cosine potential opens the first gap at k = pi.
  EXPECT_GT(edges[1][1] - edges[0][2], 0.5);
}

TEST(Cli, FreeSurfaceIsCircle) {
  fs::path out = scratch("fermi_v0");
  ASSERT_EQ(run_cli("fermi --potential " + configs + "v0.json --tau 5 --out " + out.string()), 0);
  auto rows = read_csv(out / "fermi.csv");
  ASSERT_GT(rows.size(), 50u);
  for (const auto& r : rows) EXPECT_NEAR(std::hypot(r[2], r[3]), std::sqrt(5.0), 1e-9);
  json rep = json::parse(slurp(out / "fermi_report.json"));
  EXPECT_EQ(rep["surfaces"][0]["components"], 1);
  EXPECT_NEAR(rep["surfaces"][0]["curvature"]["min"].get<double>(), 1 / std::sqrt(5.0), 1e-6);
  std::string svg = slurp(out / "fermi.svg");
  EXPECT_NE(svg.find("<polygon"), std::string::npos);
}

TEST(Cli, IrregularFrequencyIsReported) {
  fs::path out = scratch("irregular");
  ASSERT_EQ(run_cli("fermi --config " + configs + "irregular_v0.json --out " + out.string()), 0);
  json rep = json::parse(slurp(out / "fermi_report.json"));
  EXPECT_TRUE(rep["surfaces"][0]["irregular"].get<bool>());
  EXPECT_TRUE(rep["surfaces"][0].contains("witness"));
  EXPECT_FALSE(rep["surfaces"][1]["irregular"].get<bool>());
}

TEST(Cli, ReplayAndThreadsAreByteIdentical) {
  fs::path a = scratch("det_a"), b = scratch("det_b"), c = scratch("det_c");
  std::string args = "kernel --potential " + configs + "v0.json --eps 0.1,0 --distance 1,3 --sigma 5,10 --out ";
  ASSERT_EQ(run_cli(args + a.string(), "FBLOCH_THREADS=1"), 0);
  ASSERT_EQ(run_cli(args + b.string(), "FBLOCH_THREADS=3"), 0);
  ASSERT_EQ(run_cli("kernel --config " + (a / "manifest.json").string() + " --out " + c.string()), 0);
  for (const char* f : {"kernel.csv", "kernel_limit.csv", "kernel_report.json"}) {
    EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
    EXPECT_EQ(slurp(a / f), slurp(c / f)) << f;
  }
}

TEST(Cli, BandCache) {
  fs::path cache = scratch("cache"), a = scratch("cache_a"), b = scratch("cache_b");
  std::string args = "bands --potential " + configs + "mathieu.json --d 1 --cache " + cache.string() + " --out ";
  ASSERT_EQ(run_cli(args + a.string()), 0);
  ASSERT_EQ(run_cli(args + b.string()), 0);
  EXPECT_FALSE(json::parse(slurp(a / "manifest.json"))["cache"]["hit"].get<bool>());
  EXPECT_TRUE(json::parse(slurp(b / "manifest.json"))["cache"]["hit"].get<bool>());
  EXPECT_EQ(slurp(a / "bands.csv"), slurp(b / "bands.csv"));
  EXPECT_EQ(slurp(a / "band_edges.csv"), slurp(b / "band_edges.csv"));
}

TEST(Cli, NlhGeometryFreeClosedForm) {
  fs::path out = scratch("nlh");
  ASSERT_EQ(run_cli("nlh_geometry --config " + configs + "nlh_v0.json --out " + out.string()), 0);
  json rep = json::parse(slurp(out / "nlh_report.json"));
  for (const auto& m : rep["mountain_pass"]) EXPECT_NEAR(m["value"].get<double>(), -std::log(2.0) / (4 * pi), 1e-9);
  EXPECT_TRUE(rep["exponents"][0]["nlh_window"].get<bool>());
  EXPECT_FALSE(rep["exponents"][1]["nlh_window"].get<bool>());
}

TEST(Cli, FarfieldResonantPoints) {
  fs::path out = scratch("farfield");
  ASSERT_EQ(run_cli("farfield --config " + configs + "farfield_v0.json --out " + out.string()), 0);
  json rep = json::parse(slurp(out / "farfield_report.json"));
  for (const auto& r : rep["rows"]) {
    ASSERT_EQ(r["resonant_points"].size(), 2u);
    for (const auto& p : r["resonant_points"]) {
      double s = p["sign"].get<int>();
      EXPECT_NEAR(p["kappa"][0].get<double>(), s * std::sqrt(5.0) * 0.6, 1e-6);
      EXPECT_NEAR(p["kappa"][1].get<double>(), s * std::sqrt(5.0) * 0.8, 1e-6);
    }
  }
}
