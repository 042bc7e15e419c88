#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "ftnoc/cli.hpp"

using namespace ftnoc;
namespace fs = std::filesystem;

namespace {

struct Invocation {
  int rc = 0;
  std::string out;
  std::string err;
};

Invocation invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "ftnoc");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  Invocation r;
  r.rc = cli_main(static_cast<int>(argv.size()), argv.data(), out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

std::vector<std::string> lines_of(const fs::path& p) {
  std::ifstream f(p);
  std::vector<std::string> out;
  for (std::string l; std::getline(f, l);) out.push_back(l);
  return out;
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("variant presets") {
  NetworkConfig n;
  apply_variant(n, Variant::Baseline);
  CHECK((!n.pcr_enabled && !n.ecc_enabled && !n.hard_ft_enabled));
  apply_variant(n, Variant::Fto3d);
  CHECK((!n.pcr_enabled && !n.ecc_enabled && n.hard_ft_enabled));
  apply_variant(n, Variant::Set);
  CHECK((n.pcr_enabled && n.ecc_enabled && !n.hard_ft_enabled));
  apply_variant(n, Variant::Feto);
  CHECK((n.pcr_enabled && n.ecc_enabled && n.hard_ft_enabled));
  for (auto v : {Variant::Baseline, Variant::Fto3d, Variant::Set, Variant::Feto}) {
    CHECK(parse_variant(to_string(v)) == v);
  }
  CHECK_FALSE(parse_variant("turbo").has_value());
}

TEST_CASE("config JSON round trip") {
  ExperimentConfig c;
  c.network.dims = {5, 5, 4};
  c.dims_set = true;
  c.variant = Variant::Set;
  c.hard_rate = 15;
  c.soft_rate = 20;
  c.traffic.kind = BenchmarkKind::Transpose;
  c.seeds = {3, 4};
  c.sweep.variants = {Variant::Baseline, Variant::Feto};
  c.mttf.experiments = 17;
  const auto back = config_from_json(config_to_json(c));
  CHECK(config_to_json(back) == config_to_json(c));
  CHECK(back.network.dims == Dims{5, 5, 4});
  CHECK(back.seeds == std::vector<std::uint64_t>{3, 4});
  CHECK(back.mttf.experiments == 17);
}

TEST_CASE("config errors name the offending key") {
  CHECK_THROWS_WITH(config_from_json(R"({"trafic": {}})"), doctest::Contains("trafic"));
  CHECK_THROWS_WITH(config_from_json(R"({"faults": {"hard_rate": "x"}})"), doctest::Contains("faults.hard_rate"));
  ExperimentConfig c;
  c.seeds.clear();
  CHECK_THROWS_WITH(c.validate(), doctest::Contains("seeds"));
  CHECK_THROWS_WITH(load_config("/nonexistent/cfg.json"), doctest::Contains("/nonexistent/cfg.json"));
}

TEST_CASE("provenance header") {
  const auto h = provenance_header(ExperimentConfig{});
  CHECK(h.rfind("# ftnoc " + std::string(kVersion), 0) == 0);
  CHECK(h.find("\n# config {") != std::string::npos);
}

TEST_CASE("sweep points enumerate the full matrix") {
  ExperimentConfig c;
  c.sweep.hard_rates = {0, 10, 20};
  c.sweep.soft_rates = {0, 5};
  c.sweep.variants = {Variant::Baseline, Variant::Feto};
  c.sweep.benchmarks = {BenchmarkKind::Uniform};
  c.seeds = {1, 2};
  CHECK(sweep_points(c).size() == 24);
}

TEST_CASE("run writes provenance-tagged outputs") {
  TempDir d("ftnoc_cli_run");
  const auto r = invoke({"run", "--benchmark", "uniform", "--dims", "3x3x3", "--packets", "100",
                         "--seed", "1,2", "--out", d.path.string()});
  REQUIRE_MESSAGE(r.rc == 0, r.err);
  const auto csv = lines_of(d.path / "run.csv");
  REQUIRE(csv.size() == 5);
  CHECK(csv[0].rfind("# ftnoc ", 0) == 0);
  CHECK(csv[1].rfind("# config ", 0) == 0);
  CHECK(csv[2].rfind("benchmark,dims,variant,hard_rate,soft_rate,seed,", 0) == 0);
  CHECK(fs::exists(d.path / "run.json"));
}

TEST_CASE("sweep writes one row per cell") {
  TempDir d("ftnoc_cli_sweep");
  const auto r = invoke({"sweep", "--dims", "3x3x3", "--packets", "60", "--rates", "0,10",
                         "--variants", "baseline,feto", "--benchmarks", "uniform,transpose",
                         "--seed", "1,2", "--out", d.path.string()});
  REQUIRE_MESSAGE(r.rc == 0, r.err);
  int rows = 0;
  for (const auto& l : lines_of(d.path / "sweep.csv")) {
    if (!l.empty() && l[0] != '#') ++rows;
  }
  CHECK(rows - 1 == 2 * 2 * 2 * 2);
  CHECK(fs::exists(d.path / "sweep_summary.json"));
}

TEST_CASE("usage errors exit with status 2") {
  CHECK(invoke({"run", "--seed", ""}).rc == 2);
  const auto t = invoke({"run", "--benchmark", "table", "--table", "/nonexistent/flows.csv"});
  CHECK(t.rc == 2);
  CHECK(t.err.find("/nonexistent/flows.csv") != std::string::npos);
  CHECK(invoke({"run", "--no-such-flag"}).rc == 2);
  CHECK(invoke({"run", "--variant", "turbo"}).rc == 2);
}

TEST_CASE("selftest passes and detects injected defects") {
  const auto ok = invoke({"selftest"});
  CHECK_MESSAGE(ok.rc == 0, ok.out);
  CHECK(ok.out.find("FAIL") == std::string::npos);
  const auto hm = invoke({"selftest", "--corrupt-hmatrix"});
  CHECK(hm.rc == 1);
  CHECK(hm.out.find("FAIL secded") != std::string::npos);
  const auto rng = invoke({"selftest", "--perturb-rng"});
  CHECK(rng.rc == 1);
  CHECK(rng.out.find("FAIL determinism") != std::string::npos);
}

TEST_CASE("dump-hmatrix prints six rows") {
  const auto r = invoke({"dump-hmatrix"});
  CHECK(r.rc == 0);
  int rows = 0;
  for (char ch : r.out) rows += ch == '\n';
  CHECK(rows >= 6);
  CHECK(r.out.find("1 1 1 0 1 1 0 1 0 0 1 1 0 1 0 0 1 0 0 0 0 0") != std::string::npos);
}

}
