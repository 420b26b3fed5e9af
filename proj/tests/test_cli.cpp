#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "hardy/cli.hpp"
#include "hardy/params.hpp"

using namespace hardy;
using namespace hardy::cli;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("hardy_cli_test_" + std::to_string(::getpid())) / name;
  fs::remove_all(p);
  fs::create_directories(p.parent_path());
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

int tool(const std::string& args, const fs::path& stdout_file = "/dev/null") {
  const char* exe = std::getenv("HARDY_TOOL");
  REQUIRE(exe != nullptr);
  const int status = std::system((std::string(exe) + " " + args + " > " + stdout_file.string() + " 2>/dev/null").c_str());
  return WEXITSTATUS(status);
}

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
  std::vector<std::vector<std::string>> rows;
  std::ifstream in(p);
  for (std::string line; std::getline(in, line);) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    for (std::string c; std::getline(ss, c, ',');) cells.push_back(c);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    rows.push_back(cells);
  }
  return rows;
}

}  // namespace

TEST_CASE("manifest parsing") {
  const auto m = parse_manifest(
      "# comment\ncommand = exponents\nN = 2\nN = 3\nkappa = 0.25\nkappa_range = 0.05 0.15 0.05\n"
      "q = 2\nseed = 17\ntol = 1e-4\njobs = 3\ngrid = 256\n");
  CHECK(m.command == "exponents");
  CHECK(m.N == std::vector<int>{2, 3});
  REQUIRE(m.kappa.size() == 4);
  CHECK(m.kappa[3] == doctest::Approx(0.15));
  CHECK(m.q == std::vector<double>{2.0});
  CHECK(m.seed == 17);
  CHECK(*m.tol == 1e-4);
  CHECK(m.jobs == 3);
  CHECK(m.options.at("grid") == "256");

  const auto j = parse_manifest(R"({"command": "omega", "N": [3], "kappa": [0.125, 0.25], "q": 2, "grid": 128})");
  CHECK(j.command == "omega");
  CHECK(j.kappa.size() == 2);
  CHECK(j.q == std::vector<double>{2.0});
  CHECK(j.options.at("grid") == "128");

  CHECK_THROWS_AS(parse_manifest("N = two\n"), DomainError);
  CHECK_THROWS_AS(parse_manifest("no equals sign\n"), DomainError);
  CHECK_THROWS_AS(parse_manifest("q_range = 2 1 0.1\n"), DomainError);
  CHECK_THROWS_AS(parse_manifest("{broken"), DomainError);
}

TEST_CASE("every command is reachable") {
  CHECK(commands().size() == 17);
  CHECK_FALSE(needs_power("exponents"));
  CHECK(needs_power("bvp-dirac"));
  CHECK_THROWS_AS(needs_power("nonsense"), DomainError);
  CHECK_THROWS_AS(run_point("bvp-dirac", {2, 0.25, std::nullopt}, {}, 1, {}), DomainError);
  CHECK_THROWS_AS(run_point("exponents", {2, 0.25, std::nullopt}, {{"bogus", "1"}}, 1, {}), DomainError);
  const auto out = run_point("exponents", {3, 0.25, 2.0}, {}, 1, {});
  CHECK(out.report["critical_q"].get<double>() == doctest::Approx(7.0 / 3));
}

TEST_CASE("validation failure precedes execution") {
  Manifest m;
  m.command = "exponents";
  m.N = {3};
  m.kappa = {0.1, 0.3};
  m.out = scratch("invalid").string();
  std::ostringstream log;
  CHECK(run_sweep(m, log) == ValidationFailure);
  CHECK_FALSE(fs::exists(m.out));
}

TEST_CASE("empty grid") {
  Manifest m;
  m.command = "exponents";
  m.out = scratch("empty").string();
  std::ostringstream log;
  CHECK(run_sweep(m, log) == Ok);
  CHECK(fs::is_empty(m.out));
}

TEST_CASE("phase diagram reproduces the critical exponent") {
  Manifest m = parse_manifest(
      "command = exponents\nN = 3\nkappa = 0.0625\nkappa = 0.125\nkappa = 0.1875\nkappa = 0.25\nq_range = 1.1 4 0.1\n");
  m.out = scratch("phase").string();
  m.jobs = 4;
  std::ostringstream log;
  REQUIRE(run_sweep(m, log) == Ok);
  const auto rows = read_csv(fs::path(m.out) / "summary.csv");
  REQUIRE(rows.size() == 1 + 4 * 30);
  const auto col = std::find(rows[0].begin(), rows[0].end(), "critical_q") - rows[0].begin();
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const double kappa = std::stod(rows[i][2]);
    const double qc = derive_exponents(make_params(3, kappa)).critical_q;
    CHECK(std::abs(std::stod(rows[i][col]) - qc) <= 1e-12);
  }
  const auto curve = slurp(fs::path(m.out) / "plots" / "critical_q_N3.dat");
  CHECK(curve.find("0.25 2.3333333333333335") != std::string::npos);
}

TEST_CASE("failed runs are recorded, not fatal") {
  Manifest m = parse_manifest("command = bvp-dirac\nN = 2\nkappa = 0.25\nq = 2\nq = 6\nrin = 1e-3\nangles = 17\n");
  m.out = scratch("partial").string();
  std::ostringstream log;
  CHECK(run_sweep(m, log) == PartialFailure);
  const auto bad = slurp(fs::path(m.out) / "runs" / "run_0001.json");
  CHECK(bad.find("\"error\"") != std::string::npos);
  const auto good = slurp(fs::path(m.out) / "runs" / "run_0000.json");
  CHECK(good.find("\"ok\": true") != std::string::npos);
  CHECK(fs::exists(fs::path(m.out) / "tables" / "run_0000_profile_r0.01.csv"));
}

TEST_CASE("tool exit codes") {
  CHECK(tool("exponents --N 3 --kappa 0.25 --q 2") == 0);
  CHECK(tool("exponents --N 3 --kappa 0.3") == 2);
  CHECK(tool("exponents --N 3 --kappa 0.25 --bogus 1") == 2);
  CHECK(tool("bvp dirac --N 2 --kappa 0.25") == 2);
  CHECK(tool("--help") == 0);
  const auto out = scratch("stdout.json");
  REQUIRE(tool("admissible --N 3 --kappa 0.25 --q 3", out) == 0);
  const auto j = Json::parse(slurp(out));
  CHECK(j["dirac_admissible"] == false);
  CHECK(j["points_charged"] == false);
}

TEST_CASE("sweeps are byte-reproducible") {
  const auto dir = scratch("determinism");
  fs::create_directories(dir);
  std::ofstream(dir / "m.txt") << "command = kernel-marcinkiewicz\nN = 3\nkappa = 0.125\nkappa = 0.25\nsamples = 100000\n";
  REQUIRE(tool("--out " + (dir / "a").string() + " --jobs 1 sweep " + (dir / "m.txt").string()) == 0);
  REQUIRE(tool("--out " + (dir / "b").string() + " --jobs 2 sweep " + (dir / "m.txt").string()) == 0);
  for (const auto& f : fs::recursive_directory_iterator(dir / "a")) {
    if (!f.is_regular_file() || f.path().filename() == "metadata.json") continue;
    const auto rel = fs::relative(f.path(), dir / "a");
    CAPTURE(rel.string());
    CHECK(slurp(f.path()) == slurp(dir / "b" / rel));
  }
  CHECK(tool("--seed 5 --out " + (dir / "c").string() + " sweep " + (dir / "m.txt").string()) == 0);
  CHECK(slurp(dir / "a" / "runs" / "run_0000.json") != slurp(dir / "c" / "runs" / "run_0000.json"));
}
