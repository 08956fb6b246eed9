#include <fracevo/cli_io.hpp>

#include <catch_amalgamated.hpp>

#include <sys/wait.h>
#include <unistd.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <string>

using namespace fracevo;
using namespace fracevo::io;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("fracevo_cli_" + std::to_string(::getpid())) / name;
  fs::create_directories(p);
  return p;
}

json minimal_diagonal() {
  return json::parse(R"({
    "operator": {"kind": "diagonal", "eigenvalues": [-1.0]},
    "params": {"alpha": 0.5, "eta": 0.0},
    "grid": {"dt": 0.1, "horizon": 10.0},
    "solver": "spectral"
  })");
}

json schrodinger_config() {
  return json::parse(R"({
    "operator": {"kind": "schrodinger1d", "n": 16, "length": 3.141592653589793,
                 "damping": {"preset": "indicator", "x1": 0.7853981633974483, "x2": 1.5707963267948966}},
    "params": {"alpha": 0.6, "eta": 0.5},
    "initial": {"preset": "random", "seed": 7},
    "grid": {"dt": 0.05, "n_steps": 40},
    "solver": "l1",
    "output": {"components": [0, 3]}
  })");
}

std::string validation_field(const json& doc) {
  try {
    parse_config(doc);
  } catch (const ValidationError& e) {
    return e.field();
  }
  return "";
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(FRACEVO_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  REQUIRE(WIFEXITED(status));
  return WEXITSTATUS(status);
}

}  // namespace

TEST_CASE("minimal config parses", "[cli_io][config]") {
  const auto c = parse_config(minimal_diagonal());
  CHECK(c.op.kind == OperatorKind::diagonal);
  CHECK(c.op.eigenvalues == std::vector<Complex>{Complex(-1.0)});
  CHECK(c.alpha == 0.5);
  CHECK(c.eta == 0.0);
  CHECK(c.solver == SolverKind::spectral);
  CHECK(c.grid.horizon == 10.0);
  CHECK(c.initial.preset == "all_ones");
}

TEST_CASE("validation errors name the field", "[cli_io][config]") {
  auto doc = minimal_diagonal();
  doc["params"]["alpha"] = 1.5;
  CHECK(validation_field(doc) == "params.alpha");
  try {
    parse_config(doc);
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("alpha") != std::string::npos);
  }

  auto neg = schrodinger_config();
  neg["operator"]["damping"] = json::parse(R"({"preset": "samples", "samples": [0.1, 0.0, 0.2, 0.0, 0.0, 0.0, 0.0, 0.0,
                                                                                0.0, 0.0, 0.0, -0.5, 0.0, 0.0, 0.0, 0.0]})");
  CHECK(validation_field(neg) == "operator.damping.samples[11]");

  auto empty = minimal_diagonal();
  empty["grid"] = json{{"dt", 0.1}, {"n_steps", 0}};
  CHECK(validation_field(empty) == "grid.n_steps");

  auto incompatible = schrodinger_config();
  incompatible["solver"] = "spectral";
  CHECK(validation_field(incompatible) == "solver");
  incompatible["operator"]["diagonalize"] = true;
  CHECK(validation_field(incompatible).empty());

  auto missing = minimal_diagonal();
  missing.erase("solver");
  CHECK(validation_field(missing) == "solver");

  CHECK_THROWS_AS(parse_config(json::array()), ParseError);
}

TEST_CASE("config round trip", "[cli_io][config]") {
  const auto dir = scratch("roundtrip");
  std::vector<json> docs{minimal_diagonal(), schrodinger_config()};
  docs.push_back(json::parse(R"({
    "operator": {"kind": "integrodiff", "n": 8, "length": 1.0,
                 "damping": {"preset": "bump", "center": 0.5, "width": 0.2, "amplitude": 2.0}},
    "params": {"alpha": 0.5},
    "initial": {"preset": "first_eigenvector"},
    "grid": {"dt": 0.01, "n_steps": 10},
    "solver": "volterra",
    "analysis": {"model": "poly", "window": [0.05, 0.1]}
  })"));
  docs.push_back(json::parse(R"({
    "operator": {"kind": "diagonal", "eigenvalues": [[-0.1, 1.0], {"re": -2.0, "im": 0.0}]},
    "params": {"alpha": 0.7},
    "grid": {"log_decades": [2, 5], "points_per_decade": 10},
    "solver": "subordination",
    "resolvent": {"mu_min": -5, "mu_max": 5, "points": 11, "method": "dense_svd"}
  })"));
  for (std::size_t i = 0; i < docs.size(); ++i) {
    const auto c = parse_config(docs[i]);
    const auto path = dir / ("c" + std::to_string(i) + ".json");
    write_config(c, path);
    CHECK(load_config(path) == c);
  }
}

TEST_CASE("load_config errors", "[cli_io][config]") {
  const auto dir = scratch("load");
  CHECK_THROWS_AS(load_config(dir / "absent.json"), Error);
  write_text(dir / "bad.json", "{ \"operator\": ");
  CHECK_THROWS_AS(load_config(dir / "bad.json"), ParseError);
}

TEST_CASE("spectral run writes a monotone norm column", "[cli_io][run]") {
  const auto dir = scratch("monotone");
  RunOptions o;
  o.out_dir = dir;
  const auto r = run(parse_config(minimal_diagonal()), o);
  const auto t = read_csv(r.trajectory_path);
  CHECK(t.header.front() == "t");
  const auto n = t.values("norm_X");
  REQUIRE(n.size() == 101);
  CHECK(n.front() == 1.0);
  for (std::size_t i = 1; i < n.size(); ++i) CHECK(n[i] < n[i - 1]);
  CHECK_THAT(n[10], WithinRel(0.42758357615580700442, 1e-12));
  CHECK(r.manifest["version"] == kVersion);
  CHECK(r.manifest.contains("duration_seconds"));
  CHECK(r.manifest.contains("tolerances"));
  // the manifest reproduces the run
  CHECK(parse_config(json::parse(read_text(r.manifest_path))) == parse_config(minimal_diagonal()));
}

TEST_CASE("tempering factor between runs", "[cli_io][run]") {
  const auto dir = scratch("eta");
  auto doc = minimal_diagonal();
  doc["solver"] = "l1";
  doc["grid"] = json{{"dt", 0.01}, {"horizon", 2.0}};
  RunOptions o;
  o.out_dir = dir / "plain";
  const auto plain = read_csv(run(parse_config(doc), o).trajectory_path);
  doc["params"]["eta"] = 2.0;
  o.out_dir = dir / "tempered";
  const auto temp = read_csv(run(parse_config(doc), o).trajectory_path);
  const auto t = plain.values("t");
  const auto a = plain.values("norm_X");
  const auto b = temp.values("norm_X");
  for (std::size_t i = 0; i < t.size(); ++i) CHECK_THAT(b[i], WithinAbs(std::exp(-2.0 * t[i]) * a[i], 1e-15));
}

TEST_CASE("runs are deterministic for a fixed seed", "[cli_io][run]") {
  const auto dir = scratch("det");
  const auto c = parse_config(schrodinger_config());
  RunOptions o;
  o.out_dir = dir / "a";
  const auto a = read_text(run(c, o).trajectory_path);
  o.out_dir = dir / "b";
  const auto b = read_text(run(c, o).trajectory_path);
  CHECK(a == b);
  o.out_dir = dir / "c";
  o.seed = 8;
  const auto other = read_text(run(c, o).trajectory_path);
  CHECK(other != a);
  const auto t = parse_csv(a);
  CHECK(t.header == std::vector<std::string>{"t", "norm_X", "re_0", "im_0", "re_3", "im_3"});
}

TEST_CASE("integrodiff run records both norms", "[cli_io][run]") {
  const auto dir = scratch("integro");
  const auto doc = json::parse(R"({
    "operator": {"kind": "integrodiff", "eigenvalues": [1.0], "damping": {"preset": "constant", "value": 1.0}},
    "params": {"alpha": 0.5},
    "grid": {"dt": 0.01, "horizon": 1.0},
    "solver": "volterra"
  })");
  RunOptions o;
  o.out_dir = dir;
  const auto r = run(parse_config(doc), o);
  const auto t = read_csv(r.trajectory_path);
  CHECK(t.header[2] == "norm_X_half");
  CHECK_THAT(t.values("norm_X").back(), WithinAbs(0.2162429044011394452, 1e-3));
  CHECK(t.values("norm_X_half").front() == 0.0);
}

TEST_CASE("CSV parsing", "[cli_io][csv]") {
  const auto t = parse_csv("t,v\r\n0,1.5\r\n1,nan\n2,-inf\n");
  CHECK(t.rows.size() == 3);
  CHECK(std::isnan(t.rows[1][1]));
  CHECK(t.rows[2][1] == -std::numeric_limits<Real>::infinity());
  CHECK_THROWS_AS(parse_csv("t,v\n0\n"), ParseError);
  CHECK_THROWS_AS(parse_csv("t,v\n0,abc\n"), ParseError);
  CHECK_THROWS_AS(parse_csv(""), ParseError);
  CHECK_THROWS_AS(t.column("missing"), DataError);
  CHECK(format_real(0.1) == "0.1");
  CHECK(parse_real(format_real(1.0 / 3.0), 1) == 1.0 / 3.0);
}

TEST_CASE("special-function tables", "[cli_io][special]") {
  const std::vector<Real> x{0.0, 1.0};
  const auto ml = ml_table(1.0, 1.0, x);
  CHECK(ml.flagged == 0);
  CHECK(ml.table.rows[0][1] == 1.0);
  CHECK_THAT(ml.table.rows[1][1], WithinRel(2.718281828459045, 1e-14));
  const std::vector<Real> zero{0.0};
  CHECK_THAT(ml_table(0.5, 2.5, zero).table.rows[0][1], WithinRel(1.0 / std::tgamma(2.5), 1e-14));
  const auto w = wright_table(0.5, zero);
  CHECK_THAT(w.table.rows[0][1], WithinAbs(0.5641896, 1e-7));
  CHECK(w.table.header.size() == 3);
}

TEST_CASE("resolvent and subordination drivers", "[cli_io][drivers]") {
  auto doc = minimal_diagonal();
  doc["operator"]["eigenvalues"] = json::parse("[[-0.1, 1.0], -1.0]");
  doc["resolvent"] = json{{"mu_min", -3.0}, {"mu_max", 3.0}, {"points", 601}};
  const auto c = parse_config(doc);
  const auto r = resolvent_run(c);
  CHECK_THAT(r.sup, WithinRel(10.0, 1e-12));
  CHECK_THAT(r.max_real_eigenvalue, WithinAbs(-0.1, 1e-12));
  const auto s = subordination_check(c, 1e-11, 10);
  CHECK(s.worst < 1e-6);
  CHECK(s.table.rows.size() <= 11);
}

TEST_CASE("exit codes", "[cli_io][exit]") {
  const auto dir = scratch("exit");
  write_config(parse_config(minimal_diagonal()), dir / "ok.json");
  auto bad = minimal_diagonal();
  bad["params"]["alpha"] = 1.5;
  write_text(dir / "alpha.json", bad.dump());
  write_text(dir / "broken.json", "{ not json");
  const std::string out = " --out " + (dir / "out").string();

  CHECK(run_cli("solve " + (dir / "ok.json").string() + out + " --quiet") == kExitOk);
  CHECK(fs::exists(dir / "out" / "trajectory.csv"));
  CHECK(fs::exists(dir / "out" / "manifest.json"));
  CHECK(run_cli("solve " + (dir / "alpha.json").string() + out) == kExitValidation);
  CHECK(run_cli("solve " + (dir / "broken.json").string() + out) == kExitValidation);
  CHECK(run_cli("solve " + (dir / "missing.json").string() + out) == kExitFailure);
  CHECK(run_cli("subcheck " + (dir / "ok.json").string() + " --threshold 0") == kExitAccuracy);
  CHECK(run_cli("subcheck " + (dir / "ok.json").string()) == kExitOk);
  CHECK(run_cli("ml --alpha 0.5 --args 0,1,-2") == kExitOk);
  CHECK(run_cli("ml --alpha 2.5 --args 0") == kExitValidation);
  CHECK(run_cli("wright --gamma 0.5 --range 0:5:11") == kExitOk);
  CHECK(run_cli("fit " + (dir / "out" / "trajectory.csv").string() + " --model poly") == kExitOk);
  CHECK(run_cli("fit " + (dir / "out" / "trajectory.csv").string() + " --model linear") == kExitValidation);
  CHECK(run_cli("--version") == kExitOk);
  CHECK(run_cli("frobnicate") == kExitValidation);
}

TEST_CASE("sweep runs every config into its own directory", "[cli_io][exit]") {
  const auto dir = scratch("sweep");
  fs::create_directories(dir / "configs");
  write_config(parse_config(minimal_diagonal()), dir / "configs" / "a.json");
  auto doc = minimal_diagonal();
  doc["params"]["eta"] = 1.0;
  write_config(parse_config(doc), dir / "configs" / "b.json");
  CHECK(run_cli("sweep " + (dir / "configs").string() + " --out " + (dir / "o").string()) == kExitOk);
  CHECK(fs::exists(dir / "o" / "a" / "trajectory.csv"));
  CHECK(fs::exists(dir / "o" / "b" / "manifest.json"));
  CHECK(read_text(dir / "o" / "a" / "trajectory.csv") != read_text(dir / "o" / "b" / "trajectory.csv"));
}
