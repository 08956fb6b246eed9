// fracevo: command-line front end for the solvers, special functions and fits.

#include <fracevo/cli_io.hpp>

#include <CLI11.hpp>

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace fs = std::filesystem;
using namespace fracevo;
using fracevo::io::json;

namespace {

struct Globals {
  std::string out;
  std::optional<std::uint64_t> seed;
  double tol = 1e-11;
  bool quiet = false;
};

void say(const Globals& g, const std::string& msg) {
  if (!g.quiet) std::cout << msg << '\n';
}

// Writes to --out when given (a file path), else to stdout.
void emit_table(const Globals& g, const io::CsvTable& t) {
  const std::string text = io::to_csv(t);
  if (g.out.empty()) {
    std::cout << text;
  } else {
    io::write_text(g.out, text);
  }
}

std::vector<Real> parse_args(const std::vector<double>& list, const std::string& range) {
  if (!list.empty()) return list;
  if (range.empty()) throw ParameterError("give --args or --range");
  // lo:hi:count
  const auto a = range.find(':');
  const auto b = range.find(':', a + 1);
  if (a == std::string::npos || b == std::string::npos) throw ParameterError("--range expects lo:hi:count");
  const Real lo = std::stod(range.substr(0, a));
  const Real hi = std::stod(range.substr(a + 1, b - a - 1));
  const auto count = static_cast<std::size_t>(std::stoul(range.substr(b + 1)));
  if (count == 1) return {lo};
  return uniform_points(lo, hi, count);
}

int cmd_solve(const Globals& g, const std::string& config) {
  const auto c = io::load_config(config);
  io::RunOptions o;
  o.out_dir = g.out.empty() ? fs::path(".") : fs::path(g.out);
  o.seed = g.seed;
  o.tol = g.tol;
  const auto r = io::run(c, o);
  say(g, "wrote " + r.trajectory_path.string() + " and " + r.manifest_path.string());
  return io::kExitOk;
}

int cmd_special(const Globals& g, const io::SpecialTable& t) {
  emit_table(g, t.table);
  for (const auto& n : t.notes) std::cerr << "flagged: " << n << '\n';
  return t.flagged ? io::kExitAccuracy : io::kExitOk;
}

int cmd_subcheck(const Globals& g, const std::string& config, double threshold) {
  const auto c = io::load_config(config);
  const auto r = io::subordination_check(c, g.tol);
  emit_table(g, r.table);
  if (!g.quiet) std::cerr << "max relative deviation " << io::format_real(r.worst) << '\n';
  return r.worst <= threshold ? io::kExitOk : io::kExitAccuracy;
}

int cmd_resolvent(const Globals& g, const std::string& config) {
  const auto c = io::load_config(config);
  const auto r = io::resolvent_run(c);
  emit_table(g, r.table);
  if (!g.quiet) {
    std::cerr << "sup " << io::format_real(r.sup) << ", max Re(eigenvalue) "
              << io::format_real(r.max_real_eigenvalue) << ", numerical abscissa "
              << io::format_real(r.numerical_abscissa) << '\n';
  }
  return io::kExitOk;
}

int cmd_fit(const Globals& g, const std::string& csv, const std::string& model, const std::string& column,
            const std::vector<double>& window) {
  const auto kind = io::parse_model(model);
  if (!kind) throw ValidationError("model", "must be exp or poly");
  const auto t = io::read_csv(csv);
  const auto times = t.values("t");
  const auto norms = t.values(column);
  std::optional<FitWindow> w;
  if (!window.empty()) {
    if (window.size() != 2) throw ValidationError("window", "expects two values");
    w = FitWindow{window[0], window[1]};
  }
  const auto rep = fit_rate(*kind, times, norms, w);
  const std::string text = io::report_to_json(rep).dump(2) + "\n";
  if (g.out.empty()) {
    std::cout << text;
  } else {
    io::write_text(g.out, text);
  }
  return io::kExitOk;
}

std::size_t sweep_threads() {
  std::size_t n = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("FRAC_EVO_THREADS")) {
    try {
      const long v = std::stol(env);
      if (v >= 1) n = std::min<std::size_t>(n, static_cast<std::size_t>(v));
    } catch (const std::exception&) {
      // ignore malformed values
    }
  }
  return n;
}

// Runs every *.json in `dir`, each into <out>/<stem>/.
int cmd_sweep(const Globals& g, const std::string& dir) {
  if (!fs::is_directory(dir)) throw Error("sweep directory not found: " + dir);
  std::vector<fs::path> configs;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".json") configs.push_back(e.path());
  }
  std::sort(configs.begin(), configs.end());
  const fs::path out_root = g.out.empty() ? fs::path("sweep_out") : fs::path(g.out);
  std::vector<int> codes(configs.size(), 0);
  std::vector<std::string> messages(configs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < configs.size(); i = next++) {
      try {
        io::RunOptions o;
        o.out_dir = out_root / configs[i].stem();
        o.seed = g.seed;
        o.tol = g.tol;
        io::run(io::load_config(configs[i]), o);
        messages[i] = "ok";
      } catch (const std::exception& e) {
        codes[i] = io::exit_code_for(e);
        messages[i] = e.what();
      }
    }
  };
  const std::size_t n = std::min(sweep_threads(), std::max<std::size_t>(configs.size(), 1));
  std::vector<std::thread> pool;
  for (std::size_t k = 0; k < n; ++k) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  int code = io::kExitOk;
  for (std::size_t i = 0; i < configs.size(); ++i) {
    say(g, configs[i].filename().string() + ": " + messages[i]);
    if (code == io::kExitOk) code = codes[i];
  }
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Tempered fractional evolution solvers and diagnostics"};
  app.set_version_flag("--version", std::string(io::kVersion));
  app.require_subcommand(1);
  app.fallthrough();

  Globals g;
  std::uint64_t seed = 0;
  app.add_option("--out", g.out, "Output directory (solve, sweep) or file (tables, fit)");
  auto* seed_opt = app.add_option("--seed", seed, "Override the random initial-datum seed");
  app.add_option("--tol", g.tol, "Relative quadrature tolerance for subordination");
  app.add_flag("--quiet", g.quiet, "Suppress progress messages");

  std::string config;
  auto* solve = app.add_subcommand("solve", "Run a configuration, write trajectory CSV and manifest");
  solve->add_option("config", config, "Config or manifest JSON")->required();

  double alpha = 0.5, beta = 1.0, gamma = 0.5;
  std::vector<double> args;
  std::string range;
  auto* ml = app.add_subcommand("ml", "Tabulate the Mittag-Leffler function E_{alpha,beta}");
  ml->add_option("--alpha", alpha)->required();
  ml->add_option("--beta", beta);
  ml->add_option("--args", args, "Arguments")->delimiter(',');
  ml->add_option("--range", range, "lo:hi:count");

  auto* wright = app.add_subcommand("wright", "Tabulate the Wright-type density Phi_gamma");
  wright->add_option("--gamma", gamma)->required();
  wright->add_option("--args", args, "Arguments")->delimiter(',');
  wright->add_option("--range", range, "lo:hi:count");

  double threshold = 1e-6;
  auto* subcheck = app.add_subcommand("subcheck", "Compare subordination against the spectral solver");
  subcheck->add_option("config", config)->required();
  subcheck->add_option("--threshold", threshold, "Largest accepted relative deviation");

  auto* resolvent = app.add_subcommand("resolvent", "Scan the resolvent norm along the imaginary axis");
  resolvent->add_option("config", config)->required();

  std::string csv, model, column = "norm_X";
  std::vector<double> window;
  auto* fit = app.add_subcommand("fit", "Fit a decay rate to a trajectory CSV");
  fit->add_option("csv", csv)->required();
  fit->add_option("--model", model)->required()->check(CLI::IsMember({"exp", "poly"}));
  fit->add_option("--column", column, "Norm column");
  fit->add_option("--window", window, "t_lo t_hi")->expected(2);

  std::string dir;
  auto* sweep = app.add_subcommand("sweep", "Run every config in a directory");
  sweep->add_option("dir", dir)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : io::kExitValidation;
  }
  if (seed_opt->count()) g.seed = seed;

  try {
    if (*solve) return cmd_solve(g, config);
    if (*ml) return cmd_special(g, io::ml_table(alpha, beta, parse_args(args, range)));
    if (*wright) return cmd_special(g, io::wright_table(gamma, parse_args(args, range)));
    if (*subcheck) return cmd_subcheck(g, config, threshold);
    if (*resolvent) return cmd_resolvent(g, config);
    if (*fit) return cmd_fit(g, csv, model, column, window);
    if (*sweep) return cmd_sweep(g, dir);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return io::exit_code_for(e);
  }
  return io::kExitOk;
}
