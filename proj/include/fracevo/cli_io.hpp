#pragma once

// Run configuration (JSON), trajectory CSV and manifest output, and the
// drivers behind the command-line subcommands.

#include <fracevo/analysis.hpp>
#include <fracevo/core.hpp>
#include <fracevo/evolution.hpp>
#include <fracevo/operators.hpp>
#include <fracevo/special_fn.hpp>

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#ifndef FRACEVO_VERSION
#define FRACEVO_VERSION "0.0.0"
#endif

namespace fracevo::io {

using json = nlohmann::json;

inline constexpr const char* kVersion = FRACEVO_VERSION;

enum class OperatorKind { diagonal, schrodinger1d, integrodiff };
enum class SolverKind { spectral, l1, volterra, subordination };
enum class GridKind { uniform, log };

// ---------------------------------------------------------------------------
// Config types
// ---------------------------------------------------------------------------

struct DampingSpec {
  std::string preset = "constant";  // constant | indicator | bump | samples
  Real value = 0.0;
  Real x1 = 0.0, x2 = 0.0, scale = 1.0;
  Real center = 0.0, width = 1.0, amplitude = 1.0;
  std::vector<Real> samples;
  bool operator==(const DampingSpec&) const = default;
};

struct OperatorSpec {
  OperatorKind kind = OperatorKind::diagonal;
  std::vector<Complex> eigenvalues;
  std::size_t n = 0;
  Real length = 0.0;
  std::optional<DampingSpec> damping;
  bool diagonalize = false;
  bool operator==(const OperatorSpec&) const = default;
};

struct InitialSpec {
  std::string preset = "all_ones";  // all_ones | first_eigenvector | random
  std::uint64_t seed = 0;
  bool operator==(const InitialSpec&) const = default;
};

struct GridSpec {
  GridKind kind = GridKind::uniform;
  Real dt = 0.0;
  std::optional<std::size_t> n_steps;
  std::optional<Real> horizon;
  Real decade_lo = 0.0, decade_hi = 0.0;
  std::size_t points_per_decade = 0;
  bool operator==(const GridSpec&) const = default;
};

struct OutputSpec {
  std::string trajectory = "trajectory.csv";
  std::string manifest = "manifest.json";
  std::vector<std::size_t> components{0};
  bool operator==(const OutputSpec&) const = default;
};

struct AnalysisSpec {
  DecayKind model = DecayKind::polynomial;
  std::optional<std::pair<Real, Real>> window;
  bool operator==(const AnalysisSpec&) const = default;
};

struct ResolventSpec {
  Real mu_min = -200.0, mu_max = 200.0;
  std::size_t points = 801;
  std::string method = "automatic";  // automatic | dense_svd | inverse_iteration
  bool operator==(const ResolventSpec&) const = default;
};

struct RunConfig {
  OperatorSpec op;
  Real alpha = 0.5;
  Real eta = 0.0;
  InitialSpec initial;
  GridSpec grid;
  SolverKind solver = SolverKind::spectral;
  OutputSpec output;
  std::optional<AnalysisSpec> analysis;
  ResolventSpec resolvent;
  bool operator==(const RunConfig&) const = default;
};

// ---------------------------------------------------------------------------
// Enum names
// ---------------------------------------------------------------------------

inline const char* to_string(OperatorKind k) {
  switch (k) {
    case OperatorKind::diagonal: return "diagonal";
    case OperatorKind::schrodinger1d: return "schrodinger1d";
    case OperatorKind::integrodiff: return "integrodiff";
  }
  return "?";
}

inline const char* to_string(SolverKind k) {
  switch (k) {
    case SolverKind::spectral: return "spectral";
    case SolverKind::l1: return "l1";
    case SolverKind::volterra: return "volterra";
    case SolverKind::subordination: return "subordination";
  }
  return "?";
}

inline const char* model_name(DecayKind k) { return k == DecayKind::exponential ? "exp" : "poly"; }

inline std::optional<DecayKind> parse_model(const std::string& s) {
  if (s == "exp" || s == "exponential") return DecayKind::exponential;
  if (s == "poly" || s == "polynomial") return DecayKind::polynomial;
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Number formatting
// ---------------------------------------------------------------------------

/// Shortest round-trip decimal form, '.' separator, "nan"/"inf" for non-finite values.
inline std::string format_real(Real x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, r.ptr);
}

// ---------------------------------------------------------------------------
// JSON <-> RunConfig
// ---------------------------------------------------------------------------

namespace detail {

class Validator {
 public:
  void fail(const std::string& field, const std::string& reason) { issues_.emplace_back(field, reason); }

  void raise_if_any() const {
    if (issues_.empty()) return;
    std::string reason = issues_.front().second;
    for (std::size_t i = 1; i < issues_.size(); ++i) {
      reason += "; " + issues_[i].first + ": " + issues_[i].second;
    }
    throw ValidationError(issues_.front().first, reason);
  }

  bool ok() const noexcept { return issues_.empty(); }

 private:
  std::vector<std::pair<std::string, std::string>> issues_;
};

inline std::optional<Real> get_real(const json& j, const char* key, const std::string& path, Validator& v) {
  if (!j.contains(key)) return std::nullopt;
  const json& x = j.at(key);
  if (!x.is_number()) {
    v.fail(path + "." + key, "must be a number");
    return std::nullopt;
  }
  const Real r = x.get<Real>();
  if (!std::isfinite(r)) {
    v.fail(path + "." + key, "must be finite");
    return std::nullopt;
  }
  return r;
}

inline std::optional<std::size_t> get_count(const json& j, const char* key, const std::string& path,
                                            Validator& v) {
  if (!j.contains(key)) return std::nullopt;
  const json& x = j.at(key);
  if (!x.is_number_integer() || x.get<std::int64_t>() < 0) {
    v.fail(path + "." + key, "must be a non-negative integer");
    return std::nullopt;
  }
  return static_cast<std::size_t>(x.get<std::int64_t>());
}

inline std::optional<std::string> get_string(const json& j, const char* key, const std::string& path,
                                             Validator& v) {
  if (!j.contains(key)) return std::nullopt;
  if (!j.at(key).is_string()) {
    v.fail(path + "." + key, "must be a string");
    return std::nullopt;
  }
  return j.at(key).get<std::string>();
}

inline json complex_to_json(Complex z) {
  if (z.imag() == 0.0) return z.real();
  return json::array({z.real(), z.imag()});
}

inline std::optional<Complex> complex_from_json(const json& x) {
  if (x.is_number()) return Complex(x.get<Real>(), 0.0);
  if (x.is_array() && x.size() == 2 && x[0].is_number() && x[1].is_number()) {
    return Complex(x[0].get<Real>(), x[1].get<Real>());
  }
  if (x.is_object() && x.contains("re") && x.contains("im") && x["re"].is_number() && x["im"].is_number()) {
    return Complex(x["re"].get<Real>(), x["im"].get<Real>());
  }
  return std::nullopt;
}

inline DampingSpec parse_damping(const json& j, const std::string& path, Validator& v) {
  DampingSpec d;
  if (!j.is_object()) {
    v.fail(path, "must be an object");
    return d;
  }
  d.preset = get_string(j, "preset", path, v).value_or("");
  if (d.preset == "constant") {
    const auto val = get_real(j, "value", path, v);
    if (!val) v.fail(path + ".value", "required for the constant preset");
    d.value = val.value_or(0.0);
    if (d.value < 0.0) v.fail(path + ".value", "damping must be non-negative");
  } else if (d.preset == "indicator") {
    const auto x1 = get_real(j, "x1", path, v), x2 = get_real(j, "x2", path, v);
    if (!x1) v.fail(path + ".x1", "required for the indicator preset");
    if (!x2) v.fail(path + ".x2", "required for the indicator preset");
    d.x1 = x1.value_or(0.0);
    d.x2 = x2.value_or(0.0);
    d.scale = get_real(j, "scale", path, v).value_or(1.0);
    if (x1 && x2 && !(d.x1 < d.x2)) v.fail(path + ".x2", "must exceed x1");
    if (d.scale < 0.0) v.fail(path + ".scale", "damping must be non-negative");
  } else if (d.preset == "bump") {
    const auto c = get_real(j, "center", path, v), w = get_real(j, "width", path, v);
    if (!c) v.fail(path + ".center", "required for the bump preset");
    if (!w) v.fail(path + ".width", "required for the bump preset");
    d.center = c.value_or(0.0);
    d.width = w.value_or(1.0);
    d.amplitude = get_real(j, "amplitude", path, v).value_or(1.0);
    if (w && !(d.width > 0.0)) v.fail(path + ".width", "must be positive");
    if (d.amplitude < 0.0) v.fail(path + ".amplitude", "damping must be non-negative");
  } else if (d.preset == "samples") {
    if (!j.contains("samples") || !j["samples"].is_array()) {
      v.fail(path + ".samples", "required array of non-negative numbers");
    } else {
      const json& s = j["samples"];
      for (std::size_t i = 0; i < s.size(); ++i) {
        const std::string p = path + ".samples[" + std::to_string(i) + "]";
        if (!s[i].is_number()) {
          v.fail(p, "must be a number");
          d.samples.push_back(0.0);
          continue;
        }
        const Real x = s[i].get<Real>();
        if (!(x >= 0.0) || !std::isfinite(x)) v.fail(p, "damping must be non-negative and finite");
        d.samples.push_back(x);
      }
    }
  } else {
    v.fail(path + ".preset", "must be one of constant, indicator, bump, samples");
  }
  return d;
}

inline json damping_to_json(const DampingSpec& d) {
  json j{{"preset", d.preset}};
  if (d.preset == "constant") {
    j["value"] = d.value;
  } else if (d.preset == "indicator") {
    j["x1"] = d.x1;
    j["x2"] = d.x2;
    j["scale"] = d.scale;
  } else if (d.preset == "bump") {
    j["center"] = d.center;
    j["width"] = d.width;
    j["amplitude"] = d.amplitude;
  } else {
    j["samples"] = d.samples;
  }
  return j;
}

inline OperatorSpec parse_operator(const json& j, Validator& v) {
  const std::string path = "operator";
  OperatorSpec op;
  if (!j.is_object()) {
    v.fail(path, "must be an object");
    return op;
  }
  const auto kind = get_string(j, "kind", path, v);
  if (kind == "diagonal") {
    op.kind = OperatorKind::diagonal;
  } else if (kind == "schrodinger1d") {
    op.kind = OperatorKind::schrodinger1d;
  } else if (kind == "integrodiff") {
    op.kind = OperatorKind::integrodiff;
  } else {
    v.fail(path + ".kind", "must be one of diagonal, schrodinger1d, integrodiff");
    return op;
  }
  if (j.contains("eigenvalues")) {
    const json& e = j["eigenvalues"];
    if (!e.is_array() || e.empty()) {
      v.fail(path + ".eigenvalues", "must be a non-empty array");
    } else {
      for (std::size_t i = 0; i < e.size(); ++i) {
        const auto z = complex_from_json(e[i]);
        if (!z) v.fail(path + ".eigenvalues[" + std::to_string(i) + "]", "must be a number or [re, im]");
        op.eigenvalues.push_back(z.value_or(Complex{}));
      }
    }
  }
  op.n = get_count(j, "n", path, v).value_or(0);
  op.length = get_real(j, "length", path, v).value_or(0.0);
  if (j.contains("damping")) op.damping = parse_damping(j["damping"], path + ".damping", v);
  if (j.contains("diagonalize")) {
    if (!j["diagonalize"].is_boolean()) {
      v.fail(path + ".diagonalize", "must be a boolean");
    } else {
      op.diagonalize = j["diagonalize"].get<bool>();
    }
  }

  switch (op.kind) {
    case OperatorKind::diagonal:
      if (op.eigenvalues.empty() && !j.contains("eigenvalues")) {
        v.fail(path + ".eigenvalues", "required for the diagonal operator");
      }
      break;
    case OperatorKind::schrodinger1d:
      if (op.n < 3) v.fail(path + ".n", "mesh size must be at least 3");
      if (!(op.length > 0.0)) v.fail(path + ".length", "must be positive");
      if (!op.damping) v.fail(path + ".damping", "required for schrodinger1d");
      break;
    case OperatorKind::integrodiff:
      if (!op.damping) v.fail(path + ".damping", "required for integrodiff");
      if (!op.eigenvalues.empty()) {
        for (std::size_t i = 0; i < op.eigenvalues.size(); ++i) {
          if (!(op.eigenvalues[i].real() > 0.0) || op.eigenvalues[i].imag() != 0.0) {
            v.fail(path + ".eigenvalues[" + std::to_string(i) + "]", "A must be positive definite");
          }
        }
      } else {
        if (op.n < 1) v.fail(path + ".n", "mesh size must be at least 1");
        if (!(op.length > 0.0)) v.fail(path + ".length", "must be positive");
      }
      if (op.diagonalize) v.fail(path + ".diagonalize", "not supported for integrodiff");
      break;
  }
  if (op.damping) {
    const bool mesh = op.kind == OperatorKind::schrodinger1d ||
                      (op.kind == OperatorKind::integrodiff && op.eigenvalues.empty());
    const std::size_t dim = mesh ? op.n : op.eigenvalues.size();
    if (op.kind == OperatorKind::diagonal) v.fail(path + ".damping", "not used by the diagonal operator");
    if (op.damping->preset == "samples" && op.damping->samples.size() != dim) {
      v.fail(path + ".damping.samples", "expected " + std::to_string(dim) + " entries");
    }
    if (!mesh && (op.damping->preset == "indicator" || op.damping->preset == "bump")) {
      v.fail(path + ".damping.preset", "mesh presets need n and length");
    }
  }
  return op;
}

inline json operator_to_json(const OperatorSpec& op) {
  json j{{"kind", to_string(op.kind)}};
  if (!op.eigenvalues.empty()) {
    json e = json::array();
    for (const Complex& z : op.eigenvalues) e.push_back(complex_to_json(z));
    j["eigenvalues"] = e;
  }
  if (op.n > 0) j["n"] = op.n;
  if (op.length > 0.0) j["length"] = op.length;
  if (op.damping) j["damping"] = damping_to_json(*op.damping);
  if (op.diagonalize) j["diagonalize"] = true;
  return j;
}

inline GridSpec parse_grid(const json& j, Validator& v) {
  const std::string path = "grid";
  GridSpec g;
  if (!j.is_object()) {
    v.fail(path, "must be an object");
    return g;
  }
  if (j.contains("log_decades")) {
    g.kind = GridKind::log;
    const json& d = j["log_decades"];
    if (!d.is_array() || d.size() != 2 || !d[0].is_number() || !d[1].is_number()) {
      v.fail(path + ".log_decades", "must be [lo, hi] exponents of ten");
    } else {
      g.decade_lo = d[0].get<Real>();
      g.decade_hi = d[1].get<Real>();
      if (!(g.decade_lo < g.decade_hi)) v.fail(path + ".log_decades", "lo must be below hi");
    }
    g.points_per_decade = get_count(j, "points_per_decade", path, v).value_or(0);
    if (g.points_per_decade < 1) v.fail(path + ".points_per_decade", "must be at least 1");
    return g;
  }
  const auto dt = get_real(j, "dt", path, v);
  if (!dt || !(*dt > 0.0)) v.fail(path + ".dt", "must be positive");
  g.dt = dt.value_or(0.0);
  g.n_steps = get_count(j, "n_steps", path, v);
  g.horizon = get_real(j, "horizon", path, v);
  if (g.n_steps && g.horizon) v.fail(path, "give either n_steps or horizon, not both");
  if (!g.n_steps && !g.horizon) v.fail(path + ".n_steps", "n_steps or horizon is required");
  if (g.n_steps && *g.n_steps < 1) v.fail(path + ".n_steps", "empty horizon: need at least one step");
  if (g.horizon && !(*g.horizon > 0.0)) v.fail(path + ".horizon", "empty horizon: must be positive");
  if (g.horizon && g.dt > 0.0 && *g.horizon > 0.0 && std::llround(*g.horizon / g.dt) < 1) {
    v.fail(path + ".horizon", "shorter than one step");
  }
  const Real steps = g.n_steps ? static_cast<Real>(*g.n_steps) : (g.dt > 0.0 ? g.horizon.value_or(0.0) / g.dt : 0.0);
  if (steps > static_cast<Real>(kMaxTimeSteps)) {
    v.fail(path, "more than " + std::to_string(kMaxTimeSteps) + " steps");
  }
  return g;
}

inline json grid_to_json(const GridSpec& g) {
  if (g.kind == GridKind::log) {
    return json{{"log_decades", {g.decade_lo, g.decade_hi}}, {"points_per_decade", g.points_per_decade}};
  }
  json j{{"dt", g.dt}};
  if (g.n_steps) j["n_steps"] = *g.n_steps;
  if (g.horizon) j["horizon"] = *g.horizon;
  return j;
}

}  // namespace detail

/// Validates a parsed JSON document. A manifest is accepted through its "config" key.
inline RunConfig parse_config(const json& doc) {
  const json& j = (doc.is_object() && doc.contains("config") && doc["config"].is_object()) ? doc["config"] : doc;
  if (!j.is_object()) throw ParseError("configuration root must be a JSON object");
  detail::Validator v;
  RunConfig c;

  if (!j.contains("operator")) {
    v.fail("operator", "required");
  } else {
    c.op = detail::parse_operator(j["operator"], v);
  }

  if (!j.contains("params") || !j["params"].is_object()) {
    v.fail("params", "required object with alpha (and optional eta)");
  } else {
    const auto a = detail::get_real(j["params"], "alpha", "params", v);
    if (!a) {
      v.fail("params.alpha", "required");
    } else if (!(*a > 0.0 && *a < 1.0)) {
      v.fail("params.alpha", "must lie in (0,1), got " + format_real(*a));
    }
    c.alpha = a.value_or(0.5);
    c.eta = detail::get_real(j["params"], "eta", "params", v).value_or(0.0);
    if (c.eta < 0.0) v.fail("params.eta", "must be >= 0");
  }

  if (j.contains("initial")) {
    const json& i = j["initial"];
    if (!i.is_object()) {
      v.fail("initial", "must be an object");
    } else {
      c.initial.preset = detail::get_string(i, "preset", "initial", v).value_or("all_ones");
      if (c.initial.preset != "all_ones" && c.initial.preset != "first_eigenvector" &&
          c.initial.preset != "random") {
        v.fail("initial.preset", "must be one of all_ones, first_eigenvector, random");
      }
      if (i.contains("seed")) {
        if (!i["seed"].is_number_unsigned()) {
          v.fail("initial.seed", "must be a non-negative integer");
        } else {
          c.initial.seed = i["seed"].get<std::uint64_t>();
        }
      }
    }
  }

  if (!j.contains("grid")) {
    v.fail("grid", "required");
  } else {
    c.grid = detail::parse_grid(j["grid"], v);
  }

  const std::string solver = j.contains("solver") && j["solver"].is_string() ? j["solver"].get<std::string>() : "";
  if (solver == "spectral") {
    c.solver = SolverKind::spectral;
  } else if (solver == "l1") {
    c.solver = SolverKind::l1;
  } else if (solver == "volterra") {
    c.solver = SolverKind::volterra;
  } else if (solver == "subordination") {
    c.solver = SolverKind::subordination;
  } else {
    v.fail("solver", "must be one of spectral, l1, volterra, subordination");
  }

  if (j.contains("output")) {
    const json& o = j["output"];
    if (!o.is_object()) {
      v.fail("output", "must be an object");
    } else {
      c.output.trajectory = detail::get_string(o, "trajectory", "output", v).value_or(c.output.trajectory);
      c.output.manifest = detail::get_string(o, "manifest", "output", v).value_or(c.output.manifest);
      if (o.contains("components")) {
        c.output.components.clear();
        const json& comp = o["components"];
        if (!comp.is_array()) {
          v.fail("output.components", "must be an array of indices");
        } else {
          for (std::size_t i = 0; i < comp.size(); ++i) {
            if (!comp[i].is_number_unsigned()) {
              v.fail("output.components[" + std::to_string(i) + "]", "must be a non-negative integer");
            } else {
              c.output.components.push_back(comp[i].get<std::size_t>());
            }
          }
        }
      }
    }
  }

  if (j.contains("analysis")) {
    const json& a = j["analysis"];
    AnalysisSpec as;
    if (!a.is_object()) {
      v.fail("analysis", "must be an object");
    } else {
      const auto m = detail::get_string(a, "model", "analysis", v);
      const auto k = m ? parse_model(*m) : std::nullopt;
      if (!k) v.fail("analysis.model", "must be exp or poly");
      as.model = k.value_or(DecayKind::polynomial);
      if (a.contains("window")) {
        const json& w = a["window"];
        if (!w.is_array() || w.size() != 2 || !w[0].is_number() || !w[1].is_number() ||
            !(w[0].get<Real>() < w[1].get<Real>())) {
          v.fail("analysis.window", "must be [t_lo, t_hi] with t_lo < t_hi");
        } else {
          as.window = std::make_pair(w[0].get<Real>(), w[1].get<Real>());
        }
      }
    }
    c.analysis = as;
  }

  if (j.contains("resolvent")) {
    const json& r = j["resolvent"];
    if (!r.is_object()) {
      v.fail("resolvent", "must be an object");
    } else {
      c.resolvent.mu_min = detail::get_real(r, "mu_min", "resolvent", v).value_or(c.resolvent.mu_min);
      c.resolvent.mu_max = detail::get_real(r, "mu_max", "resolvent", v).value_or(c.resolvent.mu_max);
      c.resolvent.points = detail::get_count(r, "points", "resolvent", v).value_or(c.resolvent.points);
      c.resolvent.method = detail::get_string(r, "method", "resolvent", v).value_or(c.resolvent.method);
      if (!(c.resolvent.mu_min < c.resolvent.mu_max)) v.fail("resolvent.mu_max", "must exceed mu_min");
      if (c.resolvent.points < 2) v.fail("resolvent.points", "must be at least 2");
      if (c.resolvent.method != "automatic" && c.resolvent.method != "dense_svd" &&
          c.resolvent.method != "inverse_iteration") {
        v.fail("resolvent.method", "must be automatic, dense_svd or inverse_iteration");
      }
    }
  }

  // Cross-field compatibility.
  if (v.ok()) {
    const bool diagonal = c.op.kind == OperatorKind::diagonal || c.op.diagonalize;
    if ((c.solver == SolverKind::spectral || c.solver == SolverKind::subordination) && !diagonal) {
      v.fail("solver", std::string(to_string(c.solver)) + " requires a diagonal operator (or diagonalize: true)");
    }
    if (c.op.kind == OperatorKind::integrodiff && c.solver != SolverKind::volterra) {
      v.fail("solver", "integrodiff runs use the volterra solver");
    }
    if (c.op.kind == OperatorKind::integrodiff && c.eta != 0.0) {
      v.fail("params.eta", "integrodiff runs are untempered (eta = 0)");
    }
    if (c.grid.kind == GridKind::log && c.solver != SolverKind::spectral && c.solver != SolverKind::subordination) {
      v.fail("grid.log_decades", "log grids need the spectral or subordination solver");
    }
  }
  v.raise_if_any();
  return c;
}

inline json config_to_json(const RunConfig& c) {
  json j;
  j["operator"] = detail::operator_to_json(c.op);
  j["params"] = {{"alpha", c.alpha}, {"eta", c.eta}};
  j["initial"] = {{"preset", c.initial.preset}};
  if (c.initial.preset == "random") j["initial"]["seed"] = c.initial.seed;
  j["grid"] = detail::grid_to_json(c.grid);
  j["solver"] = to_string(c.solver);
  j["output"] = {{"trajectory", c.output.trajectory},
                 {"manifest", c.output.manifest},
                 {"components", c.output.components}};
  if (c.analysis) {
    j["analysis"] = {{"model", model_name(c.analysis->model)}};
    if (c.analysis->window) j["analysis"]["window"] = {c.analysis->window->first, c.analysis->window->second};
  }
  if (!(c.resolvent == ResolventSpec{})) {
    j["resolvent"] = {{"mu_min", c.resolvent.mu_min},
                      {"mu_max", c.resolvent.mu_max},
                      {"points", c.resolvent.points},
                      {"method", c.resolvent.method}};
  }
  return j;
}

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
  if (!out) throw Error("write failed for " + path.string());
}

inline RunConfig load_config(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw Error("config file not found: " + path.string());
  const std::string text = read_text(path);
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  return parse_config(doc);
}

inline void write_config(const RunConfig& c, const std::filesystem::path& path) {
  write_text(path, config_to_json(c).dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Problem assembly
// ---------------------------------------------------------------------------

inline TimeGrid build_grid(const GridSpec& g) {
  if (g.kind == GridKind::log) throw CapabilityError("log grid has no uniform step");
  if (g.n_steps) return TimeGrid(g.dt, *g.n_steps);
  return TimeGrid::covering(*g.horizon, g.dt);
}

/// Sample times: the uniform grid, or t = 0 followed by the log grid.
inline std::vector<Real> build_times(const GridSpec& g) {
  if (g.kind == GridKind::log) {
    const auto count = static_cast<std::size_t>(
                           std::llround((g.decade_hi - g.decade_lo) * static_cast<Real>(g.points_per_decade))) + 1;
    std::vector<Real> t{0.0};
    for (Real x : log_spaced(std::pow(10.0, g.decade_lo), std::pow(10.0, g.decade_hi), std::max<std::size_t>(count, 2))) {
      t.push_back(x);
    }
    return t;
  }
  return build_grid(g).points();
}

inline DampingProfile build_damping(const DampingSpec& d, std::size_t n, Real length) {
  if (d.preset == "constant") return DampingProfile::constant(n, d.value);
  if (d.preset == "indicator") return DampingProfile::indicator(n, length, d.x1, d.x2, d.scale);
  if (d.preset == "bump") return DampingProfile::bump(n, length, d.center, d.width, d.amplitude);
  return DampingProfile(d.samples);
}

/// Eigenvalues sorted by imaginary part, then by decreasing real part.
inline std::vector<Complex> sorted_spectrum(const LinearOperator& op) {
  const Vector ev = eigenvalues(op);
  std::vector<Complex> s(ev.data(), ev.data() + ev.size());
  std::sort(s.begin(), s.end(), [](Complex a, Complex b) {
    if (a.imag() != b.imag()) return a.imag() < b.imag();
    return a.real() > b.real();
  });
  return s;
}

struct Problem {
  std::optional<LinearOperator> op;
  std::optional<BlockSystemOperator> block;
  Vector u0;
  bool mesh_basis = false;  // u0 lives on mesh nodes (not in an eigenbasis)
};

inline Vector build_initial(const InitialSpec& spec, Eigen::Index dim, bool mesh_basis) {
  Vector u(dim);
  if (spec.preset == "all_ones") {
    u.setOnes();
  } else if (spec.preset == "first_eigenvector") {
    u.setZero();
    if (mesh_basis) {
      const Real h = 1.0 / static_cast<Real>(dim + 1);
      for (Eigen::Index j = 0; j < dim; ++j) u(j) = std::sin(kPi * static_cast<Real>(j + 1) * h);
      u.normalize();
    } else {
      u(0) = 1.0;
    }
  } else {
    std::mt19937_64 rng(spec.seed);
    auto unit = [&rng] { return 2.0 * static_cast<Real>(rng() >> 11) * 0x1.0p-53 - 1.0; };
    for (Eigen::Index j = 0; j < dim; ++j) {
      const Real re = unit();
      const Real im = unit();
      u(j) = Complex(re, im);
    }
  }
  return u;
}

inline Problem build_problem(const RunConfig& c) {
  Problem p;
  const OperatorSpec& s = c.op;
  switch (s.kind) {
    case OperatorKind::diagonal:
      p.op = LinearOperator::diagonal(s.eigenvalues);
      break;
    case OperatorKind::schrodinger1d: {
      const auto a = build_damping(*s.damping, s.n, s.length);
      p.op = damped_schrodinger_1d(s.n, s.length, a);
      p.mesh_basis = true;
      if (s.diagonalize) {
        const auto ev = sorted_spectrum(*p.op);
        p.op = LinearOperator::diagonal(ev);
        p.mesh_basis = false;
      }
      break;
    }
    case OperatorKind::integrodiff: {
      if (s.eigenvalues.empty()) {
        const auto a = build_damping(*s.damping, s.n, s.length);
        p.block = block_operator(dirichlet_laplacian_1d(s.n, s.length), multiplication_operator(a));
        p.mesh_basis = true;
      } else {
        const auto a = build_damping(*s.damping, s.eigenvalues.size(), 1.0);
        p.block = block_operator(LinearOperator::diagonal(s.eigenvalues), multiplication_operator(a));
      }
      break;
    }
  }
  const Eigen::Index dim = p.op ? p.op->dimension() : p.block->half_dimension();
  p.u0 = build_initial(c.initial, dim, p.mesh_basis);
  return p;
}

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<Real>> rows;

  std::size_t column(const std::string& name) const {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw DataError("CSV has no column '" + name + "'");
    return static_cast<std::size_t>(it - header.begin());
  }

  std::vector<Real> values(const std::string& name) const {
    const std::size_t c = column(name);
    std::vector<Real> out;
    out.reserve(rows.size());
    for (const auto& r : rows) out.push_back(r[c]);
    return out;
  }
};

inline std::string to_csv(const CsvTable& t) {
  std::string s;
  for (std::size_t i = 0; i < t.header.size(); ++i) s += (i ? "," : "") + t.header[i];
  s += '\n';
  for (const auto& r : t.rows) {
    for (std::size_t i = 0; i < r.size(); ++i) {
      if (i) s += ',';
      s += format_real(r[i]);
    }
    s += '\n';
  }
  return s;
}

inline Real parse_real(std::string_view field, std::size_t line) {
  while (!field.empty() && (field.front() == ' ' || field.front() == '\t')) field.remove_prefix(1);
  while (!field.empty() && (field.back() == ' ' || field.back() == '\t' || field.back() == '\r')) {
    field.remove_suffix(1);
  }
  if (field == "nan") return std::numeric_limits<Real>::quiet_NaN();
  if (field == "inf") return std::numeric_limits<Real>::infinity();
  if (field == "-inf") return -std::numeric_limits<Real>::infinity();
  Real x = 0.0;
  const auto r = std::from_chars(field.data(), field.data() + field.size(), x);
  if (r.ec != std::errc() || r.ptr != field.data() + field.size()) {
    throw ParseError("CSV line " + std::to_string(line) + ": not a number: '" + std::string(field) + "'");
  }
  return x;
}

inline CsvTable parse_csv(const std::string& text) {
  CsvTable t;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  auto split = [](const std::string& l) {
    std::vector<std::string> f;
    std::string cur;
    for (char ch : l) {
      if (ch == ',') {
        f.push_back(cur);
        cur.clear();
      } else if (ch != '\r') {
        cur += ch;
      }
    }
    f.push_back(cur);
    return f;
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    if (t.header.empty()) {
      t.header = split(line);
      continue;
    }
    const auto f = split(line);
    if (f.size() != t.header.size()) {
      throw ParseError("CSV line " + std::to_string(lineno) + ": expected " + std::to_string(t.header.size()) +
                       " fields");
    }
    std::vector<Real> row;
    row.reserve(f.size());
    for (const auto& x : f) row.push_back(parse_real(x, lineno));
    t.rows.push_back(std::move(row));
  }
  if (t.header.empty()) throw ParseError("CSV is empty (header row is mandatory)");
  return t;
}

inline CsvTable read_csv(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw Error("CSV file not found: " + path.string());
  return parse_csv(read_text(path));
}

inline CsvTable trajectory_table(const Trajectory& tr, const std::vector<std::size_t>& components) {
  CsvTable t;
  t.header = {"t", "norm_X"};
  for (std::size_t k : components) {
    t.header.push_back("re_" + std::to_string(k));
    t.header.push_back("im_" + std::to_string(k));
  }
  for (std::size_t i = 0; i < tr.size(); ++i) {
    std::vector<Real> r{tr.times[i], norm_x(tr.states[i])};
    for (std::size_t k : components) {
      const Complex z = tr.states[i](static_cast<Eigen::Index>(k));
      r.push_back(z.real());
      r.push_back(z.imag());
    }
    t.rows.push_back(std::move(r));
  }
  return t;
}

inline CsvTable trajectory_table(const IntegroTrajectory& tr, const std::vector<std::size_t>& components) {
  CsvTable t;
  t.header = {"t", "norm_X", "norm_X_half"};
  for (std::size_t k : components) {
    t.header.push_back("re_" + std::to_string(k));
    t.header.push_back("im_" + std::to_string(k));
  }
  for (std::size_t i = 0; i < tr.times.size(); ++i) {
    std::vector<Real> r{tr.times[i], tr.norm_u_x[i], tr.norm_w_xhalf[i]};
    for (std::size_t k : components) {
      const Complex z = tr.u[i](static_cast<Eigen::Index>(k));
      r.push_back(z.real());
      r.push_back(z.imag());
    }
    t.rows.push_back(std::move(r));
  }
  return t;
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

inline json report_to_json(const DecayReport& r) {
  return json{{"model", model_name(r.kind)}, {"rate", r.rate},           {"t_lo", r.t_lo},
              {"t_hi", r.t_hi},              {"residual", r.residual},   {"bound_constant", r.bound_constant},
              {"points", r.points}};
}

inline json bound_to_json(const DecayBound& b) {
  return json{{"constant", b.constant}, {"tail_trend", b.tail_trend}, {"bounded", b.bounded}};
}

// ---------------------------------------------------------------------------
// Runs
// ---------------------------------------------------------------------------

struct RunOptions {
  std::filesystem::path out_dir = ".";
  std::optional<std::uint64_t> seed;
  Real tol = 1e-11;  // relative quadrature tolerance for subordination
};

struct RunResult {
  json manifest;
  std::filesystem::path trajectory_path;
  std::filesystem::path manifest_path;
};

namespace detail {

inline json tolerances(const RunConfig& c, const RunOptions& o) {
  json t{{"mittag_leffler_rel_target", 1e-13}, {"wright_series_bound", 1e-13}};
  if (c.solver == SolverKind::subordination) {
    t["subordination_tail"] = kSubordinationTail;
    t["subordination_rel"] = o.tol;
  }
  if (c.solver == SolverKind::l1 || c.solver == SolverKind::volterra) {
    t["step"] = c.grid.dt;
  }
  return t;
}

template <typename F>
void add_report(json& reports, bool explicit_request, F&& make) {
  if (explicit_request) {
    reports.push_back(make());
    return;
  }
  try {
    reports.push_back(make());
  } catch (const Error& e) {
    reports.push_back(json{{"skipped", e.what()}});
  }
}

inline Trajectory subordination_run(const LinearOperator& op, const RunConfig& c, const Vector& u0,
                                    const std::vector<Real>& times, Real tol) {
  const FractionalParams params(c.alpha, c.eta);
  const auto S = diagonal_semigroup(op);
  Trajectory tr{times, {}, params, op.fingerprint()};
  for (Real t : times) {
    if (t == 0.0) {
      tr.states.push_back(u0);
    } else {
      tr.states.push_back(std::exp(-c.eta * t) * subordinate(S, c.alpha, t, u0, tol));
    }
  }
  return tr;
}

}  // namespace detail

/// Runs a validated config: writes the trajectory CSV and the manifest JSON under
/// options.out_dir and returns the manifest.
inline RunResult run(RunConfig c, const RunOptions& options = {}) {
  if (options.seed) c.initial.seed = *options.seed;
  const auto start = std::chrono::steady_clock::now();
  const Problem p = build_problem(c);
  const FractionalParams params(c.alpha, c.eta);
  const Eigen::Index dim = p.op ? p.op->dimension() : p.block->half_dimension();
  for (std::size_t k : c.output.components) {
    if (static_cast<Eigen::Index>(k) >= dim) {
      throw ValidationError("output.components", "index " + std::to_string(k) + " exceeds dimension");
    }
  }

  json reports = json::array();
  CsvTable table;
  const bool explicit_analysis = c.analysis.has_value();
  const DecayKind kind = c.analysis ? c.analysis->model : (c.eta > 0.0 ? DecayKind::exponential : DecayKind::polynomial);
  std::optional<FitWindow> window;
  if (c.analysis && c.analysis->window) window = FitWindow{c.analysis->window->first, c.analysis->window->second};
  const Real rate = kind == DecayKind::exponential ? c.eta : c.alpha;

  if (p.block) {
    const auto tr = solve_integrodiff(*p.block, c.alpha, p.u0, build_grid(c.grid));
    table = trajectory_table(tr, c.output.components);
    const Real ref = tr.norm_u_x.front() > 0.0 ? tr.norm_u_x.front() : 1.0;
    detail::add_report(reports, explicit_analysis, [&] {
      json r = report_to_json(fit_rate(kind, tr.times, tr.norm_u_x, window, ref));
      r["quantity"] = "norm_X";
      return r;
    });
    detail::add_report(reports, explicit_analysis, [&] {
      json r = report_to_json(fit_rate(kind, tr.times, tr.norm_w_xhalf, window, ref));
      r["quantity"] = "norm_X_half";
      return r;
    });
    json bu = bound_to_json(verify_decay_bound(tr, IntegroComponent::u, DecayKind::polynomial, c.alpha));
    bu["quantity"] = "norm_X";
    json bw = bound_to_json(verify_decay_bound(tr, IntegroComponent::w, DecayKind::polynomial, c.alpha));
    bw["quantity"] = "norm_X_half";
    reports.push_back(json{{"bound", bu}});
    reports.push_back(json{{"bound", bw}});
  } else {
    const auto times = build_times(c.grid);
    Trajectory tr;
    switch (c.solver) {
      case SolverKind::spectral:
        tr = solve_spectral(*p.op, params, p.u0, std::span<const Real>(times));
        break;
      case SolverKind::subordination:
        tr = detail::subordination_run(*p.op, c, p.u0, times, options.tol);
        break;
      case SolverKind::l1:
        tr = solve_l1(*p.op, params, p.u0, build_grid(c.grid));
        break;
      case SolverKind::volterra:
        tr = solve_volterra(*p.op, params, p.u0, build_grid(c.grid));
        break;
    }
    table = trajectory_table(tr, c.output.components);
    const auto norms = tr.norms();
    const Real ref = norms.front() > 0.0 ? norms.front() : 1.0;
    detail::add_report(reports, explicit_analysis, [&] {
      json r = report_to_json(fit_rate(kind, tr.times, norms, window, ref));
      r["quantity"] = "norm_X";
      return r;
    });
    json b = bound_to_json(verify_decay_bound(tr.times, norms, kind, rate, ref));
    b["quantity"] = "norm_X";
    b["model"] = model_name(kind);
    b["rate"] = rate;
    reports.push_back(json{{"bound", b}});
  }

  RunResult out;
  out.trajectory_path = options.out_dir / c.output.trajectory;
  out.manifest_path = options.out_dir / c.output.manifest;
  write_text(out.trajectory_path, to_csv(table));

  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  out.manifest = json{{"config", config_to_json(c)},
                      {"version", kVersion},
                      {"duration_seconds", seconds},
                      {"tolerances", detail::tolerances(c, options)},
                      {"seed", c.initial.seed},
                      {"trajectory", c.output.trajectory},
                      {"reports", reports}};
  write_text(out.manifest_path, out.manifest.dump(2) + "\n");
  return out;
}

// ---------------------------------------------------------------------------
// Subordination check and resolvent scan drivers
// ---------------------------------------------------------------------------

struct SubcheckResult {
  CsvTable table;  // t, max_rel_error
  Real worst = 0.0;
};

/// Compares subordination against the spectral solver at up to `max_points` positive grid times.
inline SubcheckResult subordination_check(const RunConfig& c, Real tol = 1e-11, std::size_t max_points = 50) {
  const Problem p = build_problem(c);
  if (!p.op || !p.op->spectral_data()) {
    throw CapabilityError("subcheck needs a diagonal operator (kind diagonal or diagonalize: true)");
  }
  std::vector<Real> all = build_times(c.grid);
  std::vector<Real> times;
  std::vector<Real> positive;
  for (Real t : all) {
    if (t > 0.0) positive.push_back(t);
  }
  const std::size_t stride = std::max<std::size_t>(1, (positive.size() + max_points - 1) / max_points);
  for (std::size_t i = 0; i < positive.size(); i += stride) times.push_back(positive[i]);
  if (!positive.empty() && times.back() != positive.back()) times.push_back(positive.back());

  const FractionalParams params(c.alpha, 0.0);
  const auto spec = solve_spectral(*p.op, params, p.u0, std::span<const Real>(times));
  const auto S = diagonal_semigroup(*p.op);
  SubcheckResult r;
  r.table.header = {"t", "max_rel_error"};
  for (std::size_t i = 0; i < times.size(); ++i) {
    const Vector s = subordinate(S, c.alpha, times[i], p.u0, tol);
    Real worst = 0.0;
    for (Eigen::Index k = 0; k < s.size(); ++k) {
      const Real denom = std::abs(spec.states[i](k));
      const Real diff = std::abs(s(k) - spec.states[i](k));
      worst = std::max(worst, denom > 0.0 ? diff / denom : diff);
    }
    r.worst = std::max(r.worst, worst);
    r.table.rows.push_back({times[i], worst});
  }
  return r;
}

struct ResolventResult {
  CsvTable table;  // mu, resolvent_norm
  Real sup = 0.0;
  Real max_real_eigenvalue = 0.0;
  Real numerical_abscissa = 0.0;
};

inline ResolventResult resolvent_run(const RunConfig& c) {
  const Problem p = build_problem(c);
  const LinearOperator op = p.op ? *p.op : p.block->as_operator();
  const auto mu = uniform_points(c.resolvent.mu_min, c.resolvent.mu_max, c.resolvent.points);
  ResolventMethod m = ResolventMethod::automatic;
  if (c.resolvent.method == "dense_svd") m = ResolventMethod::dense_svd;
  if (c.resolvent.method == "inverse_iteration") m = ResolventMethod::inverse_iteration;
  const auto norms = resolvent_scan(op, mu, m);
  ResolventResult r;
  r.table.header = {"mu", "resolvent_norm"};
  for (std::size_t i = 0; i < mu.size(); ++i) {
    r.table.rows.push_back({mu[i], norms[i]});
    r.sup = std::max(r.sup, norms[i]);
  }
  r.max_real_eigenvalue = eigenvalues(op).real().maxCoeff();
  r.numerical_abscissa = numerical_abscissa(op);
  return r;
}

// ---------------------------------------------------------------------------
// Special-function tables
// ---------------------------------------------------------------------------

struct SpecialTable {
  CsvTable table;  // arg, value, abs_error_bound
  std::size_t flagged = 0;
  std::vector<std::string> notes;
};

/// E_{alpha,beta}(x) rows; rows whose evaluation cannot be certified carry nan/inf.
inline SpecialTable ml_table(Real alpha, Real beta, std::span<const Real> args) {
  const MittagLefflerParams p(alpha, beta);
  SpecialTable t;
  t.table.header = {"arg", "value", "abs_error_bound"};
  for (Real x : args) {
    try {
      const auto e = mittag_leffler_eval(p, Complex(x, 0.0));
      t.table.rows.push_back({x, e.value.real(), e.error_bound});
    } catch (const AccuracyError& err) {
      t.table.rows.push_back({x, std::numeric_limits<Real>::quiet_NaN(), std::numeric_limits<Real>::infinity()});
      t.notes.push_back(err.what());
      ++t.flagged;
    }
  }
  return t;
}

inline SpecialTable wright_table(Real gamma, std::span<const Real> args) {
  const WrightParams p(gamma);
  SpecialTable t;
  t.table.header = {"arg", "value", "abs_error_bound"};
  for (Real x : args) {
    try {
      const auto e = wright_phi_eval(p, x);
      t.table.rows.push_back({x, e.value, e.error_bound});
    } catch (const AccuracyError& err) {
      t.table.rows.push_back({x, std::numeric_limits<Real>::quiet_NaN(), std::numeric_limits<Real>::infinity()});
      t.notes.push_back(err.what());
      ++t.flagged;
    }
  }
  return t;
}

// ---------------------------------------------------------------------------
// Exit codes
// ---------------------------------------------------------------------------

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitAccuracy = 2;
inline constexpr int kExitValidation = 3;

/// Maps the active exception to the process exit code.
inline int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const AccuracyError*>(&e)) return kExitAccuracy;
  if (dynamic_cast<const ValidationError*>(&e) || dynamic_cast<const ParseError*>(&e) ||
      dynamic_cast<const ParameterError*>(&e) || dynamic_cast<const DomainError*>(&e) ||
      dynamic_cast<const ShapeError*>(&e) || dynamic_cast<const CapabilityError*>(&e)) {
    return kExitValidation;
  }
  return kExitFailure;
}

}  // namespace fracevo::io
