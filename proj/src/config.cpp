#include "khess/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "khess/analysis.hpp"
#include "khess/barriers.hpp"

namespace khess {

using nlohmann::json;

namespace {

void require_object(const json& j, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
}

void reject_unknown(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!allowed.count(it.key())) throw ConfigError(where + ": unknown key '" + it.key() + "'");
}

double get_real(const json& j, const std::string& key, double fallback, const std::string& where) {
  if (!j.contains(key)) return fallback;
  if (!j[key].is_number()) throw ConfigError(where + "." + key + ": expected a number");
  return j[key].get<double>();
}

int get_int(const json& j, const std::string& key, int fallback, const std::string& where) {
  if (!j.contains(key)) return fallback;
  if (!j[key].is_number_integer()) throw ConfigError(where + "." + key + ": expected an integer");
  return j[key].get<int>();
}

bool get_bool(const json& j, const std::string& key, bool fallback, const std::string& where) {
  if (!j.contains(key)) return fallback;
  if (!j[key].is_boolean()) throw ConfigError(where + "." + key + ": expected true or false");
  return j[key].get<bool>();
}

std::string get_string(const json& j, const std::string& key, const std::string& fallback, const std::string& where) {
  if (!j.contains(key)) return fallback;
  if (!j[key].is_string()) throw ConfigError(where + "." + key + ": expected a string");
  return j[key].get<std::string>();
}

std::vector<double> get_reals(const json& j, const std::string& key, const std::vector<double>& fallback,
                              const std::string& where) {
  if (!j.contains(key)) return fallback;
  if (!j[key].is_array()) throw ConfigError(where + "." + key + ": expected a list of numbers");
  std::vector<double> out;
  for (const json& v : j[key]) {
    if (!v.is_number()) throw ConfigError(where + "." + key + ": expected a list of numbers");
    out.push_back(v.get<double>());
  }
  return out;
}

void check_decreasing(const std::vector<double>& v, const std::string& what) {
  if (v.empty()) throw ConfigError("schedule." + what + ": must not be empty");
  for (double x : v)
    if (!(x > 0.0)) throw ConfigError("schedule." + what + ": entries must be positive");
  for (size_t i = 1; i < v.size(); ++i)
    if (!(v[i] < v[i - 1])) throw ConfigError("schedule." + what + ": entries must strictly decrease");
}

}  // namespace

ExperimentConfig config_from_json(const json& j) {
  require_object(j, "config");
  reject_unknown(j, {"schema_version", "name", "problem", "domain", "schedule", "solver", "analysis", "output", "seed"},
                 "config");
  if (j.contains("schema_version") &&
      (!j["schema_version"].is_number_integer() || j["schema_version"].get<int>() != kSchemaVersion))
    throw ConfigError("config.schema_version: expected " + std::to_string(kSchemaVersion));
  ExperimentConfig c;
  c.name = get_string(j, "name", c.name, "config");
  c.output = get_string(j, "output", c.output, "config");
  if (j.contains("seed")) {
    if (!j["seed"].is_number_unsigned()) throw ConfigError("config.seed: expected a non-negative integer");
    c.seed = j["seed"].get<std::uint64_t>();
  }
  if (j.contains("problem")) {
    const json& p = j["problem"];
    require_object(p, "problem");
    reject_unknown(p, {"n", "k"}, "problem");
    if (p.contains("k") && p["k"].is_number() && !p["k"].is_number_integer())
      throw ConfigError("problem.k: must be an integer (k = n/2 needs even n)");
    c.n = get_int(p, "n", c.n, "problem");
    c.k = get_int(p, "k", c.k, "problem");
  }
  if (j.contains("domain")) {
    const json& d = j["domain"];
    require_object(d, "domain");
    DomainConfig& dc = c.domain;
    dc.preset = get_string(d, "preset", dc.preset, "domain");
    std::set<std::string> allowed{"preset", "r0", "R0", "tau0"};
    if (dc.preset == "ball") {
      allowed.insert("radius");
    } else if (dc.preset == "ellipsoid") {
      allowed.insert("semi_axes");
    } else if (dc.preset == "star-perturbed") {
      allowed.insert({"base", "alpha", "lobes"});
    } else {
      throw ConfigError("domain.preset: unknown preset '" + dc.preset + "' (ball, ellipsoid, star-perturbed)");
    }
    reject_unknown(d, allowed, "domain");
    dc.radius = get_real(d, "radius", dc.radius, "domain");
    dc.semi_axes = get_reals(d, "semi_axes", dc.semi_axes, "domain");
    dc.base = get_real(d, "base", dc.base, "domain");
    dc.alpha = get_real(d, "alpha", dc.alpha, "domain");
    dc.lobes = get_int(d, "lobes", dc.lobes, "domain");
    dc.r0 = get_real(d, "r0", dc.r0, "domain");
    dc.R0 = get_real(d, "R0", dc.R0, "domain");
    dc.tau0 = get_real(d, "tau0", dc.tau0, "domain");
  }
  if (j.contains("schedule")) {
    const json& s = j["schedule"];
    require_object(s, "schedule");
    reject_unknown(s, {"epsilon", "r", "h"}, "schedule");
    c.schedule.epsilon = get_reals(s, "epsilon", c.schedule.epsilon, "schedule");
    c.schedule.r = get_reals(s, "r", c.schedule.r, "schedule");
    c.schedule.h = get_reals(s, "h", c.schedule.h, "schedule");
  }
  if (j.contains("solver")) {
    const json& s = j["solver"];
    require_object(s, "solver");
    reject_unknown(s, {"newton_tol", "max_iters", "armijo", "min_step", "gamma_floor", "linear_tol"}, "solver");
    SolverSettings& sv = c.solver;
    sv.newton_tol = get_real(s, "newton_tol", sv.newton_tol, "solver");
    sv.max_iters = get_int(s, "max_iters", sv.max_iters, "solver");
    sv.armijo = get_real(s, "armijo", sv.armijo, "solver");
    sv.min_step = get_real(s, "min_step", sv.min_step, "solver");
    sv.gamma_floor = get_real(s, "gamma_floor", sv.gamma_floor, "solver");
    sv.linear_tol = get_real(s, "linear_tol", sv.linear_tol, "solver");
  }
  if (j.contains("analysis")) {
    const json& a = j["analysis"];
    require_object(a, "analysis");
    reject_unknown(a, {"estimates", "levels", "monotonicity", "inequality", "level_count", "b", "spot_checks"},
                   "analysis");
    AnalysisSettings& as = c.analysis;
    as.estimates = get_bool(a, "estimates", as.estimates, "analysis");
    as.levels = get_bool(a, "levels", as.levels, "analysis");
    as.monotonicity = get_bool(a, "monotonicity", as.monotonicity, "analysis");
    as.inequality = get_bool(a, "inequality", as.inequality, "analysis");
    as.level_count = get_int(a, "level_count", as.level_count, "analysis");
    as.b = get_reals(a, "b", as.b, "analysis");
    as.spot_checks = get_int(a, "spot_checks", as.spot_checks, "analysis");
  }
  return c;
}

ExperimentConfig parse_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config: invalid JSON: ") + e.what());
  }
  return config_from_json(j);
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

json config_to_json(const ExperimentConfig& c) {
  json j;
  j["schema_version"] = kSchemaVersion;
  j["name"] = c.name;
  j["problem"] = {{"n", c.n}, {"k", c.k}};
  json d;
  d["preset"] = c.domain.preset;
  if (c.domain.preset == "ball") {
    d["radius"] = c.domain.radius;
  } else if (c.domain.preset == "ellipsoid") {
    d["semi_axes"] = c.domain.semi_axes;
  } else {
    d["base"] = c.domain.base;
    d["alpha"] = c.domain.alpha;
    d["lobes"] = c.domain.lobes;
  }
  d["r0"] = c.domain.r0;
  d["R0"] = c.domain.R0;
  d["tau0"] = c.domain.tau0;
  j["domain"] = d;
  j["schedule"] = {{"epsilon", c.schedule.epsilon}, {"r", c.schedule.r}, {"h", c.schedule.h}};
  j["solver"] = {{"newton_tol", c.solver.newton_tol}, {"max_iters", c.solver.max_iters},
                 {"armijo", c.solver.armijo},         {"min_step", c.solver.min_step},
                 {"gamma_floor", c.solver.gamma_floor}, {"linear_tol", c.solver.linear_tol}};
  j["analysis"] = {{"estimates", c.analysis.estimates},       {"levels", c.analysis.levels},
                   {"monotonicity", c.analysis.monotonicity}, {"inequality", c.analysis.inequality},
                   {"level_count", c.analysis.level_count},   {"b", c.analysis.b},
                   {"spot_checks", c.analysis.spot_checks}};
  j["output"] = c.output;
  j["seed"] = c.seed;
  return j;
}

std::string serialize_config(const ExperimentConfig& c) { return config_to_json(c).dump(2) + "\n"; }

void validate(const ExperimentConfig& c) {
  if (c.n != 2 && c.n != 3) throw ConfigError("problem.n: only n = 2 and n = 3 are supported");
  classify_regime(c.n, c.k);
  const DomainConfig& d = c.domain;
  if (d.preset == "ball" && !(d.radius > 0.0)) throw ConfigError("domain.radius: must be positive");
  if (d.preset == "ellipsoid") {
    if (static_cast<int>(d.semi_axes.size()) != c.n) throw ConfigError("domain.semi_axes: need exactly n entries");
    for (double a : d.semi_axes)
      if (!(a > 0.0)) throw ConfigError("domain.semi_axes: entries must be positive");
  }
  if (d.preset == "star-perturbed") {
    if (!(d.base > 0.0)) throw ConfigError("domain.base: must be positive");
    if (!(std::abs(d.alpha) < 1.0)) throw ConfigError("domain.alpha: need |alpha| < 1");
    if (d.lobes < 2) throw ConfigError("domain.lobes: need at least 2");
  }
  if (!(d.tau0 > 0.0 && d.tau0 < 0.5)) throw ConfigError("domain.tau0: need 0 < tau0 < 1/2");
  if (!(d.r0 > 0.0)) throw ConfigError("domain.r0: must be positive");
  if (!(d.R0 > 0.0)) throw ConfigError("domain.R0: must be positive");
  check_decreasing(c.schedule.epsilon, "epsilon");
  check_decreasing(c.schedule.r, "r");
  check_decreasing(c.schedule.h, "h");
  // Grid resolution: the largest r must sit well inside B_{r0}, the
  // coarsest h must resolve the smallest puncture.
  if (!(c.schedule.r.front() < 0.5 * d.r0)) throw ConfigError("schedule.r: need r < r0/2 for every r");
  if (!(c.schedule.h.front() <= 0.25 * c.schedule.r.back()))
    throw ConfigError("schedule.h: need h <= r/4 for every (h, r)");
  const SolverSettings& s = c.solver;
  if (!(s.newton_tol > 0.0)) throw ConfigError("solver.newton_tol: must be positive");
  if (s.max_iters < 1) throw ConfigError("solver.max_iters: must be >= 1");
  if (!(s.armijo > 0.0 && s.armijo < 1.0)) throw ConfigError("solver.armijo: need 0 < armijo < 1");
  if (!(s.min_step > 0.0 && s.min_step <= 1.0)) throw ConfigError("solver.min_step: need 0 < min_step <= 1");
  if (!(s.gamma_floor >= 0.0)) throw ConfigError("solver.gamma_floor: must be >= 0");
  if (!(s.linear_tol > 0.0)) throw ConfigError("solver.linear_tol: must be positive");
  if (c.analysis.level_count < 3) throw ConfigError("analysis.level_count: need at least 3 levels");
  if (c.analysis.spot_checks < 0) throw ConfigError("analysis.spot_checks: must be >= 0");
  if (c.k < c.n && classify_regime(c.n, c.k) != Regime::Below)
    for (double b : c.analysis.b)
      if (b < c_nk(c.n, c.k)) throw ConfigError("analysis.b: every b must be >= c_{n,k}");
  if (c.output.empty()) throw ConfigError("output: must not be empty");
}

DomainParams domain_params(const ExperimentConfig& c) {
  DomainParams p;
  p.dim = c.n;
  p.r0 = c.domain.r0;
  p.R0 = c.domain.R0;
  p.tau0 = c.domain.tau0;
  if (c.domain.preset == "ball")
    p.profile = make_ball_profile(c.domain.radius);
  else if (c.domain.preset == "ellipsoid")
    p.profile = make_ellipsoid_profile(c.domain.semi_axes);
  else
    p.profile = make_star_profile(c.domain.base, c.domain.alpha, c.domain.lobes);
  return p;
}

SolverConfig solver_config(const ExperimentConfig& c) {
  SolverConfig s;
  s.newton_tol = c.solver.newton_tol;
  s.max_iters = c.solver.max_iters;
  s.armijo = c.solver.armijo;
  s.min_step = c.solver.min_step;
  s.gamma_floor = c.solver.gamma_floor;
  s.linear_tol = c.solver.linear_tol;
  return s;
}

std::vector<double> b_values(const ExperimentConfig& c) {
  if (!c.analysis.b.empty()) return c.analysis.b;
  if (c.k >= c.n) return {};
  return {c_nk(c.n, c.k) + 0.5};
}

namespace {

ExperimentConfig base(const std::string& name, int n, int k) {
  ExperimentConfig c;
  c.name = name;
  c.n = n;
  c.k = k;
  c.output = "out/" + name;
  return c;
}

// Level-set asymptotics need R0 close to the domain so the finite-r
// solution is near its limit profile.
void tight_R0(ExperimentConfig& c, double rho_max) {
  c.domain.tau0 = 0.02;
  c.domain.R0 = 1.03 * rho_max;
}

}  // namespace

std::vector<PresetInfo> preset_list() {
  return {
      {"ball-n2-k1", "unit disk, Laplace (k = n/2), eps and r halving, h = 0.02"},
      {"ball-n2-k2", "unit disk, Monge-Ampere (k = n), eps halving, h = 0.02"},
      {"ball-n3-k1", "unit ball, k < n/2, r = 0.3, eps halving, h = 0.05"},
      {"ball-n3-k2", "unit ball, k > n/2, eps halving, h = 0.05"},
      {"ellipse-n2-k1", "ellipse 1.2 x 0.9, Laplace, eps and r halving, h = 0.02"},
      {"star-n2-k1", "three-lobed star (alpha 0.1), Laplace, eps and r halving, h = 0.02"},
      {"ellipsoid-n3-k2", "ellipsoid 1.1 x 1.0 x 0.9, k > n/2, h = 0.05"},
      {"star-n3-k2", "three-lobed star (alpha 0.05), k > n/2, h = 0.05"},
  };
}

ExperimentConfig preset(const std::string& name) {
  if (name == "ball-n2-k1") {
    ExperimentConfig c = base(name, 2, 1);
    tight_R0(c, 1.0);
    c.schedule = {{1e-2, 5e-3}, {0.2, 0.1}, {0.02}};
    return c;
  }
  if (name == "ball-n2-k2") {
    ExperimentConfig c = base(name, 2, 2);
    c.schedule = {{1e-2, 5e-3}, {0.2}, {0.02}};
    return c;
  }
  if (name == "ball-n3-k1") {
    ExperimentConfig c = base(name, 3, 1);
    // u ~ -1/|x| is steep at the puncture; a wider hole keeps h = 0.05 usable.
    c.domain.r0 = 0.8;
    c.schedule = {{1e-2, 5e-3}, {0.3}, {0.05}};
    return c;
  }
  if (name == "ball-n3-k2") {
    ExperimentConfig c = base(name, 3, 2);
    c.schedule = {{1e-2, 5e-3}, {0.2}, {0.05}};
    return c;
  }
  if (name == "ellipse-n2-k1") {
    ExperimentConfig c = base(name, 2, 1);
    c.domain.preset = "ellipsoid";
    c.domain.semi_axes = {1.2, 0.9};
    tight_R0(c, 1.2);
    c.schedule = {{1e-2, 5e-3}, {0.2, 0.1}, {0.02}};
    return c;
  }
  if (name == "star-n2-k1") {
    ExperimentConfig c = base(name, 2, 1);
    c.domain.preset = "star-perturbed";
    c.domain.alpha = 0.1;
    tight_R0(c, 1.1);
    c.schedule = {{1e-2, 5e-3}, {0.2, 0.1}, {0.02}};
    return c;
  }
  if (name == "ellipsoid-n3-k2") {
    ExperimentConfig c = base(name, 3, 2);
    c.domain.preset = "ellipsoid";
    c.domain.semi_axes = {1.1, 1.0, 0.9};
    c.schedule = {{1e-2, 5e-3}, {0.2}, {0.05}};
    return c;
  }
  if (name == "star-n3-k2") {
    ExperimentConfig c = base(name, 3, 2);
    c.domain.preset = "star-perturbed";
    c.domain.alpha = 0.05;
    c.schedule = {{1e-2, 5e-3}, {0.2}, {0.05}};
    return c;
  }
  throw ConfigError("unknown preset '" + name + "' (see `presets`)");
}

}  // namespace khess
