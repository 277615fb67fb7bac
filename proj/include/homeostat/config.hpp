#pragma once

// JSON run configuration: strict parsing (unknown keys are errors, reported
// with their path), reference defaults, and the effective-config echo.

#include <array>
#include <cstddef>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "homeostat/equilibrium.hpp"
#include "homeostat/errors.hpp"
#include "homeostat/experiments.hpp"
#include "homeostat/model.hpp"
#include "homeostat/pde.hpp"

namespace homeostat {

using json = nlohmann::ordered_json;

struct SolverConfig {
  std::size_t nx = 800;
  double xmax = 10.0;
  double cfl = kDefaultCfl;
  double reltol = 1e-10;
  double abstol = 1e-12;
  double horizon = 5.0;
  std::size_t samples = 1000;
  std::vector<double> snapshots;
};

struct InitialConfig {
  std::optional<double> pbar;  // both unset: Gaussian totals on the solver grid
  std::optional<double> wbar;
};

struct DeathConfig {
  std::string profile = "uniform";  // uniform | linear_ramp | tabulated
  double rate = 0.5;
  std::optional<double> xmax;  // linear_ramp; defaults to solver.xmax
  std::vector<double> x;       // tabulated
  std::vector<double> rates;
};

struct ExperimentConfig {
  std::string scan = "delta_p";  // delta_p | delta
  std::optional<std::array<double, 2>> range;
  std::size_t steps = 121;
  std::vector<double> gains{0.5, 1.0, 2.0, 4.0, 8.0};
  CalibrationTarget target{};
  std::size_t evaluations_per_restart = 3000;
  std::size_t restarts = 8;
  double depletion = 0.1;
  double regeneration_horizon = 100.0;
  double wmin = 1e-6;
  double wmax = 1e6;
  std::size_t root_samples = 2000;
  double tol = 1e-14;
  bool divergence_csv = false;
  std::size_t divergence_resolution = 200;
};

struct RunConfig {
  std::string preset = "reference";  // reference | crypt
  ModelParams model = reference_params();
  DeathConfig death{};
  SolverConfig solver{};
  InitialConfig initial{};
  ExperimentConfig experiment{};
  std::string output_dir = "out";

  EquilibriumSearch search() const {
    return {experiment.wmin, experiment.wmax, experiment.root_samples, experiment.tol};
  }
  std::array<double, 2> scan_range() const {
    if (experiment.range) return *experiment.range;
    return experiment.scan == "delta" ? std::array<double, 2>{0.1, 2.5}
                                      : std::array<double, 2>{-0.8, 0.4};
  }
  IntegrationSettings integration() const {
    IntegrationSettings s;
    s.reltol = solver.reltol;
    s.abstol = solver.abstol;
    s.samples = solver.samples;
    return s;
  }
};

namespace detail {

class ObjectReader {
 public:
  ObjectReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(display(), "expected an object");
  }

  bool has(const std::string& key) {
    seen_.insert(key);
    return j_.contains(key);
  }
  const json& at(const std::string& key) const { return j_.at(key); }
  std::string child(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  void number(const std::string& key, double& out) {
    if (!has(key)) return;
    const auto& v = j_.at(key);
    if (!v.is_number()) throw ConfigError(child(key), "expected a number");
    out = v.get<double>();
  }
  void opt_number(const std::string& key, std::optional<double>& out) {
    if (!has(key)) return;
    double v = 0.0;
    number(key, v);
    out = v;
  }
  void count(const std::string& key, std::size_t& out) {
    if (!has(key)) return;
    const auto& v = j_.at(key);
    if (!v.is_number_integer() || v.get<long long>() < 0) {
      throw ConfigError(child(key), "expected a nonnegative integer");
    }
    out = v.get<std::size_t>();
  }
  void string(const std::string& key, std::string& out) {
    if (!has(key)) return;
    const auto& v = j_.at(key);
    if (!v.is_string()) throw ConfigError(child(key), "expected a string");
    out = v.get<std::string>();
  }
  void boolean(const std::string& key, bool& out) {
    if (!has(key)) return;
    const auto& v = j_.at(key);
    if (!v.is_boolean()) throw ConfigError(child(key), "expected true or false");
    out = v.get<bool>();
  }
  void numbers(const std::string& key, std::vector<double>& out) {
    if (!has(key)) return;
    const auto& v = j_.at(key);
    if (!v.is_array()) throw ConfigError(child(key), "expected an array of numbers");
    out.clear();
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!v[i].is_number()) throw ConfigError(child(key) + "[" + std::to_string(i) + "]", "expected a number");
      out.push_back(v[i].get<double>());
    }
  }
  void finish() const {
    for (const auto& [key, _] : j_.items()) {
      if (!seen_.count(key)) throw ConfigError(child(key), "unknown key");
    }
  }

 private:
  std::string display() const { return path_.empty() ? "<root>" : path_; }
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

inline void read_hill(ObjectReader& parent, const std::string& key, HillMap& h) {
  if (!parent.has(key)) return;
  ObjectReader r(parent.at(key), parent.child(key));
  r.number("baseline", h.baseline);
  r.number("gain", h.gain);
  r.number("exponent", h.exponent);
  r.finish();
}

inline void read_pair(ObjectReader& parent, const std::string& key, InheritancePair& p) {
  if (!parent.has(key)) return;
  std::vector<double> v;
  parent.numbers(key, v);
  if (v.size() != 2) throw ConfigError(parent.child(key), "expected two fractions");
  p = {v[0], v[1]};
}

inline DeathProfile build_death(const DeathConfig& d, double solver_xmax) {
  if (d.profile == "uniform") return DeathProfile::uniform(d.rate);
  if (d.profile == "linear_ramp") return DeathProfile::linear_ramp(d.rate, d.xmax.value_or(solver_xmax));
  if (d.profile == "tabulated") {
    try {
      return DeathProfile::tabulated(d.x, d.rates);
    } catch (const ValidationError& e) {
      throw ConfigError("model.delta", e.what());
    }
  }
  throw ConfigError("model.delta.profile", "expected uniform, linear_ramp or tabulated");
}

}  // namespace detail

inline RunConfig parse_config(const json& doc) {
  using detail::ObjectReader;
  RunConfig c;
  ObjectReader root(doc, "");
  root.string("preset", c.preset);
  if (c.preset == "crypt") {
    c.model = crypt_params();
    c.death.rate = 0.25;
  } else if (c.preset != "reference") {
    throw ConfigError("preset", "expected reference or crypt");
  }

  if (root.has("solver")) {
    ObjectReader r(root.at("solver"), "solver");
    r.count("nx", c.solver.nx);
    r.number("xmax", c.solver.xmax);
    r.number("cfl", c.solver.cfl);
    r.number("reltol", c.solver.reltol);
    r.number("abstol", c.solver.abstol);
    r.number("horizon", c.solver.horizon);
    r.count("samples", c.solver.samples);
    r.numbers("snapshots", c.solver.snapshots);
    r.finish();
  }

  if (root.has("model")) {
    ObjectReader r(root.at("model"), "model");
    detail::read_hill(r, "p1", c.model.p1);
    detail::read_hill(r, "p2", c.model.p2);
    detail::read_hill(r, "lambda_p", c.model.lambda_p);
    detail::read_hill(r, "lambda_r", c.model.lambda_r);
    if (r.has("delta")) {
      const auto& d = r.at("delta");
      if (d.is_number()) {
        c.death = {};
        c.death.rate = d.get<double>();
      } else {
        ObjectReader dr(d, "model.delta");
        dr.string("profile", c.death.profile);
        dr.number("rate", c.death.rate);
        dr.opt_number("xmax", c.death.xmax);
        dr.numbers("x", c.death.x);
        dr.numbers("rates", c.death.rates);
        dr.finish();
      }
    }
    r.number("v_p", c.model.v_p);
    r.number("v_w", c.model.v_w);
    detail::read_pair(r, "alpha", c.model.alpha);
    detail::read_pair(r, "beta", c.model.beta);
    detail::read_pair(r, "gamma", c.model.gamma);
    r.finish();
  }
  c.model.delta = detail::build_death(c.death, c.solver.xmax);

  if (root.has("initial")) {
    ObjectReader r(root.at("initial"), "initial");
    r.opt_number("pbar", c.initial.pbar);
    r.opt_number("wbar", c.initial.wbar);
    r.finish();
  }

  if (root.has("experiment")) {
    auto& e = c.experiment;
    ObjectReader r(root.at("experiment"), "experiment");
    r.string("scan", e.scan);
    if (r.has("range")) {
      std::vector<double> v;
      r.numbers("range", v);
      if (v.size() != 2) throw ConfigError("experiment.range", "expected [lo, hi]");
      e.range = std::array<double, 2>{v[0], v[1]};
    }
    r.count("steps", e.steps);
    r.numbers("gains", e.gains);
    if (r.has("target")) {
      ObjectReader t(r.at("target"), "experiment.target");
      t.number("pstar", e.target.pstar);
      t.number("wstar", e.target.wstar);
      t.number("delta", e.target.delta);
      t.number("exponent", e.target.exponent);
      t.finish();
    }
    r.count("evaluations_per_restart", e.evaluations_per_restart);
    r.count("restarts", e.restarts);
    r.number("depletion", e.depletion);
    r.number("regeneration_horizon", e.regeneration_horizon);
    r.number("wmin", e.wmin);
    r.number("wmax", e.wmax);
    r.count("root_samples", e.root_samples);
    r.number("tol", e.tol);
    r.boolean("divergence_csv", e.divergence_csv);
    r.count("divergence_resolution", e.divergence_resolution);
    r.finish();
  }

  if (root.has("output")) {
    ObjectReader r(root.at("output"), "output");
    r.string("dir", c.output_dir);
    r.finish();
  }
  root.finish();

  // Invariants.
  try {
    validate_params(c.model);
  } catch (const ValidationError& e) {
    throw ConfigError("model." + e.field(), e.what());
  }
  const auto& s = c.solver;
  if (!(s.cfl > 0.0 && s.cfl <= 1.0)) throw ConfigError("solver.cfl", "must lie in (0, 1]");
  if (s.nx < 2) throw ConfigError("solver.nx", "need at least two cells");
  if (!(s.xmax > 0.0)) throw ConfigError("solver.xmax", "must be positive");
  if (!(s.reltol > 0.0)) throw ConfigError("solver.reltol", "must be positive");
  if (!(s.abstol > 0.0)) throw ConfigError("solver.abstol", "must be positive");
  if (!(s.horizon > 0.0)) throw ConfigError("solver.horizon", "must be positive");
  if (s.samples < 2) throw ConfigError("solver.samples", "need at least two samples");
  if (s.snapshots.size() > 50) throw ConfigError("solver.snapshots", "at most 50 snapshot times");
  for (double t : s.snapshots) {
    if (!(t >= 0.0 && t <= s.horizon)) throw ConfigError("solver.snapshots", "times must lie in [0, horizon]");
  }
  if (c.initial.pbar.has_value() != c.initial.wbar.has_value()) {
    throw ConfigError("initial", "give both pbar and wbar or neither");
  }
  if (c.initial.pbar && (!(*c.initial.pbar >= 0.0) || !(*c.initial.wbar >= 0.0))) {
    throw ConfigError("initial", "totals must be nonnegative");
  }
  const auto& e = c.experiment;
  if (e.scan != "delta_p" && e.scan != "delta") throw ConfigError("experiment.scan", "expected delta_p or delta");
  if (e.range && !((*e.range)[0] < (*e.range)[1])) throw ConfigError("experiment.range", "need lo < hi");
  if (e.steps < 2) throw ConfigError("experiment.steps", "need at least two points");
  for (double a : e.gains) {
    if (!(a > 0.0)) throw ConfigError("experiment.gains", "gain factors must be positive");
  }
  if (!(e.target.pstar > 0.0) || !(e.target.wstar > 0.0)) throw ConfigError("experiment.target", "targets must be positive");
  if (!(e.target.delta > 0.0)) throw ConfigError("experiment.target.delta", "must be positive");
  if (!(e.depletion > 0.0 && e.depletion <= 1.0)) throw ConfigError("experiment.depletion", "must lie in (0, 1]");
  if (!(e.regeneration_horizon > 0.0)) throw ConfigError("experiment.regeneration_horizon", "must be positive");
  if (!(e.wmin > 0.0 && e.wmax > e.wmin)) throw ConfigError("experiment.wmin", "need 0 < wmin < wmax");
  if (e.root_samples < 2) throw ConfigError("experiment.root_samples", "need at least two samples");
  if (!(e.tol > 0.0)) throw ConfigError("experiment.tol", "must be positive");
  if (e.divergence_resolution < 2) throw ConfigError("experiment.divergence_resolution", "need at least two points");
  return c;
}

inline RunConfig parse_config(const std::string& text) {
  json doc;
  try {
    doc = text.find_first_not_of(" \t\r\n") == std::string::npos ? json::object() : json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError("", std::string("malformed JSON: ") + e.what());
  }
  return parse_config(doc);
}

inline RunConfig parse_config(const char* text) { return parse_config(std::string(text)); }

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("", "cannot read config file " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

inline json to_json(const HillMap& h) {
  return {{"baseline", h.baseline}, {"gain", h.gain}, {"exponent", h.exponent}};
}

inline json to_json(const ModelParams& m, const DeathConfig& d) {
  json delta;
  delta["profile"] = d.profile;
  delta["rate"] = d.rate;
  if (d.profile == "linear_ramp") {
    const auto& tab = std::get<DeathProfile::Tabulated>(m.delta.representation());
    delta["xmax"] = tab.x.back();
  }
  if (d.profile == "tabulated") {
    delta["x"] = d.x;
    delta["rates"] = d.rates;
  }
  return {{"p1", to_json(m.p1)},
          {"p2", to_json(m.p2)},
          {"lambda_p", to_json(m.lambda_p)},
          {"lambda_r", to_json(m.lambda_r)},
          {"delta", delta},
          {"v_p", m.v_p},
          {"v_w", m.v_w},
          {"alpha", {m.alpha.first, m.alpha.second}},
          {"beta", {m.beta.first, m.beta.second}},
          {"gamma", {m.gamma.first, m.gamma.second}}};
}

/// Model section for a uniform death rate.
inline json to_json(const ModelParams& m) {
  DeathConfig d;
  d.rate = m.delta.uniform_rate();
  return to_json(m, d);
}

/// Effective configuration with every default filled in; parse_config of
/// this document reproduces the same RunConfig.
inline json to_json(const RunConfig& c) {
  json j;
  j["preset"] = c.preset;
  j["model"] = to_json(c.model, c.death);
  j["solver"] = {{"nx", c.solver.nx},         {"xmax", c.solver.xmax},
                 {"cfl", c.solver.cfl},       {"reltol", c.solver.reltol},
                 {"abstol", c.solver.abstol}, {"horizon", c.solver.horizon},
                 {"samples", c.solver.samples}, {"snapshots", c.solver.snapshots}};
  j["initial"] = json::object();
  if (c.initial.pbar) j["initial"] = {{"pbar", *c.initial.pbar}, {"wbar", *c.initial.wbar}};
  const auto& e = c.experiment;
  const auto range = c.scan_range();
  j["experiment"] = {{"scan", e.scan},
                     {"range", {range[0], range[1]}},
                     {"steps", e.steps},
                     {"gains", e.gains},
                     {"target",
                      {{"pstar", e.target.pstar},
                       {"wstar", e.target.wstar},
                       {"delta", e.target.delta},
                       {"exponent", e.target.exponent}}},
                     {"evaluations_per_restart", e.evaluations_per_restart},
                     {"restarts", e.restarts},
                     {"depletion", e.depletion},
                     {"regeneration_horizon", e.regeneration_horizon},
                     {"wmin", e.wmin},
                     {"wmax", e.wmax},
                     {"root_samples", e.root_samples},
                     {"tol", e.tol},
                     {"divergence_csv", e.divergence_csv},
                     {"divergence_resolution", e.divergence_resolution}};
  j["output"] = {{"dir", c.output_dir}};
  return j;
}

}  // namespace homeostat
