#pragma once

// Command implementations behind the command-line tool. Each command reads a
// RunConfig, writes CSV/JSON artifacts into the output directory together
// with the effective configuration, and returns a process exit status.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <string>
#include <vector>

#include "homeostat/config.hpp"
#include "homeostat/csv.hpp"
#include "homeostat/equilibrium.hpp"
#include "homeostat/experiments.hpp"
#include "homeostat/ode.hpp"
#include "homeostat/pde.hpp"
#include "homeostat/verify.hpp"

namespace homeostat {

enum ExitCode : int { kExitOk = 0, kExitCheckFailed = 1, kExitUsage = 2 };

inline const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names{"simulate-pde", "simulate-ode", "equilibrium",
                                              "scan",         "gain-scale",   "calibrate",
                                              "regenerate",   "verify"};
  return names;
}

struct CommandOptions {
  VerifyOptions verify{};
};

namespace detail {

inline void write_json(const std::filesystem::path& path, const json& j) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << j.dump(2) << '\n';
}

inline json cert_json(const EquilibriumCert& c) {
  return {{"pstar", c.pstar},
          {"wstar", c.wstar},
          {"ratio", c.ratio()},
          {"res_equalization", c.res_equalization},
          {"res_ratio", c.res_ratio},
          {"res_rhs_p", c.res_rhs_p},
          {"res_rhs_w", c.res_rhs_w},
          {"scaled_max", c.scaled_max},
          {"iterations", c.iterations},
          {"accepted", c.accepted}};
}

inline json origin_json(const OriginClassification& o) {
  return {{"trace", o.trace}, {"det", o.det}, {"regime", to_string(o.regime)}};
}

inline json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

inline Totals2D initial_totals(const RunConfig& cfg) {
  if (cfg.initial.pbar) return {*cfg.initial.pbar, *cfg.initial.wbar, 0.0};
  const auto s = gaussian_initial_state({cfg.solver.xmax, cfg.solver.nx});
  return {s.pbar(), s.wbar(), 0.0};
}

inline std::string regime_label(const ScanRecord& r) {
  return r.origin ? to_string(r.origin->regime) : "";
}

}  // namespace detail

inline int cmd_simulate_ode(const RunConfig& cfg, const std::filesystem::path& out, std::ostream& log) {
  const auto init = detail::initial_totals(cfg);
  const auto tr = integrate(cfg.model, init, cfg.solver.horizon, cfg.integration());
  CsvWriter csv((out / "trajectory.csv").string(), {"t", "pbar", "wbar", "mass", "s", "fP", "fW"});
  for (const auto& x : tr.samples) {
    const double mass = x.mass();
    CsvCell s = mass > 0.0 ? CsvCell{x.stem_frequency()} : CsvCell{};
    CsvCell fp, fw;
    if (x.pbar > 0.0 && x.wbar > 0.0) {
      const auto f = payoffs(cfg.model, x);
      fp = f.f_p;
      fw = f.f_w;
    }
    csv.row({x.t, x.pbar, x.wbar, mass, s, fp, fw});
  }
  const auto& end = tr.back();
  detail::write_json(out / "summary.json",
                     {{"initial", {{"pbar", init.pbar}, {"wbar", init.wbar}}},
                      {"final", {{"t", end.t}, {"pbar", end.pbar}, {"wbar", end.wbar}}},
                      {"steps_accepted", tr.stats.accepted},
                      {"steps_rejected", tr.stats.rejected},
                      {"max_error_estimate", tr.stats.max_error_estimate},
                      {"mass_bound_violation", mass_bound_check(tr, cfg.model)}});
  log << "final state P " << format_double(end.pbar) << " W " << format_double(end.wbar) << '\n';
  return kExitOk;
}

inline int cmd_simulate_pde(const RunConfig& cfg, const std::filesystem::path& out, std::ostream& log) {
  PdeRunSettings rs;
  rs.cfl = cfg.solver.cfl;
  rs.snapshot_times = cfg.solver.snapshots;
  if (rs.snapshot_times.empty()) rs.snapshot_times = {0.0, cfg.solver.horizon};
  const auto r = run(cfg.model, gaussian_initial_state({cfg.solver.xmax, cfg.solver.nx}),
                     cfg.solver.horizon, rs);
  const auto& d = r.diagnostics;
  {
    CsvWriter csv((out / "totals.csv").string(),
                  {"t", "pbar_h", "wbar_h", "rP", "rW", "rM", "delta_eff", "mass_defect"});
    for (std::size_t i = 0; i < r.t.size(); ++i) {
      csv.row({r.t[i], r.pbar[i], r.wbar[i], d.r_p[i], d.r_w[i], d.r_m[i], d.delta_eff[i],
               r.mass_defect[i]});
    }
  }
  json snaps = json::array();
  const Grid1D grid{cfg.solver.xmax, cfg.solver.nx};
  for (std::size_t k = 0; k < r.snapshots.size(); ++k) {
    char name[32];
    std::snprintf(name, sizeof name, "snapshot_%03zu.csv", k);
    CsvWriter csv((out / name).string(), {"x", "p", "w"});
    for (std::size_t j = 0; j < grid.nx; ++j) {
      csv.row({grid.center(j), r.snapshots[k].p[j], r.snapshots[k].w[j]});
    }
    snaps.push_back({{"t", r.snapshots[k].t}, {"file", name}});
  }
  const auto [dlo, dhi] = std::minmax_element(d.delta_eff.begin(), d.delta_eff.end());
  detail::write_json(out / "summary.json",
                     {{"nx", grid.nx},
                      {"xmax", grid.xmax},
                      {"dt", stable_dt(grid, cfg.model, cfg.solver.cfl)},
                      {"steps", r.t.size() - 1},
                      {"final", {{"t", r.t.back()}, {"pbar_h", r.pbar.back()}, {"wbar_h", r.wbar.back()}}},
                      {"sup_rP", d.sup_r_p},
                      {"sup_rW", d.sup_r_w},
                      {"sup_rM", d.sup_r_m},
                      {"rM_two_way_disagreement", d.max_rm_disagreement},
                      {"closure_delta", d.delta_closure},
                      {"delta_eff_min", *dlo},
                      {"delta_eff_max", *dhi},
                      {"mass_defect", r.final_state.mass_defect},
                      {"time_derivative_stencil",
                       "second-order three-point: centred interior, one-sided at the ends"},
                      {"snapshots", snaps}});
  log << "PDE totals at t " << format_double(r.t.back()) << ": P " << format_double(r.pbar.back())
      << " W " << format_double(r.wbar.back()) << '\n';
  return kExitOk;
}

inline int cmd_equilibrium(const RunConfig& cfg, const std::filesystem::path& out, std::ostream& log) {
  const auto& m = cfg.model;
  const auto summary = validate_params(m);
  const auto eqs = find_equilibria(m, cfg.search());
  json list = json::array();
  for (const auto& e : eqs) {
    auto j = detail::cert_json(e);
    const auto laws = homeostatic_laws(m, e.pstar, e.wstar);
    j["laws"] = {{"equalization_lhs", laws.equalization_lhs},
                 {"equalization_rhs", laws.equalization_rhs},
                 {"ratio_lhs", laws.ratio_lhs},
                 {"ratio_rhs", laws.ratio_rhs}};
    list.push_back(j);
  }
  const auto sd = slope_dominance_check(m, 1e-3, 1e3, 2000);
  json doc{{"open_loop",
            {{"p1hat", summary.p1hat},
             {"p2hat", summary.p2hat},
             {"lambda_p_hat", summary.lambda_p_hat},
             {"lambda_r_hat", summary.lambda_r_hat},
             {"delta_p", summary.delta_p},
             {"delta_p_crit", detail::optional_json(summary.delta_p_crit)}}},
           {"origin", detail::origin_json(classify_origin(m))},
           {"search", {{"wmin", cfg.experiment.wmin}, {"wmax", cfg.experiment.wmax},
                       {"samples", cfg.experiment.root_samples}, {"tol", cfg.experiment.tol}}},
           {"equilibria", list},
           {"slope_dominance",
            {{"wmin", sd.wmin}, {"wmax", sd.wmax}, {"samples", sd.samples},
             {"violations", sd.violations}, {"worst_margin", sd.worst_margin},
             {"worst_w", sd.worst_w}, {"holds", sd.holds()}}}};
  if (eqs.size() == 1) {
    const auto rep = divergence_field(m, default_divergence_bounds(eqs[0].pstar, eqs[0].wstar),
                                      cfg.experiment.divergence_resolution,
                                      cfg.experiment.divergence_csv);
    doc["divergence"] = {{"bounds", {rep.bounds.pmin, rep.bounds.pmax, rep.bounds.wmin, rep.bounds.wmax}},
                         {"resolution", rep.resolution},
                         {"supremum", rep.supremum},
                         {"supremum_fd", rep.supremum_fd},
                         {"sup_dG1_dP", rep.sup_dp_g1},
                         {"max_rel_discrepancy", rep.max_rel_discrepancy},
                         {"all_negative", rep.all_negative}};
    if (cfg.experiment.divergence_csv) {
      CsvWriter csv((out / "divergence.csv").string(), {"pbar", "wbar", "div", "div_fd"});
      for (const auto& s : rep.samples) csv.row({s.pbar, s.wbar, s.analytic, s.finite_difference});
    }
  }
  detail::write_json(out / "equilibrium.json", doc);
  for (const auto& e : eqs) {
    log << "equilibrium P* " << format_double(e.pstar) << " W* " << format_double(e.wstar)
        << " ratio " << format_double(e.ratio()) << (e.accepted ? " (certified)" : " (NOT certified)")
        << '\n';
  }
  if (eqs.empty()) log << "no interior equilibrium in the search window\n";
  return kExitOk;
}

inline int cmd_scan(const RunConfig& cfg, const std::filesystem::path& out, std::ostream& log) {
  const auto range = cfg.scan_range();
  const bool dp = cfg.experiment.scan == "delta_p";
  const auto recs = dp ? scan_delta_p(cfg.model, range[0], range[1], cfg.experiment.steps, cfg.search())
                       : scan_delta(cfg.model, range[0], range[1], cfg.experiment.steps, cfg.search());
  CsvWriter csv((out / "scan.csv").string(),
                {"parameter", "value", "p1hat", "p2hat", "delta", "admissible", "regime", "trace",
                 "det", "branch", "pstar", "wstar", "note"});
  const std::string pname = dp ? "delta_p" : "delta";
  for (const auto& r : recs) {
    const CsvCell trace = r.origin ? CsvCell{r.origin->trace} : CsvCell{};
    const CsvCell det = r.origin ? CsvCell{r.origin->det} : CsvCell{};
    const CsvCell adm = std::string(r.admissible ? "true" : "false");
    if (r.equilibria.empty()) {
      csv.row({pname, r.value, r.p1hat, r.p2hat, r.delta, adm, detail::regime_label(r), trace, det,
               CsvCell{}, CsvCell{}, CsvCell{}, r.note});
    }
    for (std::size_t b = 0; b < r.equilibria.size(); ++b) {
      csv.row({pname, r.value, r.p1hat, r.p2hat, r.delta, adm, detail::regime_label(r), trace, det,
               static_cast<long long>(b), r.equilibria[b].pstar, r.equilibria[b].wstar, r.note});
    }
  }
  json sw = json::array();
  for (const auto& [i, j] : regime_switches(recs)) {
    sw.push_back({{"from", recs[i].value}, {"to", recs[j].value},
                  {"regimes", {detail::regime_label(recs[i]), detail::regime_label(recs[j])}}});
  }
  std::size_t with_eq = 0, multi = 0;
  for (const auto& r : recs) {
    with_eq += r.equilibria.empty() ? 0 : 1;
    multi += r.equilibria.size() > 1 ? 1 : 0;
  }
  json doc{{"parameter", pname},
           {"range", {range[0], range[1]}},
           {"steps", cfg.experiment.steps},
           {"records_with_equilibrium", with_eq},
           {"records_with_multiple_equilibria", multi},
           {"regime_switches", sw}};
  if (dp) {
    doc["parameterization"] = "p1hat = (0.8 + delta_p)/3, p2hat = (0.8 - 2 delta_p)/3";
    if (const auto s = validate_params(cfg.model); s.delta_p_crit) doc["delta_p_crit"] = *s.delta_p_crit;
  }
  detail::write_json(out / "scan.json", doc);
  log << recs.size() << " scan points, " << with_eq << " with an interior equilibrium, "
      << sw.size() << " regime switch(es)\n";
  return kExitOk;
}

inline int cmd_gain_scale(const RunConfig& cfg, const std::filesystem::path& out, std::ostream& log) {
  const auto rows = gain_scaling_table(cfg.model, cfg.experiment.gains, cfg.search());
  CsvWriter csv((out / "gain_scaling.csv").string(),
                {"A", "pstar", "wstar", "normalized", "ratio", "ratio_deviation"});
  double worst = 0.0;
  bool all_found = true;
  for (const auto& r : rows) {
    if (!r.found) {
      all_found = false;
      csv.row({r.a, CsvCell{}, CsvCell{}, CsvCell{}, CsvCell{}, CsvCell{}});
      continue;
    }
    csv.row({r.a, r.pstar, r.wstar, r.normalized, r.ratio, r.ratio_deviation});
    worst = std::max(worst, r.ratio_deviation);
  }
  detail::write_json(out / "gain_scaling.json",
                     {{"gains", cfg.experiment.gains}, {"all_found", all_found},
                      {"max_ratio_deviation", worst}});
  log << "max ratio deviation " << format_double(worst) << '\n';
  return kExitOk;
}

inline int cmd_calibrate(const RunConfig& cfg, const std::filesystem::path& out, std::ostream& log) {
  CalibrationSettings cs;
  cs.evaluations_per_restart = cfg.experiment.evaluations_per_restart;
  cs.restarts = cfg.experiment.restarts;
  cs.search = cfg.search();
  const auto& t = cfg.experiment.target;
  const auto res = calibrate_crypt(t, std::nullopt, cs);
  json doc{{"target", {{"pstar", t.pstar}, {"wstar", t.wstar}, {"delta", t.delta},
                       {"exponent", t.exponent}, {"sstar", t.stem_frequency()}}},
           {"objective",
            "e1^2 + e2^2 + e3^2; e1 = (delta (p2-p1)(W*) - lambda_r(P*)) / (|delta (p2-p1)(W*)| + "
            "|lambda_r(P*)|), e2 = P* lambda_p(W*) / (delta W*) - 1, e3 = relative distance from the "
            "target to the nearest solver equilibrium (1 when none)"},
           {"free_parameters", "log of p1hat, p2hat, lambda_p_hat, lambda_r_hat, k1, k2, k3, k4"},
           {"objective_value", res.objective},
           {"objective_initial", res.objective_initial},
           {"equalization_term", res.equalization_term},
           {"ratio_term", res.ratio_term},
           {"placement", res.placement},
           {"evaluations", res.evaluations},
           {"accepted", res.accepted},
           {"lambda_p_at_target", res.params.lambda_p(t.wstar)},
           {"params", to_json(res.params)}};
  if (res.equilibrium) doc["equilibrium"] = detail::cert_json(*res.equilibrium);
  detail::write_json(out / "calibration.json", doc);
  RunConfig calibrated = cfg;
  calibrated.model = res.params;
  calibrated.death = {};
  calibrated.death.rate = t.delta;
  calibrated.model.delta = DeathProfile::uniform(t.delta);
  detail::write_json(out / "calibrated_config.json", to_json(calibrated));
  log << (res.accepted ? "calibration accepted" : "calibration FAILED (best candidate reported)")
      << ": objective " << format_double(res.objective) << ", placement "
      << format_double(res.placement) << '\n';
  return res.accepted ? kExitOk : kExitCheckFailed;
}

inline int cmd_regenerate(const RunConfig& cfg, const std::filesystem::path& out, std::ostream& log) {
  const auto rep = regeneration_experiment(cfg.model, cfg.experiment.depletion,
                                           cfg.experiment.regeneration_horizon,
                                           cfg.solver.samples + 1, cfg.search());
  CsvWriter csv((out / "regeneration.csv").string(),
                {"t", "pbar", "wbar", "s", "dediff_flux", "net_division", "stem_source",
                 "payoff_gap", "ablation_pbar", "ablation_wbar"});
  for (const auto& r : rep.samples) {
    csv.row({r.t, r.pbar, r.wbar, r.s, r.dediff_flux, r.net_division, r.dediff_flux + r.net_division,
             r.payoff_gap, r.ablation_pbar, r.ablation_wbar});
  }
  detail::write_json(out / "regeneration.json",
                     {{"pstar", rep.pstar},
                      {"wstar", rep.wstar},
                      {"sstar", rep.sstar},
                      {"depletion", rep.depletion},
                      {"horizon", rep.horizon},
                      {"recovery_time", detail::optional_json(rep.recovery_time)},
                      {"recovery_band", {0.9, 1.1}},
                      {"early_window_end", rep.early_window_end},
                      {"dediff_dominates_early", rep.dediff_dominates_early},
                      {"ablation_monotone_decay", rep.ablation_monotone_decay},
                      {"ablation_final_pbar", rep.ablation_final_pbar},
                      {"initial_payoff_gap_positive", rep.initial_payoff_gap_positive}});
  log << "s* " << format_double(rep.sstar) << ", recovery "
      << (rep.recovery_time ? "at t " + format_double(*rep.recovery_time) : std::string("not reached"))
      << '\n';
  return kExitOk;
}

inline int cmd_verify(const RunConfig& cfg, const std::filesystem::path& out, std::ostream& log,
                      const VerifyOptions& opt) {
  const auto sum = verify_all(cfg, opt);
  detail::write_json(out / "verification.json", to_json(sum));
  for (const auto& c : sum.checks) {
    char line[160];
    std::snprintf(line, sizeof line, "%-8s %-26s measured %-24s bound %s%s", to_string(c.status),
                  c.name.c_str(), format_double(c.measured).c_str(), format_double(c.bound).c_str(),
                  c.reduced_scale ? "  [reduced-scale]" : "");
    log << line << "\n         " << c.detail << '\n';
  }
  log << (sum.passed() ? "all checks passed" : "verification FAILED") << " ("
      << sum.count(CheckStatus::Pass) << " pass, " << sum.count(CheckStatus::Fail) << " fail, "
      << sum.count(CheckStatus::Skipped) << " skipped)\n";
  return sum.passed() ? kExitOk : kExitCheckFailed;
}

/// Runs `command`, writing artifacts under cfg.output_dir.
inline int dispatch(const std::string& command, const RunConfig& cfg, std::ostream& log,
                    const CommandOptions& opt = {}) {
  const auto& names = command_names();
  if (std::find(names.begin(), names.end(), command) == names.end()) {
    throw ConfigError("", "unknown command " + command);
  }
  const std::filesystem::path out(cfg.output_dir);
  std::filesystem::create_directories(out);
  detail::write_json(out / "config.effective.json", to_json(cfg));
  if (command == "simulate-ode") return cmd_simulate_ode(cfg, out, log);
  if (command == "simulate-pde") return cmd_simulate_pde(cfg, out, log);
  if (command == "equilibrium") return cmd_equilibrium(cfg, out, log);
  if (command == "scan") return cmd_scan(cfg, out, log);
  if (command == "gain-scale") return cmd_gain_scale(cfg, out, log);
  if (command == "calibrate") return cmd_calibrate(cfg, out, log);
  if (command == "regenerate") return cmd_regenerate(cfg, out, log);
  return cmd_verify(cfg, out, log, opt.verify);
}

}  // namespace homeostat
