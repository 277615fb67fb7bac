#pragma once

// One-shot verification suite: every discrete check of the model, run in a
// fixed order against the configured parameters.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "homeostat/config.hpp"
#include "homeostat/csv.hpp"
#include "homeostat/equilibrium.hpp"
#include "homeostat/experiments.hpp"
#include "homeostat/ode.hpp"
#include "homeostat/pde.hpp"

namespace homeostat {

enum class CheckStatus { Pass, Fail, Skipped };

inline const char* to_string(CheckStatus s) {
  switch (s) {
    case CheckStatus::Pass: return "pass";
    case CheckStatus::Fail: return "fail";
    case CheckStatus::Skipped: return "skipped";
  }
  return "unknown";
}

struct CheckResult {
  std::string name;
  CheckStatus status = CheckStatus::Skipped;
  double measured = 0.0;
  double bound = 0.0;
  double runtime_s = 0.0;
  bool reduced_scale = false;
  std::string detail;
};

struct VerificationSummary {
  std::vector<CheckResult> checks;

  /// True iff every check passed (skipped checks count as not passed).
  bool passed() const {
    return !checks.empty() && std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) {
      return c.status == CheckStatus::Pass;
    });
  }
  std::size_t count(CheckStatus s) const {
    return static_cast<std::size_t>(std::count_if(
        checks.begin(), checks.end(), [&](const CheckResult& c) { return c.status == s; }));
  }
};

struct VerifyOptions {
  std::size_t nx_cap = 0;  // 0: full scale
  bool fast() const { return nx_cap != 0; }
};

inline constexpr std::size_t kFastNxCap = 400;

/// Largest nx allowed under the cap.
inline std::size_t capped(std::size_t nx, const VerifyOptions& o) {
  return o.nx_cap ? std::min(nx, o.nx_cap) : nx;
}

namespace detail {

inline CheckResult make_check(const std::string& name, bool ok, double measured, double bound,
                              std::string detail_text, bool reduced = false) {
  return {name, ok ? CheckStatus::Pass : CheckStatus::Fail, measured, bound, 0.0, reduced,
          std::move(detail_text)};
}

inline std::string fmt(double v) { return format_double(v); }

inline double relative_mass_error(std::span<const double> in, std::span<const double> out) {
  const double a = compensated_sum(in);
  const double b = compensated_sum(out);
  return a == 0.0 ? std::abs(b) : std::abs(b - a) / std::abs(a);
}

inline CheckResult check_remap(const ModelParams& m) {
  std::mt19937_64 rng(20240917);
  std::uniform_real_distribution<double> dens(0.0, 1.0);
  std::uniform_real_distribution<double> frac(0.01, 0.99);
  double worst_remap = 0.0;
  for (int i = 0; i < 50; ++i) {
    std::vector<double> f(400);
    for (double& v : f) v = dens(rng);
    for (int k = 0; k < 50; ++k) {
      worst_remap = std::max(worst_remap, relative_mass_error(f, dilation_remap(f, frac(rng))));
    }
  }
  double worst_birth = 0.0;
  const Grid1D g{10.0, 400};
  const auto s = gaussian_initial_state(g);
  for (double w : {0.0, 0.5, 3.375, 20.0}) {
    const auto b = birth_operators_at(s.p, m, w);
    const double pbar = compensated_sum(s.p);
    const double lp = m.lambda_p(w);
    const double q1 = m.p1(w), q2 = m.p2(w), q3 = 1.0 - q1 - q2;
    const double bp = compensated_sum(b.b_p), bw = compensated_sum(b.b_w);
    std::vector<double> both(b.b_p);
    for (std::size_t j = 0; j < both.size(); ++j) both[j] += b.b_w[j];
    const double expect_total = 2.0 * lp * pbar;
    if (expect_total == 0.0) continue;
    worst_birth = std::max({worst_birth, std::abs(bp - (2.0 * q1 + q3) * lp * pbar) / expect_total,
                            std::abs(bw - (2.0 * q2 + q3) * lp * pbar) / expect_total,
                            std::abs(compensated_sum(both) - expect_total) / expect_total});
  }
  const bool ok = worst_remap <= 5e-16 && worst_birth <= 1e-14;
  return make_check("remap_conservation", ok, worst_remap, 5e-16,
                    "50 densities x 50 fractions; birth mass identities max rel error " +
                        fmt(worst_birth) + " (bound 1e-14)");
}

}  // namespace detail

/// Runs all checks in order. Individual failures are recorded, never thrown.
inline VerificationSummary verify_all(const RunConfig& cfg, const VerifyOptions& opt = {}) {
  using clock = std::chrono::steady_clock;
  const ModelParams& m = cfg.model;
  const bool uniform = m.delta.is_uniform();
  VerificationSummary sum;

  auto timed = [&](const std::string& name, const std::function<CheckResult()>& body) {
    const auto t0 = clock::now();
    CheckResult r;
    try {
      r = body();
    } catch (const UnsupportedConfiguration& e) {
      r = {name, CheckStatus::Skipped, 0.0, 0.0, 0.0, false, e.what()};
    } catch (const std::exception& e) {
      r = {name, CheckStatus::Fail, 0.0, 0.0, 0.0, false, e.what()};
    }
    r.name = name;
    r.runtime_s = std::chrono::duration<double>(clock::now() - t0).count();
    sum.checks.push_back(std::move(r));
  };
  auto closure_only = [&](const std::string& name) -> std::optional<CheckResult> {
    if (uniform) return std::nullopt;
    return CheckResult{name, CheckStatus::Fail, 0.0, 0.0, 0.0, false,
                       "closure unavailable: TD death rate depends on damage"};
  };

  timed("remap_conservation", [&] { return detail::check_remap(m); });

  // Balance residuals and effective mortality share one refinement pair.
  const std::size_t nx_bal = capped(1600, opt);
  const bool bal_reduced = nx_bal < 1600;
  std::optional<PdeRun> bal_fine, bal_coarse;
  auto balance_runs = [&] {
    if (!bal_fine) {
      bal_coarse = run(m, gaussian_initial_state({20.0, nx_bal / 2}), 5.0, {cfg.solver.cfl, {}});
      bal_fine = run(m, gaussian_initial_state({20.0, nx_bal}), 5.0, {cfg.solver.cfl, {}});
    }
  };
  timed("balance_residuals", [&] {
    balance_runs();
    const auto& f = bal_fine->diagnostics;
    const auto& c = bal_coarse->diagnostics;
    const double bound = 5e-3 * 1600.0 / static_cast<double>(nx_bal);
    const double worst = std::max({f.sup_r_p, f.sup_r_w, f.sup_r_m});
    const bool decreasing = f.sup_r_p < c.sup_r_p && f.sup_r_w < c.sup_r_w && f.sup_r_m < c.sup_r_m;
    const bool agree = f.max_rm_disagreement <= 1e-14;
    return detail::make_check(
        "balance_residuals", worst <= bound && decreasing && agree, worst, bound,
        "nx " + std::to_string(nx_bal) + ": |rP| " + detail::fmt(f.sup_r_p) + ", |rW| " +
            detail::fmt(f.sup_r_w) + ", |rM| " + detail::fmt(f.sup_r_m) +
            (decreasing ? "; decreasing under refinement" : "; NOT decreasing under refinement") +
            "; rM two-way disagreement " + detail::fmt(f.max_rm_disagreement) +
            (uniform ? "" : "; closure rate delta(0)"),
        bal_reduced);
  });

  timed("delta_eff_uniformity", [&] {
    balance_runs();
    const auto& de = bal_fine->diagnostics.delta_eff;
    const auto [lo, hi] = std::minmax_element(de.begin(), de.end());
    const double ref = de.front();
    const double var = (*hi - *lo) / ref;
    return detail::make_check("delta_eff_uniformity", var <= 1e-13, var, 1e-13,
                              "relative spread of delta_eff over the run", bal_reduced);
  });

  timed("grid_convergence", [&] {
    const bool reduced = opt.nx_cap && opt.nx_cap < 800;
    std::vector<std::size_t> nxs;
    if (!reduced) {
      nxs = {100, 200, 400, 800};
    } else {
      nxs = {opt.nx_cap / 4, 2 * (opt.nx_cap / 4), 4 * (opt.nx_cap / 4)};
    }
    const auto rows = grid_convergence_study(m, 10.0, nxs, 5.0, cfg.solver.cfl);
    bool ok = true;
    double worst = 0.0;
    std::string text = "rates";
    for (const auto& r : rows) {
      for (const auto& rate : {r.rate_p, r.rate_w}) {
        if (!rate) continue;
        text += " " + detail::fmt(*rate);
        ok = ok && *rate >= 0.85 && *rate <= 1.20;
        worst = std::max(worst, std::abs(*rate - 1.0));
      }
    }
    if (!reduced) {
      const double e = rows.back().err_p;
      const bool near = e >= 4.27e-4 / 3.0 && e <= 4.27e-4 * 3.0;
      ok = ok && near;
      text += "; 400-800 |dP| " + detail::fmt(e) + " vs 4.27e-4 (factor 3)";
    }
    auto r = detail::make_check("grid_convergence", ok, worst, 0.20, text, reduced);
    return r;
  });

  timed("closure_error", [&] {
    if (auto f = closure_only("closure_error")) return *f;
    const bool reduced = opt.nx_cap && opt.nx_cap < 3200;
    std::vector<std::size_t> nxs;
    if (!reduced) {
      nxs = {400, 800, 1600, 3200};
    } else {
      nxs = {opt.nx_cap / 4, 2 * (opt.nx_cap / 4), 4 * (opt.nx_cap / 4)};
    }
    const auto rows = closure_study(m, 20.0, nxs, 15.0);
    bool ok = true;
    double worst = 0.0;
    std::string text = "error ratios";
    for (std::size_t i = 1; i < rows.size(); ++i) {
      for (double q : {rows[i - 1].err_p / rows[i].err_p, rows[i - 1].err_w / rows[i].err_w}) {
        text += " " + detail::fmt(q);
        ok = ok && q >= 1.6 && q <= 2.4;
        worst = std::max(worst, std::abs(q - 2.0) / 2.0);
      }
    }
    if (!reduced) {
      const double e = rows.back().err_p;
      ok = ok && e >= 2.11e-4 / 3.0 && e <= 2.11e-4 * 3.0;
      text += "; nx 3200 |dP| " + detail::fmt(e) + " vs 2.11e-4 (factor 3)";
    }
    const double dx = reduced ? 0.05 : 0.0125;
    const auto trunc = truncation_study(m, {10.0, 20.0}, dx, 15.0);
    const double drop = trunc[0].err_p / trunc[1].err_p;
    ok = ok && drop >= 50.0;
    text += "; truncation drop xmax 10->20 at dx " + detail::fmt(dx) + ": " + detail::fmt(drop) + "x";
    return detail::make_check("closure_error", ok, worst, 0.20, text, reduced);
  });

  std::optional<EquilibriumCert> eq;
  if (uniform) eq = unique_equilibrium(m, cfg.search());

  auto need_eq = [&](const std::string& name) -> std::optional<CheckResult> {
    if (!uniform) {
      return CheckResult{name, CheckStatus::Skipped, 0.0, 0.0, 0.0, false,
                         "requires a uniform TD death rate"};
    }
    if (!eq) {
      return CheckResult{name, CheckStatus::Fail, 0.0, 0.0, 0.0, false,
                         "no unique interior equilibrium in the search window"};
    }
    return std::nullopt;
  };

  timed("replicator_zero_crossing", [&] {
    if (auto f = need_eq("replicator_zero_crossing")) return *f;
    const auto rows = replicator_crossings(m, *eq);
    bool ok = true;
    std::size_t worst = 1;
    const double sstar = eq->pstar / (eq->pstar + eq->wstar);
    double at_sstar = std::abs(replicator_field(m, eq->pstar + eq->wstar, sstar));
    for (const auto& r : rows) {
      ok = ok && r.sign_changes == 1;
      if (r.sign_changes != 1) worst = r.sign_changes;
    }
    ok = ok && at_sstar <= 1e-10;
    return detail::make_check("replicator_zero_crossing", ok, static_cast<double>(worst), 1.0,
                              "sign changes per mass level; |field(s*)| = " + detail::fmt(at_sstar));
  });

  timed("equilibrium_certification", [&] {
    if (auto f = need_eq("equilibrium_certification")) return *f;
    const double worst_rhs = std::max(std::abs(eq->res_rhs_p), std::abs(eq->res_rhs_w));
    const bool ok = eq->accepted && std::abs(eq->res_equalization) < 1e-15 &&
                    eq->res_ratio / eq->ratio() < 1e-12 && worst_rhs < 1e-12;
    return detail::make_check(
        "equilibrium_certification", ok, std::abs(eq->res_equalization), 1e-15,
        "P* " + detail::fmt(eq->pstar) + ", W* " + detail::fmt(eq->wstar) + ", ratio residual " +
            detail::fmt(eq->res_ratio) + ", rhs/P " + detail::fmt(eq->res_rhs_p) + ", rhs/W " +
            detail::fmt(eq->res_rhs_w));
  });

  timed("origin_threshold", [&] {
    const auto summary = validate_params(m);
    if (!uniform || !summary.delta_p_crit) {
      return CheckResult{"origin_threshold", CheckStatus::Skipped, 0.0, 0.0, 0.0, false,
                         "threshold needs a positive uniform death rate"};
    }
    const double crit = *summary.delta_p_crit;
    const auto c = classify_origin(m);
    const OriginRegime expect = summary.delta_p > crit   ? OriginRegime::Growth
                                : summary.delta_p < crit ? OriginRegime::Extinction
                                                         : OriginRegime::Threshold;
    const auto recs = scan_delta_p(m, -0.8, 0.4, cfg.experiment.steps, cfg.search());
    const auto sw = regime_switches(recs);
    bool brackets = false;
    double width = 0.0;
    if (sw.size() == 1) {
      const double a = recs[sw[0].first].value, b = recs[sw[0].second].value;
      brackets = a <= crit && crit <= b;
      width = b - a;
    }
    const bool ok = c.regime == expect && sw.size() == 1 && brackets;
    return detail::make_check("origin_threshold", ok, static_cast<double>(sw.size()), 1.0,
                              "regime " + std::string(to_string(c.regime)) + ", crit " +
                                  detail::fmt(crit) + ", switch interval width " +
                                  detail::fmt(width) + (brackets ? " contains crit" : ""));
  });

  timed("slope_dominance", [&] {
    if (auto f = need_eq("slope_dominance")) return *f;
    const auto rep = slope_dominance_check(m, 1e-3, 1e3, 2000);
    std::string text = std::to_string(rep.violations) + " of 2000 samples violate; worst margin " +
                       detail::fmt(rep.worst_margin) + " at w " + detail::fmt(rep.worst_w);
    return detail::make_check("slope_dominance", rep.holds(), rep.worst_margin, 0.0, text);
  });

  timed("divergence_negative", [&] {
    if (auto f = need_eq("divergence_negative")) return *f;
    const auto rep = divergence_field(m, default_divergence_bounds(eq->pstar, eq->wstar),
                                      cfg.experiment.divergence_resolution);
    const bool ok = rep.all_negative && rep.max_rel_discrepancy <= 1e-6;
    return detail::make_check("divergence_negative", ok, rep.supremum, 0.0,
                              "analytic vs finite difference max rel " +
                                  detail::fmt(rep.max_rel_discrepancy) + "; sup dG1/dP " +
                                  detail::fmt(rep.sup_dp_g1));
  });

  timed("gain_scaling", [&] {
    if (auto f = need_eq("gain_scaling")) return *f;
    const auto rows = gain_scaling_table(m, cfg.experiment.gains, cfg.search());
    bool ok = true;
    double worst = 0.0, worst_norm = 0.0;
    for (const auto& r : rows) {
      ok = ok && r.found;
      worst = std::max(worst, r.ratio_deviation);
      worst_norm = std::max(worst_norm, std::abs(r.normalized - 1.0));
    }
    ok = ok && worst <= 5e-15 && worst_norm <= 1e-12;
    return detail::make_check("gain_scaling", ok, worst, 5e-15,
                              "max |normalized - 1| " + detail::fmt(worst_norm));
  });

  timed("mass_bound", [&] {
    if (auto f = closure_only("mass_bound")) {
      f->status = CheckStatus::Skipped;
      return *f;
    }
    const auto s0 = gaussian_initial_state({cfg.solver.xmax, cfg.solver.nx});
    const auto tr = integrate(m, {s0.pbar(), s0.wbar(), 0.0}, 15.0, cfg.integration());
    const double v = mass_bound_check(tr, m);
    const double bound = 1e-9 * tr.samples.front().mass();
    return detail::make_check("mass_bound", v <= bound, v, bound, "horizon 15");
  });

  timed("crypt_fixture", [&] {
    const auto cm = crypt_params();
    const auto ce = unique_equilibrium(cm);
    if (!ce) return detail::make_check("crypt_fixture", false, 0.0, 1e-2, "no unique equilibrium");
    const double rel = std::max(std::abs(ce->pstar / 14.0 - 1.0), std::abs(ce->wstar / 278.0 - 1.0));
    const double lp = cm.lambda_p(ce->wstar);
    const bool ok = ce->accepted && rel <= 1e-2 && std::abs(lp - 4.9643) <= 1e-3;
    return detail::make_check("crypt_fixture", ok, rel, 1e-2,
                              "equilibrium (" + detail::fmt(ce->pstar) + ", " +
                                  detail::fmt(ce->wstar) + "), lambda_p(W*) " + detail::fmt(lp));
  });

  timed("regeneration_contrast", [&] {
    const auto rep = regeneration_experiment(crypt_params(), cfg.experiment.depletion,
                                             cfg.experiment.regeneration_horizon);
    const bool ok = rep.recovery_time.has_value() && rep.ablation_monotone_decay &&
                    rep.dediff_dominates_early && rep.initial_payoff_gap_positive &&
                    rep.dediff_nonnegative;
    return detail::make_check(
        "regeneration_contrast", ok, rep.recovery_time.value_or(-1.0), rep.horizon,
        std::string("recovery ") +
            (rep.recovery_time ? "at t " + detail::fmt(*rep.recovery_time) : "not reached") +
            "; ablation " + (rep.ablation_monotone_decay ? "decays monotonically" : "not monotone") +
            " to " + detail::fmt(rep.ablation_final_pbar) + "; dedifferentiation " +
            (rep.dediff_dominates_early ? "dominates" : "does not dominate") + " until t " +
            detail::fmt(rep.early_window_end));
  });

  return sum;
}

inline json to_json(const VerificationSummary& s) {
  json checks = json::array();
  for (const auto& c : s.checks) {
    checks.push_back({{"name", c.name},
                      {"status", to_string(c.status)},
                      {"measured", c.measured},
                      {"bound", c.bound},
                      {"reduced_scale", c.reduced_scale},
                      {"detail", c.detail},
                      {"runtime_s", c.runtime_s}});
  }
  return {{"passed", s.passed()},
          {"counts",
           {{"pass", s.count(CheckStatus::Pass)},
            {"fail", s.count(CheckStatus::Fail)},
            {"skipped", s.count(CheckStatus::Skipped)}}},
          {"checks", checks}};
}

}  // namespace homeostat
