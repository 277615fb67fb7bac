#pragma once

// Studies assembled from the solvers: parameter scans, grid and closure
// convergence, the gain-scaling table, crypt calibration, regeneration after
// stem depletion, and the long-horizon convergence check.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "homeostat/equilibrium.hpp"
#include "homeostat/errors.hpp"
#include "homeostat/model.hpp"
#include "homeostat/numeric.hpp"
#include "homeostat/ode.hpp"
#include "homeostat/optimize.hpp"
#include "homeostat/pde.hpp"

namespace homeostat {

// ---------------------------------------------------------------- scans

struct ScanRecord {
  double value = 0.0;  // scanned parameter (delta_p or delta)
  double p1hat = 0.0;
  double p2hat = 0.0;
  double delta = 0.0;
  bool admissible = false;
  std::optional<OriginClassification> origin;
  std::vector<EquilibriumCert> equilibria;  // empty when absent
  std::string note;
};

/// p1hat = (0.8 + dp)/3, p2hat = (0.8 - 2 dp)/3, everything else unchanged.
inline ModelParams affine_delta_p(ModelParams m, double delta_p) {
  m.p1.baseline = (0.8 + delta_p) / 3.0;
  m.p2.baseline = (0.8 - 2.0 * delta_p) / 3.0;
  return m;
}

inline bool probabilities_admissible(double p1hat, double p2hat) {
  return p1hat >= 0.0 && p1hat <= 1.0 && p2hat >= 0.0 && p2hat <= 1.0 &&
         p1hat + p2hat <= 1.0 + 1e-12;
}

namespace detail {
inline void solve_scan_point(ScanRecord& rec, const ModelParams& m, const EquilibriumSearch& s) {
  rec.origin = classify_origin(m);
  for (auto& c : find_equilibria(m, s)) {
    if (c.accepted) rec.equilibria.push_back(c);
  }
  if (rec.equilibria.empty()) rec.note = "no interior equilibrium";
}
}  // namespace detail

inline std::vector<ScanRecord> scan_delta_p(const ModelParams& base, double lo = -0.8,
                                            double hi = 0.4, std::size_t steps = 121,
                                            const EquilibriumSearch& s = {}) {
  std::vector<ScanRecord> out;
  for (double dp : linspace(lo, hi, steps)) {
    ScanRecord rec;
    rec.value = dp;
    const auto m = affine_delta_p(base, dp);
    rec.p1hat = m.p1.baseline;
    rec.p2hat = m.p2.baseline;
    rec.delta = m.delta.uniform_rate();
    rec.admissible = probabilities_admissible(rec.p1hat, rec.p2hat);
    if (!rec.admissible) {
      rec.note = "probability constraints violated";
    } else {
      detail::solve_scan_point(rec, m, s);
    }
    out.push_back(std::move(rec));
  }
  return out;
}

inline std::vector<ScanRecord> scan_delta(const ModelParams& base, double lo = 0.1,
                                          double hi = 2.5, std::size_t steps = 121,
                                          const EquilibriumSearch& s = {}) {
  std::vector<ScanRecord> out;
  for (double d : linspace(lo, hi, steps)) {
    ScanRecord rec;
    rec.value = d;
    rec.delta = d;
    rec.p1hat = base.p1.baseline;
    rec.p2hat = base.p2.baseline;
    rec.admissible = d > 0.0 && std::isfinite(d);
    if (!rec.admissible) {
      rec.note = "death rate must be positive";
    } else {
      ModelParams m = base;
      m.delta = DeathProfile::uniform(d);
      detail::solve_scan_point(rec, m, s);
    }
    out.push_back(std::move(rec));
  }
  return out;
}

/// Index pairs (i, j) of consecutive classified records whose regimes are
/// Extinction and Growth in either order. Records sitting exactly on the
/// threshold are skipped, so a switch through a threshold node spans it.
inline std::vector<std::pair<std::size_t, std::size_t>> regime_switches(
    const std::vector<ScanRecord>& recs) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  std::optional<std::size_t> prev;
  for (std::size_t i = 0; i < recs.size(); ++i) {
    if (!recs[i].origin || recs[i].origin->regime == OriginRegime::Threshold) continue;
    if (prev && recs[*prev].origin->regime != recs[i].origin->regime) out.emplace_back(*prev, i);
    prev = i;
  }
  return out;
}

// ---------------------------------------------------- grid studies

struct RefinementRow {
  std::size_t nx_coarse = 0;
  std::size_t nx_fine = 0;
  double err_p = 0.0;
  double err_w = 0.0;
  std::optional<double> rate_p;  // log2 of previous error over this one
  std::optional<double> rate_w;
};

namespace detail {

inline double sup_diff_at(std::span<const double> tc, std::span<const double> yc,
                          std::span<const double> tf, std::span<const double> yf) {
  double e = 0.0;
  for (std::size_t i = 0; i < tc.size(); ++i) {
    e = std::max(e, std::abs(yc[i] - interpolate_linear(tf, yf, tc[i])));
  }
  return e;
}

inline void fill_rates(std::vector<RefinementRow>& rows) {
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].err_p > 0.0 && rows[i - 1].err_p > 0.0)
      rows[i].rate_p = std::log2(rows[i - 1].err_p / rows[i].err_p);
    if (rows[i].err_w > 0.0 && rows[i - 1].err_w > 0.0)
      rows[i].rate_w = std::log2(rows[i - 1].err_w / rows[i].err_w);
  }
}

inline void check_refinement(const std::vector<std::size_t>& nx_list) {
  if (nx_list.size() < 2) throw ConfigError("nx_list", "need at least two grids");
  for (std::size_t i = 1; i < nx_list.size(); ++i) {
    if (nx_list[i] != nx_list[i - 1] && nx_list[i] != 2 * nx_list[i - 1]) {
      throw ConfigError("nx_list", "each grid must double the previous one");
    }
  }
}

}  // namespace detail

/// Sup-norm differences of consecutive grids' totals, on the coarse grid's
/// recorded times.
inline std::vector<RefinementRow> grid_convergence_study(const ModelParams& m, double xmax,
                                                         const std::vector<std::size_t>& nx_list,
                                                         double horizon, double cfl = kDefaultCfl) {
  detail::check_refinement(nx_list);
  std::vector<PdeRun> runs;
  for (std::size_t nx : nx_list) {
    runs.push_back(run(m, gaussian_initial_state({xmax, nx}), horizon, {cfl, {}}));
  }
  std::vector<RefinementRow> rows;
  for (std::size_t i = 0; i + 1 < runs.size(); ++i) {
    const auto& c = runs[i];
    const auto& f = runs[i + 1];
    rows.push_back({nx_list[i], nx_list[i + 1], detail::sup_diff_at(c.t, c.pbar, f.t, f.pbar),
                    detail::sup_diff_at(c.t, c.wbar, f.t, f.wbar), std::nullopt, std::nullopt});
  }
  detail::fill_rates(rows);
  return rows;
}

struct ClosureRow {
  double xmax = 0.0;
  std::size_t nx = 0;
  double err_p = 0.0;
  double err_w = 0.0;
  std::optional<double> rate_p;
  std::optional<double> rate_w;
};

/// PDE totals against the closure ODE started from the same discrete masses.
inline ClosureRow closure_error(const ModelParams& m, const Grid1D& grid, double horizon,
                                double cfl = kDefaultCfl) {
  const auto pde = run(m, gaussian_initial_state(grid), horizon, {cfl, {}});
  const auto ode = integrate_at(m, {pde.pbar.front(), pde.wbar.front(), 0.0}, pde.t);
  ClosureRow row{grid.xmax, grid.nx, 0.0, 0.0, std::nullopt, std::nullopt};
  for (std::size_t i = 0; i < pde.t.size(); ++i) {
    row.err_p = std::max(row.err_p, std::abs(pde.pbar[i] - ode.samples[i].pbar));
    row.err_w = std::max(row.err_w, std::abs(pde.wbar[i] - ode.samples[i].wbar));
  }
  return row;
}

inline std::vector<ClosureRow> closure_study(const ModelParams& m, double xmax,
                                             const std::vector<std::size_t>& nx_list,
                                             double horizon) {
  detail::check_refinement(nx_list);
  std::vector<ClosureRow> rows;
  for (std::size_t nx : nx_list) rows.push_back(closure_error(m, {xmax, nx}, horizon));
  for (std::size_t i = 1; i < rows.size(); ++i) {
    rows[i].rate_p = std::log2(rows[i - 1].err_p / rows[i].err_p);
    rows[i].rate_w = std::log2(rows[i - 1].err_w / rows[i].err_w);
  }
  return rows;
}

/// Closure error at fixed cell width across domain lengths.
inline std::vector<ClosureRow> truncation_study(const ModelParams& m,
                                                const std::vector<double>& xmax_list, double dx,
                                                double horizon) {
  std::vector<ClosureRow> rows;
  for (double xmax : xmax_list) {
    const auto nx = static_cast<std::size_t>(std::llround(xmax / dx));
    rows.push_back(closure_error(m, {xmax, nx}, horizon));
  }
  return rows;
}

// --------------------------------------------------- gain scaling

struct GainScalingRow {
  double a = 0.0;
  double pstar = 0.0;
  double wstar = 0.0;
  double normalized = 0.0;  // pstar_A / (pstar_1 / A)
  double ratio = 0.0;
  double ratio_deviation = 0.0;
  bool found = false;
};

inline std::vector<GainScalingRow> gain_scaling_table(const ModelParams& m,
                                                      const std::vector<double>& a_list,
                                                      const EquilibriumSearch& s = {}) {
  const auto base = unique_equilibrium(m, s);
  if (!base) throw DomainError("gain_scaling_table: baseline has no unique equilibrium");
  std::vector<GainScalingRow> rows;
  for (double a : a_list) {
    const auto scaled = gain_scaling(m, a, s);
    GainScalingRow row;
    row.a = a;
    if (const auto eq = unique_equilibrium(scaled.params, s)) {
      row.found = true;
      row.pstar = eq->pstar;
      row.wstar = eq->wstar;
      row.normalized = eq->pstar / scaled.predicted_pstar;
      row.ratio = eq->ratio();
      row.ratio_deviation = std::abs(row.ratio - base->ratio());
    }
    rows.push_back(row);
  }
  return rows;
}

// ----------------------------------------------------- calibration

struct CalibrationTarget {
  double pstar = 14.0;
  double wstar = 278.0;
  double delta = 0.25;
  double exponent = 2.0;

  double stem_frequency() const { return pstar / (pstar + wstar); }
};

struct CalibrationSettings {
  std::size_t evaluations_per_restart = 3000;
  std::size_t restarts = 8;
  double objective_tol = 1e-18;
  double placement_tol = 1e-9;
  EquilibriumSearch search{};
};

struct CalibrationResult {
  ModelParams params;
  double objective = 0.0;
  double objective_initial = 0.0;
  double equalization_term = 0.0;
  double ratio_term = 0.0;
  double placement = 1.0;  // relative distance of the nearest solver equilibrium
  std::optional<EquilibriumCert> equilibrium;
  std::size_t evaluations = 0;
  bool accepted = false;
};

namespace detail {

inline ModelParams params_from_log(const std::array<double, 8>& th, const CalibrationTarget& t,
                                   const ModelParams& shell) {
  ModelParams m = shell;
  m.p1 = {std::exp(th[0]), std::exp(th[4]), t.exponent};
  m.p2 = {std::exp(th[1]), std::exp(th[5]), t.exponent};
  m.lambda_p = {std::exp(th[2]), std::exp(th[6]), t.exponent};
  m.lambda_r = {std::exp(th[3]), std::exp(th[7]), t.exponent};
  m.delta = DeathProfile::uniform(t.delta);
  return m;
}

struct CalibrationTerms {
  double e1 = 1.0, e2 = 1.0, e3 = 1.0;
  std::optional<EquilibriumCert> nearest;
  double value() const { return e1 * e1 + e2 * e2 + e3 * e3; }
};

inline CalibrationTerms calibration_terms(const ModelParams& m, const CalibrationTarget& t,
                                          const EquilibriumSearch& s) {
  CalibrationTerms c;
  const double a = t.delta * (m.p2(t.wstar) - m.p1(t.wstar));
  const double b = m.lambda_r(t.pstar);
  c.e1 = (a - b) / (std::abs(a) + std::abs(b));
  c.e2 = t.pstar * m.lambda_p(t.wstar) / (t.delta * t.wstar) - 1.0;
  const double norm = std::hypot(t.pstar, t.wstar);
  for (const auto& eq : find_equilibria(m, s)) {
    const double d = std::hypot(eq.pstar - t.pstar, eq.wstar - t.wstar) / norm;
    if (d < c.e3) {
      c.e3 = d;
      c.nearest = eq;
    }
  }
  return c;
}

}  // namespace detail

/// Log-space parameter vector (p1hat, p2hat, lambda_p_hat, lambda_r_hat,
/// k1, k2, k3, k4) of a model.
inline std::array<double, 8> calibration_vector(const ModelParams& m) {
  return {std::log(m.p1.baseline), std::log(m.p2.baseline), std::log(m.lambda_p.baseline),
          std::log(m.lambda_r.baseline), std::log(m.p1.gain), std::log(m.p2.gain),
          std::log(m.lambda_p.gain), std::log(m.lambda_r.gain)};
}

/// Starting point scaled to the target: gains at 1/load, lambda_p baseline
/// at delta W*/P*.
inline ModelParams default_calibration_guess(const CalibrationTarget& t) {
  ModelParams m = reference_params();
  const double e = t.exponent;
  m.p1 = {0.1, 1.0 / t.wstar, e};
  m.p2 = {0.3, 1.0 / t.wstar, e};
  m.lambda_p = {t.delta * t.wstar / t.pstar, 1.0 / t.wstar, e};
  m.lambda_r = {0.1, 1.0 / t.pstar, e};
  m.delta = DeathProfile::uniform(t.delta);
  return m;
}

/// Objective: e1^2 + e2^2 + e3^2 with e1 the relative equalization-law
/// residual at the target, e2 the ratio-law residual and e3 the relative
/// distance from the target to the nearest solver equilibrium (1 if none).
/// Vectors with p1hat + p2hat > 1 or |log theta| > 20 score 1e3.
inline CalibrationResult calibrate_crypt(const CalibrationTarget& target,
                                         std::optional<ModelParams> guess = std::nullopt,
                                         const CalibrationSettings& s = {}) {
  if (!(target.pstar > 0.0) || !(target.wstar > 0.0) || !(target.delta > 0.0)) {
    throw DomainError("calibrate_crypt: targets and delta must be positive");
  }
  const ModelParams shell = guess ? *guess : default_calibration_guess(target);
  auto objective = [&](const std::vector<double>& x) {
    std::array<double, 8> th{};
    for (std::size_t i = 0; i < 8; ++i) {
      if (!std::isfinite(x[i]) || std::abs(x[i]) > 20.0) return 1e3;
      th[i] = x[i];
    }
    if (std::exp(th[0]) + std::exp(th[1]) > 1.0) return 1e3;
    const auto m = detail::params_from_log(th, target, shell);
    return detail::calibration_terms(m, target, s.search).value();
  };

  const auto th0 = calibration_vector(shell);
  NelderMeadSettings nm;
  nm.max_evaluations = s.evaluations_per_restart;
  nm.restarts = s.restarts;
  nm.target = 0.0;
  const auto res = nelder_mead(objective, std::vector<double>(th0.begin(), th0.end()), nm);

  CalibrationResult out;
  std::array<double, 8> th{};
  std::copy(res.x.begin(), res.x.end(), th.begin());
  out.params = detail::params_from_log(th, target, shell);
  out.objective = res.f;
  out.objective_initial = objective(std::vector<double>(th0.begin(), th0.end()));
  out.evaluations = res.evaluations;
  const auto terms = detail::calibration_terms(out.params, target, s.search);
  out.equalization_term = terms.e1;
  out.ratio_term = terms.e2;
  out.placement = terms.e3;
  out.equilibrium = terms.nearest;
  out.accepted = out.objective < s.objective_tol && out.placement < s.placement_tol &&
                 out.equilibrium && out.equilibrium->accepted;
  return out;
}

// ---------------------------------------------------- regeneration

struct RegenerationSample {
  double t = 0.0;
  double pbar = 0.0;
  double wbar = 0.0;
  double s = 0.0;
  double dediff_flux = 0.0;   // lambda_r(P) W
  double net_division = 0.0;  // (p1 - p2) lambda_p P
  double payoff_gap = 0.0;    // fP - fW
  double ablation_pbar = 0.0;
  double ablation_wbar = 0.0;
};

struct RegenerationReport {
  double pstar = 0.0;
  double wstar = 0.0;
  double sstar = 0.0;
  double depletion = 0.0;
  double horizon = 0.0;
  std::vector<RegenerationSample> samples;
  std::optional<double> recovery_time;       // s stays within [0.9, 1.1] s* from here on
  double early_window_end = 0.0;             // first time P reaches P*/2 (or horizon)
  bool dediff_dominates_early = false;
  bool ablation_monotone_decay = false;
  double ablation_final_pbar = 0.0;
  bool initial_payoff_gap_positive = false;
  bool dediff_nonnegative = false;
};

/// Integrates from (depletion P*, W*) with and without dedifferentiation.
inline RegenerationReport regeneration_experiment(const ModelParams& m, double depletion = 0.1,
                                                  double horizon = 100.0,
                                                  std::size_t samples = 1001,
                                                  const EquilibriumSearch& search = {}) {
  if (!(depletion > 0.0 && depletion <= 1.0)) {
    throw DomainError("regeneration_experiment: depletion fraction must lie in (0,1]");
  }
  if (!(horizon > 0.0)) throw DomainError("regeneration_experiment: horizon must be positive");
  const auto eq = unique_equilibrium(m, search);
  if (!eq || !eq->accepted) {
    throw DomainError("regeneration_experiment: parameters have no certified equilibrium");
  }
  RegenerationReport rep;
  rep.pstar = eq->pstar;
  rep.wstar = eq->wstar;
  rep.sstar = eq->pstar / (eq->pstar + eq->wstar);
  rep.depletion = depletion;
  rep.horizon = horizon;

  const Totals2D init{depletion * eq->pstar, eq->wstar, 0.0};
  IntegrationSettings is;
  is.samples = samples;
  const auto full = integrate(m, init, horizon, is);
  ModelParams ablated = m;
  ablated.lambda_r.baseline = 0.0;
  const auto abl = integrate(ablated, init, horizon, is);

  rep.dediff_nonnegative = true;
  rep.samples.reserve(samples);
  for (std::size_t i = 0; i < full.samples.size(); ++i) {
    const auto& x = full.samples[i];
    RegenerationSample r;
    r.t = x.t;
    r.pbar = x.pbar;
    r.wbar = x.wbar;
    r.s = x.stem_frequency();
    r.dediff_flux = m.lambda_r(x.pbar) * x.wbar;
    r.net_division = (m.p1(x.wbar) - m.p2(x.wbar)) * m.lambda_p(x.wbar) * x.pbar;
    r.payoff_gap = (x.pbar > 0.0 && x.wbar > 0.0)
                       ? [&] {
                           const auto f = payoffs(m, x);
                           return f.f_p - f.f_w;
                         }()
                       : 0.0;
    r.ablation_pbar = abl.samples[i].pbar;
    r.ablation_wbar = abl.samples[i].wbar;
    rep.dediff_nonnegative = rep.dediff_nonnegative && r.dediff_flux >= 0.0;
    rep.samples.push_back(r);
  }

  // Recovery: last exit from the band, then the next sample is the entry.
  const auto in_band = [&](double s) { return std::abs(s / rep.sstar - 1.0) <= 0.1; };
  if (in_band(rep.samples.back().s)) {
    std::size_t k = rep.samples.size() - 1;
    while (k > 0 && in_band(rep.samples[k - 1].s)) --k;
    rep.recovery_time = rep.samples[k].t;
  }

  rep.early_window_end = horizon;
  for (const auto& r : rep.samples) {
    if (r.pbar >= 0.5 * rep.pstar) {
      rep.early_window_end = r.t;
      break;
    }
  }
  rep.dediff_dominates_early = true;
  for (const auto& r : rep.samples) {
    if (r.t > rep.early_window_end) break;
    if (!(r.dediff_flux > std::abs(r.net_division))) rep.dediff_dominates_early = false;
  }

  // Monotone up to the integrator's absolute tolerance.
  rep.ablation_monotone_decay = true;
  for (std::size_t i = 1; i < rep.samples.size(); ++i) {
    if (rep.samples[i].ablation_pbar > rep.samples[i - 1].ablation_pbar + is.abstol) {
      rep.ablation_monotone_decay = false;
    }
  }
  rep.ablation_final_pbar = rep.samples.back().ablation_pbar;
  rep.initial_payoff_gap_positive =
      rep.samples.front().s < rep.sstar ? rep.samples.front().payoff_gap > 0.0 : true;
  return rep;
}

// ------------------------------------------------ global convergence

struct ConvergenceRow {
  double p0 = 0.0, w0 = 0.0;
  double p_end = 0.0, w_end = 0.0;
  double distance = 0.0;  // Euclidean distance to the equilibrium at the horizon
  double tail_onset = 0.0;
  std::size_t sign_changes_after_tail = 0;
};

/// Interior starts as multiples of (P*, W*).
inline std::vector<std::array<double, 2>> default_start_factors() {
  return {{{0.1, 0.1}}, {{3.0, 0.2}}, {{0.2, 3.0}}, {{3.0, 3.0}},
          {{0.5, 1.5}}, {{1.5, 0.5}}, {{0.01, 1.0}}, {{1.0, 0.01}}};
}

/// The tail begins at the earliest sample after which |M - M*| never
/// increases; dM/dt = lambda_p P - delta W is then checked for sign changes
/// at the later samples (values below 1e-12 in magnitude are ignored).
inline std::vector<ConvergenceRow> convergence_study(const ModelParams& m, const EquilibriumCert& eq,
                                                     double horizon = 200.0,
                                                     std::size_t samples = 4001) {
  const double delta = m.delta.uniform_rate();
  const double mstar = eq.pstar + eq.wstar;
  std::vector<ConvergenceRow> rows;
  IntegrationSettings is;
  is.samples = samples;
  for (const auto& f : default_start_factors()) {
    ConvergenceRow row;
    row.p0 = f[0] * eq.pstar;
    row.w0 = f[1] * eq.wstar;
    const auto tr = integrate(m, {row.p0, row.w0, 0.0}, horizon, is);
    row.p_end = tr.back().pbar;
    row.w_end = tr.back().wbar;
    row.distance = std::hypot(row.p_end - eq.pstar, row.w_end - eq.wstar);
    std::size_t onset = tr.samples.size() - 1;
    while (onset > 0 && std::abs(tr.samples[onset - 1].mass() - mstar) >=
                            std::abs(tr.samples[onset].mass() - mstar)) {
      --onset;
    }
    row.tail_onset = tr.samples[onset].t;
    int sign = 0;
    for (std::size_t i = onset + 1; i < tr.samples.size(); ++i) {
      const auto& x = tr.samples[i];
      const double dm = m.lambda_p(x.wbar) * x.pbar - delta * x.wbar;
      if (std::abs(dm) < 1e-12) continue;
      const int sg = dm > 0.0 ? 1 : -1;
      if (sign != 0 && sg != sign) ++row.sign_changes_after_tail;
      sign = sg;
    }
    rows.push_back(row);
  }
  return rows;
}

struct ReplicatorCrossing {
  double mass_factor = 0.0;
  std::size_t sign_changes = 0;
  std::optional<double> crossing;  // s where the field changes sign
};

/// Sign changes of the replicator field in s on (0.001, 0.999), 2000 points.
inline std::vector<ReplicatorCrossing> replicator_crossings(
    const ModelParams& m, const EquilibriumCert& eq,
    const std::vector<double>& mass_factors = {0.3, 0.6, 1.0, 1.5, 2.5}, std::size_t points = 2000) {
  const double mstar = eq.pstar + eq.wstar;
  std::vector<ReplicatorCrossing> out;
  const auto grid = linspace(0.001, 0.999, points);
  for (double fct : mass_factors) {
    ReplicatorCrossing c;
    c.mass_factor = fct;
    double prev = replicator_field(m, fct * mstar, grid[0]);
    for (std::size_t i = 1; i < grid.size(); ++i) {
      const double v = replicator_field(m, fct * mstar, grid[i]);
      if ((prev < 0.0) != (v < 0.0) && v != prev) {
        ++c.sign_changes;
        if (!c.crossing) c.crossing = 0.5 * (grid[i - 1] + grid[i]);
      }
      prev = v;
    }
    out.push_back(c);
  }
  return out;
}

}  // namespace homeostat
