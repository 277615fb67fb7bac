#pragma once

// Damage-structured transport system on a uniform finite-volume grid.
// Upwind transport with zero inflow, conservative dilation remap for the
// nonlocal birth terms, Lie splitting with a forward-Euler reaction step.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "homeostat/errors.hpp"
#include "homeostat/model.hpp"
#include "homeostat/numeric.hpp"

namespace homeostat {

inline constexpr double kDefaultCfl = 0.8;

struct Grid1D {
  double xmax = 10.0;
  std::size_t nx = 800;

  double dx() const { return xmax / static_cast<double>(nx); }
  double center(std::size_t j) const { return (static_cast<double>(j) + 0.5) * dx(); }
  std::vector<double> centers() const {
    std::vector<double> x(nx);
    for (std::size_t j = 0; j < nx; ++j) x[j] = center(j);
    return x;
  }
  void validate() const {
    if (!(std::isfinite(xmax) && xmax > 0.0)) throw ConfigError("solver.xmax", "must be positive");
    if (nx < 2) throw ConfigError("solver.nx", "need at least two cells");
  }
};

struct PdeState {
  Grid1D grid;
  std::vector<double> p;
  std::vector<double> w;
  double t = 0.0;
  double mass_defect = 0.0;  // cumulative mass removed by the positivity fix

  double pbar() const { return compensated_sum(p) * grid.dx(); }
  double wbar() const { return compensated_sum(w) * grid.dx(); }
};

/// Reference initial bumps: p0 = exp(-(x-2)^2/0.5), w0 = 0.5 exp(-(x-1.5)^2/0.5),
/// sampled at cell centres.
inline PdeState gaussian_initial_state(const Grid1D& grid) {
  grid.validate();
  PdeState s;
  s.grid = grid;
  s.p.resize(grid.nx);
  s.w.resize(grid.nx);
  for (std::size_t j = 0; j < grid.nx; ++j) {
    const double x = grid.center(j);
    s.p[j] = std::exp(-(x - 2.0) * (x - 2.0) / 0.5);
    s.w[j] = 0.5 * std::exp(-(x - 1.5) * (x - 1.5) / 0.5);
  }
  return s;
}

/// Cell averages of the dilation T_a f(x) = f(x/a)/a. Source cell k maps to
/// [a k dx, a (k+1) dx], which overlaps at most two target cells.
inline std::vector<double> dilation_remap(std::span<const double> density, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("dilation_remap: alpha must lie in (0,1)");
  const std::size_t nx = density.size();
  std::vector<double> out(nx, 0.0), carry(nx, 0.0);
  auto add = [&](std::size_t j, double v) {
    const double t = out[j] + v;
    carry[j] += std::abs(out[j]) >= std::abs(v) ? (out[j] - t) + v : (v - t) + out[j];
    out[j] = t;
  };
  for (std::size_t k = 0; k < nx; ++k) {
    const double d = density[k];
    if (d == 0.0) continue;
    const double lo = alpha * static_cast<double>(k);
    const double hi = alpha * static_cast<double>(k + 1);
    const auto jl = static_cast<std::size_t>(std::floor(lo));
    const double edge = static_cast<double>(jl + 1);
    if (hi <= edge) {
      add(jl, d);
      continue;
    }
    // The larger piece is computed, the smaller is d minus it, which is
    // exact (Sterbenz), so the two pieces sum to d without rounding.
    const double frac_left = (edge - lo) / alpha;
    double left, right;
    if (frac_left >= 0.5) {
      left = d * frac_left;
      right = d - left;
    } else {
      right = d * ((hi - edge) / alpha);
      left = d - right;
    }
    add(jl, left);
    add(jl + 1, right);
  }
  for (std::size_t j = 0; j < nx; ++j) out[j] += carry[j];
  return out;
}

struct BirthTerms {
  std::vector<double> b_p;
  std::vector<double> b_w;
};

namespace detail {


/// Remaps for the six inheritance fractions, sharing equal fractions.
struct RemapSet {
  std::vector<double> a1, a2, b1, b2, g1, g2;
};

inline RemapSet remap_all(std::span<const double> p, const ModelParams& m) {
  std::vector<std::pair<double, std::vector<double>>> cache;
  auto get = [&](double a) -> std::vector<double> {
    for (const auto& [key, val] : cache) {
      if (key == a) return val;
    }
    cache.emplace_back(a, dilation_remap(p, a));
    return cache.back().second;
  };
  return {get(m.alpha.first), get(m.alpha.second), get(m.beta.first),
          get(m.beta.second), get(m.gamma.first), get(m.gamma.second)};
}

}  // namespace detail

/// Birth densities with feedback evaluated at the supplied totals.
inline BirthTerms birth_operators_at(std::span<const double> p, const ModelParams& m,
                                     double wbar) {
  const std::size_t nx = p.size();
  const double lp = m.lambda_p(wbar);
  const double q1 = m.p1(wbar);
  const double q2 = m.p2(wbar);
  const double q3 = 1.0 - q1 - q2;
  const auto r = detail::remap_all(p, m);
  BirthTerms b{std::vector<double>(nx, 0.0), std::vector<double>(nx, 0.0)};
  for (std::size_t j = 0; j < nx; ++j) {
    b.b_p[j] = q1 * lp * (r.a1[j] + r.a2[j]) + q3 * lp * r.g1[j];
    b.b_w[j] = q2 * lp * (r.b1[j] + r.b2[j]) + q3 * lp * r.g2[j];
  }
  return b;
}

inline BirthTerms birth_operators(const PdeState& s, const ModelParams& m) {
  return birth_operators_at(s.p, m, s.wbar());
}

/// Largest stable step for the given CFL number.
inline double stable_dt(const Grid1D& g, const ModelParams& m, double cfl = kDefaultCfl) {
  return cfl * g.dx() / std::max(m.v_p, m.v_w);
}

namespace detail {

inline void upwind(std::vector<double>& u, double nu) {
  // Sweep right to left so u[j-1] is still the old value.
  for (std::size_t j = u.size(); j-- > 1;) u[j] -= nu * (u[j] - u[j - 1]);
  u[0] -= nu * u[0];
}

inline double positivity_fix(std::vector<double>& u) {
  double removed = 0.0;
  if (*std::min_element(u.begin(), u.end()) >= -1e-14) return 0.0;
  for (double& v : u) {
    if (v < 0.0) {
      removed -= v;
      v = 0.0;
    }
  }
  return removed;
}

}  // namespace detail

/// One split step: transport, then reaction with post-transport feedback.
inline PdeState step(PdeState s, const ModelParams& m, double dt, double cfl = kDefaultCfl) {
  const double dx = s.grid.dx();
  if (!(cfl > 0.0 && cfl <= 1.0)) throw ConfigError("solver.cfl", "must lie in (0,1]");
  if (!(dt > 0.0) || dt > stable_dt(s.grid, m, cfl) * (1.0 + 1e-12)) {
    throw ConfigError("solver.dt", "time step violates the CFL restriction");
  }
  detail::upwind(s.p, m.v_p * dt / dx);
  detail::upwind(s.w, m.v_w * dt / dx);

  const double pbar = s.pbar();
  const double wbar = s.wbar();
  const auto b = birth_operators_at(s.p, m, wbar);
  const double lp = m.lambda_p(wbar);
  const double lr = m.lambda_r(pbar);
  const auto x = s.grid.centers();
  for (std::size_t j = 0; j < s.p.size(); ++j) {
    const double pj = s.p[j];
    const double wj = s.w[j];
    s.p[j] = pj + dt * (b.b_p[j] - lp * pj + lr * wj);
    s.w[j] = wj + dt * (b.b_w[j] - (m.delta(x[j]) + lr) * wj);
  }
  s.mass_defect += (detail::positivity_fix(s.p) + detail::positivity_fix(s.w)) * dx;
  s.t += dt;
  return s;
}

struct PdeRunSettings {
  double cfl = kDefaultCfl;
  std::vector<double> snapshot_times;  // at most 50
};

struct Snapshot {
  double t = 0.0;
  std::vector<double> p;
  std::vector<double> w;
};

struct ClosureDiagnostics {
  std::vector<double> r_p, r_w, r_m, r_m_direct, delta_eff;
  double sup_r_p = 0.0, sup_r_w = 0.0, sup_r_m = 0.0;
  double max_rm_disagreement = 0.0;
  double delta_closure = 0.0;  // death rate used in the closure residuals
};

struct PdeRun {
  std::vector<double> t, pbar, wbar, mass_defect;
  std::vector<Snapshot> snapshots;
  ClosureDiagnostics diagnostics;
  PdeState final_state;
};

/// Residuals of the closure ODE along recorded totals, using second-order
/// finite differences in time. For a damage-dependent profile the closure
/// rate is the base rate delta(0).
inline ClosureDiagnostics closure_diagnostics(const ModelParams& m, std::span<const double> t,
                                              std::span<const double> pbar,
                                              std::span<const double> wbar,
                                              std::span<const double> delta_eff) {
  ClosureDiagnostics d;
  d.delta_eff.assign(delta_eff.begin(), delta_eff.end());
  d.delta_closure = m.delta.is_uniform() ? m.delta.uniform_rate() : m.delta(0.0);
  const auto dp = time_derivative(t, pbar);
  const auto dw = time_derivative(t, wbar);
  const std::size_t n = t.size();
  d.r_p.resize(n);
  d.r_w.resize(n);
  d.r_m.resize(n);
  d.r_m_direct.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double p = pbar[i], w = wbar[i];
    const double lp = m.lambda_p(w), lr = m.lambda_r(p);
    const double gap = m.p1(w) - m.p2(w);
    d.r_p[i] = dp[i] - (gap * lp * p + lr * w);
    d.r_w[i] = dw[i] - ((1.0 - gap) * lp * p - (d.delta_closure + lr) * w);
    d.r_m[i] = d.r_p[i] + d.r_w[i];
    d.r_m_direct[i] = (dp[i] + dw[i]) - (lp * p - d.delta_closure * w);
    d.max_rm_disagreement = std::max(d.max_rm_disagreement, std::abs(d.r_m[i] - d.r_m_direct[i]));
  }
  d.sup_r_p = sup_norm(d.r_p);
  d.sup_r_w = sup_norm(d.r_w);
  d.sup_r_m = sup_norm(d.r_m);
  return d;
}

/// Damage-weighted mean death rate of the TD density.
inline double effective_mortality(const PdeState& s, const ModelParams& m) {
  std::vector<double> weighted(s.w.size());
  for (std::size_t j = 0; j < s.w.size(); ++j) weighted[j] = m.delta(s.grid.center(j)) * s.w[j];
  const double wsum = compensated_sum(s.w);
  return wsum > 0.0 ? compensated_sum(weighted) / wsum : m.delta(0.0);
}

/// Full steps of size dt up to `horizon`, plus one shortened step when the
/// remainder exceeds 1e-6 dt. Totals are recorded after every step.
inline PdeRun run(const ModelParams& m, PdeState init, double horizon,
                  const PdeRunSettings& settings = {}) {
  init.grid.validate();
  if (init.p.size() != init.grid.nx || init.w.size() != init.grid.nx) {
    throw ConfigError("initial", "density length does not match the grid");
  }
  if (!(horizon > 0.0)) throw ConfigError("horizon", "must be positive");
  if (!(settings.cfl > 0.0 && settings.cfl <= 1.0)) throw ConfigError("solver.cfl", "must lie in (0,1]");
  if (settings.snapshot_times.size() > 50) throw ConfigError("snapshots", "at most 50 snapshot times");

  const double dt = stable_dt(init.grid, m, settings.cfl);
  const auto nfull = static_cast<std::size_t>(std::floor(horizon / dt));
  const double t0 = init.t;
  const double rem = horizon - static_cast<double>(nfull) * dt;
  const std::size_t nsteps = nfull + (rem > 1e-6 * dt ? 1 : 0);

  PdeRun out;
  out.t.reserve(nsteps + 1);
  std::vector<double> deff;
  auto record = [&](const PdeState& s) {
    out.t.push_back(s.t);
    out.pbar.push_back(s.pbar());
    out.wbar.push_back(s.wbar());
    out.mass_defect.push_back(s.mass_defect);
    deff.push_back(effective_mortality(s, m));
  };
  std::vector<double> snaps = settings.snapshot_times;
  std::sort(snaps.begin(), snaps.end());
  std::size_t next_snap = 0;
  auto snapshot = [&](const PdeState& s) {
    while (next_snap < snaps.size() && snaps[next_snap] <= s.t + 1e-12 * std::max(1.0, s.t)) {
      out.snapshots.push_back({s.t, s.p, s.w});
      ++next_snap;
    }
  };

  PdeState s = std::move(init);
  record(s);
  snapshot(s);
  for (std::size_t n = 1; n <= nsteps; ++n) {
    const double h = n <= nfull ? dt : rem;
    s = step(std::move(s), m, h, settings.cfl);
    s.t = n <= nfull ? t0 + static_cast<double>(n) * dt : t0 + horizon;
    record(s);
    snapshot(s);
  }
  out.diagnostics = closure_diagnostics(m, out.t, out.pbar, out.wbar, deff);
  out.final_state = std::move(s);
  return out;
}

}  // namespace homeostat
