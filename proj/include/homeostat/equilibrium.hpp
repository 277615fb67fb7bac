#pragma once

// Interior equilibria of the closure via the scalar residual
//   r(w) = delta (p2(w) - p1(w)) - lambda_r(P(w)),  P(w) = delta w / lambda_p(w),
// plus the diagnostics built on it: homeostatic laws, origin classification,
// slope dominance, divergence sign and gain scaling.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "homeostat/errors.hpp"
#include "homeostat/model.hpp"
#include "homeostat/numeric.hpp"
#include "homeostat/ode.hpp"

namespace homeostat {

/// P(w) = delta w / lambda_p(w).
inline double ratio_curve(const ModelParams& m, double wbar) {
  if (!(wbar > 0.0)) throw DomainError("ratio_curve: wbar must be positive");
  const double lp = m.lambda_p(wbar);
  if (!(lp > 0.0)) throw DomainError("ratio_curve: lambda_p vanishes (singular)");
  return m.delta.uniform_rate() * wbar / lp;
}

inline double residual_r(const ModelParams& m, double wbar) {
  const double delta = m.delta.uniform_rate();
  const double p = ratio_curve(m, wbar);
  return delta * (m.p2(wbar) - m.p1(wbar)) - m.lambda_r(p);
}

struct HomeostaticLaws {
  double equalization_lhs = 0.0;  // delta (p2 - p1)(W*)
  double equalization_rhs = 0.0;  // lambda_r(P*)
  double ratio_lhs = 0.0;         // P*/W*
  double ratio_rhs = 0.0;         // delta / lambda_p(W*)
};

inline HomeostaticLaws homeostatic_laws(const ModelParams& m, double pstar, double wstar) {
  if (!(pstar > 0.0) || !(wstar > 0.0)) throw DomainError("homeostatic_laws: need a positive state");
  const double delta = m.delta.uniform_rate();
  return {delta * (m.p2(wstar) - m.p1(wstar)), m.lambda_r(pstar), pstar / wstar,
          delta / m.lambda_p(wstar)};
}

struct EquilibriumCert {
  double pstar = 0.0;
  double wstar = 0.0;
  double res_equalization = 0.0;  // delta (p2-p1)(W*) - lambda_r(P*), rate units
  double res_ratio = 0.0;         // |P*/W* - delta/lambda_p(W*)|
  double res_rhs_p = 0.0;         // dP/dt at the equilibrium divided by P*
  double res_rhs_w = 0.0;         // dW/dt at the equilibrium divided by W*
  double scaled_max = 0.0;        // largest scaled residual, compared with 10 tol
  int iterations = 0;
  bool accepted = false;

  double ratio() const { return pstar / wstar; }
};

/// Certifies (pstar, wstar). Residuals are scaled by the magnitude of the
/// terms they balance before comparison with 10 tol.
inline EquilibriumCert certify(const ModelParams& m, double pstar, double wstar, double tol) {
  EquilibriumCert c;
  c.pstar = pstar;
  c.wstar = wstar;
  const auto laws = homeostatic_laws(m, pstar, wstar);
  c.res_equalization = laws.equalization_lhs - laws.equalization_rhs;
  c.res_ratio = std::abs(laws.ratio_lhs - laws.ratio_rhs);
  const auto d = rhs_closure(m, {pstar, wstar, 0.0});
  c.res_rhs_p = d.dp / pstar;
  c.res_rhs_w = d.dw / wstar;

  const double eq_scale = std::abs(laws.equalization_lhs) + std::abs(laws.equalization_rhs);
  const double rate_scale = m.lambda_p(wstar) + m.lambda_r(pstar) + m.delta.uniform_rate();
  const double scaled[] = {
      eq_scale > 0.0 ? std::abs(c.res_equalization) / eq_scale : std::abs(c.res_equalization),
      c.res_ratio / laws.ratio_lhs,
      std::abs(c.res_rhs_p) / rate_scale,
      std::abs(c.res_rhs_w) / rate_scale,
  };
  c.scaled_max = *std::max_element(std::begin(scaled), std::end(scaled));
  c.accepted = std::isfinite(c.scaled_max) && c.scaled_max < 10.0 * tol;
  return c;
}

struct EquilibriumSearch {
  double wmin = 1e-6;
  double wmax = 1e6;
  std::size_t samples = 2000;
  double tol = 1e-14;
};

/// Bracket-and-refine: r on a log grid, one Brent refinement per sign
/// change, P* from the ratio curve. Returns every bracketed root, accepted
/// or not, in increasing W*.
inline std::vector<EquilibriumCert> find_equilibria(const ModelParams& m,
                                                    const EquilibriumSearch& s = {}) {
  if (!(s.wmin > 0.0) || !(s.wmax > s.wmin)) throw DomainError("find_equilibria: invalid window");
  if (!(s.tol > 0.0)) throw DomainError("find_equilibria: tol must be positive");
  if (s.samples < 2) throw DomainError("find_equilibria: need at least two samples");
  (void)m.delta.uniform_rate();

  const auto grid = logspace(s.wmin, s.wmax, s.samples);
  std::vector<double> r(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) r[i] = residual_r(m, grid[i]);

  auto f = [&](double w) { return residual_r(m, w); };
  std::vector<EquilibriumCert> out;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    double w = 0.0;
    int iters = 0;
    if (r[i] == 0.0) {
      w = grid[i];
    } else if (i + 1 < grid.size() && r[i + 1] != 0.0 && (r[i] < 0.0) != (r[i + 1] < 0.0)) {
      const auto root = brent_root(f, grid[i], grid[i + 1], r[i], r[i + 1]);
      w = root.x;
      iters = root.iterations;
    } else {
      continue;
    }
    auto cert = certify(m, ratio_curve(m, w), w, s.tol);
    cert.iterations = iters;
    out.push_back(cert);
  }
  return out;
}

enum class OriginRegime { Extinction, Threshold, Growth };

inline const char* to_string(OriginRegime r) {
  switch (r) {
    case OriginRegime::Extinction: return "extinction";
    case OriginRegime::Threshold: return "threshold";
    case OriginRegime::Growth: return "growth";
  }
  return "unknown";
}

struct OriginClassification {
  double trace = 0.0;
  double det = 0.0;
  OriginRegime regime = OriginRegime::Threshold;
};

/// Linearisation at the origin:
///   trace = dp lp - (delta + lr),  det = -delta lp (dp + lr/delta).
inline OriginClassification classify_origin(const ModelParams& m) {
  const double delta = m.delta.uniform_rate();
  const double dp = m.p1.baseline - m.p2.baseline;
  const double lp = m.lambda_p.baseline;
  const double lr = m.lambda_r.baseline;
  OriginClassification c;
  c.trace = dp * lp - (delta + lr);
  c.det = -(delta * lp * dp + lp * lr);
  const double scale = delta * lp * std::abs(dp) + lp * lr;
  if (std::abs(c.det) <= 1e-12 * (scale > 0.0 ? scale : 1.0)) {
    c.regime = OriginRegime::Threshold;
  } else if (c.det < 0.0) {
    c.regime = OriginRegime::Growth;
  } else {
    // det > 0 forces dp < 0 and hence trace < 0.
    c.regime = c.trace < 0.0 ? OriginRegime::Extinction : OriginRegime::Growth;
  }
  return c;
}

struct SlopeDominanceReport {
  double wmin = 0.0;
  double wmax = 0.0;
  std::size_t samples = 0;
  std::size_t violations = 0;
  double worst_margin = std::numeric_limits<double>::infinity();  // min of rhs - lhs
  double worst_w = 0.0;
  std::optional<double> first_violation_w;

  bool holds() const { return violations == 0; }
};

/// Samples -lambda_r'(P(w)) P'(w) < -delta Delta'(w), Delta = p2 - p1.
inline SlopeDominanceReport slope_dominance_check(const ModelParams& m, double wmin, double wmax,
                                                  std::size_t samples = 2000) {
  if (!(wmin > 0.0) || !(wmax > wmin)) throw DomainError("slope_dominance_check: invalid window");
  const double delta = m.delta.uniform_rate();
  SlopeDominanceReport rep;
  rep.wmin = wmin;
  rep.wmax = wmax;
  rep.samples = samples;
  for (double w : logspace(wmin, wmax, samples)) {
    const double lp = m.lambda_p(w);
    const double dlp = m.lambda_p.derivative(w);
    const double p = delta * w / lp;
    const double dpdw = delta * (lp - w * dlp) / (lp * lp);
    const double lhs = -m.lambda_r.derivative(p) * dpdw;
    const double rhs = -delta * (m.p2.derivative(w) - m.p1.derivative(w));
    const double margin = rhs - lhs;
    if (margin < rep.worst_margin) {
      rep.worst_margin = margin;
      rep.worst_w = w;
    }
    if (!(margin > 0.0)) {
      ++rep.violations;
      if (!rep.first_violation_w) rep.first_violation_w = w;
    }
  }
  return rep;
}

struct DivergenceBounds {
  double pmin = 0.0, pmax = 0.0, wmin = 0.0, wmax = 0.0;
};

struct DivergenceSample {
  double pbar = 0.0, wbar = 0.0, analytic = 0.0, finite_difference = 0.0;
};

struct DivergenceReport {
  DivergenceBounds bounds;
  std::size_t resolution = 0;
  double supremum = 0.0;         // analytic divergence
  double supremum_fd = 0.0;      // finite-difference divergence
  double sup_dp_g1 = 0.0;        // largest analytic dG1/dP
  double max_rel_discrepancy = 0.0;
  bool all_negative = false;
  std::vector<DivergenceSample> samples;  // row-major, P outer
};

/// Analytic dG1/dP and dG2/dW.
inline std::pair<double, double> divergence_terms(const ModelParams& m, double p, double w) {
  const double delta = m.delta.uniform_rate();
  const double gap = m.p1(w) - m.p2(w);
  const double dgap = m.p1.derivative(w) - m.p2.derivative(w);
  const double lp = m.lambda_p(w), dlp = m.lambda_p.derivative(w);
  const double lr = m.lambda_r(p), dlr = m.lambda_r.derivative(p);
  const double g1p = gap * lp + dlr * w;
  const double g2w = (-dgap * lp + (1.0 - gap) * dlp) * p - (delta + lr);
  return {g1p, g2w};
}

inline DivergenceBounds default_divergence_bounds(double pstar, double wstar) {
  return {0.01, 3.5 * pstar, 0.01, 3.5 * wstar};
}

/// Divergence of the closure field on a resolution x resolution grid
/// spanning the bounds inclusively; centred differences with h = 1e-5 x.
inline DivergenceReport divergence_field(const ModelParams& m, const DivergenceBounds& b,
                                         std::size_t resolution = 200, bool keep_samples = false) {
  if (!(b.pmin > 0.0) || !(b.wmin > 0.0)) {
    throw DomainError("divergence_field: bounds must stay inside the open quadrant");
  }
  if (!(b.pmax > b.pmin) || !(b.wmax > b.wmin) || resolution < 2) {
    throw DomainError("divergence_field: empty domain");
  }
  const double delta = m.delta.uniform_rate();
  DivergenceReport rep;
  rep.bounds = b;
  rep.resolution = resolution;
  rep.supremum = rep.supremum_fd = rep.sup_dp_g1 = -std::numeric_limits<double>::infinity();
  const auto ps = linspace(b.pmin, b.pmax, resolution);
  const auto ws = linspace(b.wmin, b.wmax, resolution);
  if (keep_samples) rep.samples.reserve(resolution * resolution);
  for (double p : ps) {
    for (double w : ws) {
      const auto [g1p, g2w] = divergence_terms(m, p, w);
      const double div = g1p + g2w;
      const double hp = 1e-5 * p, hw = 1e-5 * w;
      const double fd =
          (rhs_closure_rate(m, delta, p + hp, w).dp - rhs_closure_rate(m, delta, p - hp, w).dp) /
              (2.0 * hp) +
          (rhs_closure_rate(m, delta, p, w + hw).dw - rhs_closure_rate(m, delta, p, w - hw).dw) /
              (2.0 * hw);
      rep.supremum = std::max(rep.supremum, div);
      rep.supremum_fd = std::max(rep.supremum_fd, fd);
      rep.sup_dp_g1 = std::max(rep.sup_dp_g1, g1p);
      const double rel = std::abs(div - fd) / std::max(std::abs(div), 1e-300);
      rep.max_rel_discrepancy = std::max(rep.max_rel_discrepancy, rel);
      if (keep_samples) rep.samples.push_back({p, w, div, fd});
    }
  }
  rep.all_negative = rep.supremum < 0.0;
  return rep;
}

/// The unique equilibrium in the default window, or nullopt when there is
/// none or more than one.
inline std::optional<EquilibriumCert> unique_equilibrium(const ModelParams& m,
                                                         const EquilibriumSearch& s = {}) {
  auto eqs = find_equilibria(m, s);
  if (eqs.size() != 1) return std::nullopt;
  return eqs.front();
}

struct GainScaling {
  ModelParams params;
  double predicted_pstar = 0.0;
  double predicted_wstar = 0.0;
};

/// All gains multiplied by A; equilibrium predicted at (P*/A, W*/A).
inline GainScaling gain_scaling(const ModelParams& m, double a, const EquilibriumSearch& s = {}) {
  if (!(a > 0.0)) throw DomainError("gain_scaling: A must be positive");
  const auto base = unique_equilibrium(m, s);
  if (!base) throw DomainError("gain_scaling: baseline has no unique equilibrium");
  return {with_scaled_gains(m, a), base->pstar / a, base->wstar / a};
}

}  // namespace homeostat
