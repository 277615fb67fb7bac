#pragma once

// Planar ODE for the compartment totals under uniform TD death: right-hand
// side, adaptive integration, per-capita payoffs and the replicator field.

#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include "homeostat/dopri.hpp"
#include "homeostat/errors.hpp"
#include "homeostat/model.hpp"
#include "homeostat/numeric.hpp"

namespace homeostat {

/// Undershoots below zero smaller than this are solver roundoff.
inline constexpr double kClampTolerance = 1e-12;

struct Totals2D {
  double pbar = 0.0;
  double wbar = 0.0;
  double t = 0.0;

  double mass() const { return pbar + wbar; }
  /// Stem frequency P/(P+W); NaN at the origin.
  double stem_frequency() const {
    const double m = mass();
    return m > 0.0 ? pbar / m : std::numeric_limits<double>::quiet_NaN();
  }
};

struct Derivative2D {
  double dp = 0.0;
  double dw = 0.0;
};

namespace detail {
inline double clamp_load(double v, const char* name) {
  if (v >= 0.0) return v;
  if (v >= -kClampTolerance) return 0.0;
  throw DomainError(std::string("state outside the closed quadrant: ") + name + " < 0");
}
}  // namespace detail

/// Closure right-hand side evaluated at (pbar, wbar) for the uniform death
/// rate `delta`. Does not inspect params.delta.
inline Derivative2D rhs_closure_rate(const ModelParams& m, double delta, double pbar,
                                     double wbar) {
  const double p = detail::clamp_load(pbar, "pbar");
  const double w = detail::clamp_load(wbar, "wbar");
  const double lp = m.lambda_p(w);
  const double lr = m.lambda_r(p);
  const double dp = m.p1(w) - m.p2(w);
  return {dp * lp * pbar + lr * wbar, (1.0 - dp) * lp * pbar - (delta + lr) * wbar};
}

/// Throws UnsupportedConfiguration for a damage-dependent death profile.
inline Derivative2D rhs_closure(const ModelParams& m, const Totals2D& s) {
  return rhs_closure_rate(m, m.delta.uniform_rate(), s.pbar, s.wbar);
}

struct PayoffPair {
  double f_p = 0.0;
  double f_w = 0.0;
};

inline PayoffPair payoffs(const ModelParams& m, const Totals2D& s) {
  if (!(s.pbar > 0.0) || !(s.wbar > 0.0)) {
    throw DomainError("payoffs need both compartments positive");
  }
  const auto d = rhs_closure(m, s);
  return {d.dp / s.pbar, d.dw / s.wbar};
}

/// s(1-s)(fP - fW) at (s*M, (1-s)*M); exactly 0 on the boundary.
inline double replicator_field(const ModelParams& m, double total_mass, double s) {
  if (!(total_mass > 0.0)) throw DomainError("replicator_field: mass must be positive");
  if (s == 0.0 || s == 1.0) return 0.0;
  if (!(s > 0.0 && s < 1.0)) throw DomainError("replicator_field: s outside [0,1]");
  const auto f = payoffs(m, {s * total_mass, (1.0 - s) * total_mass, 0.0});
  return s * (1.0 - s) * (f.f_p - f.f_w);
}

struct IntegrationSettings {
  double reltol = 1e-10;
  double abstol = 1e-12;
  std::size_t samples = 1000;  // uniform dense-output points, endpoints included
  double max_step = std::numeric_limits<double>::infinity();
};

struct Trajectory {
  std::vector<Totals2D> samples;
  DopriStats stats;

  std::vector<double> times() const {
    std::vector<double> v;
    v.reserve(samples.size());
    for (const auto& s : samples) v.push_back(s.t);
    return v;
  }
  const Totals2D& back() const { return samples.back(); }
};

class IntegrationError : public Error {
 public:
  IntegrationError(const std::string& what, Totals2D last) : Error(what), last_(last) {}
  const Totals2D& last_valid() const noexcept { return last_; }

 private:
  Totals2D last_;
};

namespace detail {
inline Totals2D clamp_sample(double t, const StateVec<2>& y) {
  return {y[0] < 0.0 && y[0] >= -kClampTolerance ? 0.0 : y[0],
          y[1] < 0.0 && y[1] >= -kClampTolerance ? 0.0 : y[1], t};
}
}  // namespace detail

/// Integrates the closure at the given sample times (increasing, first >= t0).
inline Trajectory integrate_at(const ModelParams& m, const Totals2D& initial,
                               std::span<const double> times, const IntegrationSettings& s = {}) {
  const double delta = m.delta.uniform_rate();
  if (!(s.reltol > 0.0) || !(s.abstol > 0.0)) throw DomainError("tolerances must be positive");
  Trajectory traj;
  traj.samples.reserve(times.size());
  auto f = [&](double, const StateVec<2>& y) {
    const auto d = rhs_closure_rate(m, delta, y[0], y[1]);
    return StateVec<2>{d.dp, d.dw};
  };
  DopriSettings ds;
  ds.reltol = s.reltol;
  ds.abstol = s.abstol;
  ds.max_step = s.max_step;
  try {
    traj.stats = dopri45_integrate<2>(f, initial.t, {initial.pbar, initial.wbar}, times, ds,
                                      [&](double t, const StateVec<2>& y) {
                                        traj.samples.push_back(detail::clamp_sample(t, y));
                                      });
  } catch (const StepSizeUnderflow<2>& e) {
    throw IntegrationError(e.what(), detail::clamp_sample(e.time(), e.state()));
  } catch (const DomainError& e) {
    const Totals2D last = traj.samples.empty() ? initial : traj.samples.back();
    throw IntegrationError(std::string("integration failed: ") + e.what(), last);
  }
  return traj;
}

/// Integrates over [initial.t, initial.t + horizon] with uniform samples.
inline Trajectory integrate(const ModelParams& m, const Totals2D& initial, double horizon,
                            const IntegrationSettings& s = {}) {
  if (!(horizon > 0.0)) throw DomainError("horizon must be positive");
  if (s.samples < 2) throw DomainError("need at least two samples");
  const auto times = linspace(initial.t, initial.t + horizon, s.samples);
  return integrate_at(m, initial, times, s);
}

/// max over samples of M(t) - M(0) exp(lambda_p_hat (t - t0)).
inline double mass_bound_check(const Trajectory& traj, const ModelParams& m) {
  if (traj.samples.empty()) throw DomainError("mass_bound_check: empty trajectory");
  const double m0 = traj.samples.front().mass();
  const double t0 = traj.samples.front().t;
  double worst = 0.0;
  for (const auto& s : traj.samples) {
    worst = std::max(worst, s.mass() - m0 * std::exp(m.lambda_p.baseline * (s.t - t0)));
  }
  return worst;
}

}  // namespace homeostat
