#pragma once

// Independent second integrator for the closure: Runge-Kutta-Fehlberg 7(8)
// from Boost.Odeint under its own step controller. Used only to cross-check
// the primary Dormand-Prince trajectories.

#include <array>
#include <span>
#include <vector>

#include <boost/numeric/odeint/integrate/integrate_times.hpp>
#include <boost/numeric/odeint/stepper/generation.hpp>
#include <boost/numeric/odeint/stepper/runge_kutta_fehlberg78.hpp>

#include "homeostat/ode.hpp"

namespace homeostat {

inline Trajectory integrate_crosscheck(const ModelParams& m, const Totals2D& initial,
                                       std::span<const double> times,
                                       const IntegrationSettings& s = {}) {
  namespace odeint = boost::numeric::odeint;
  using State = std::array<double, 2>;
  const double delta = m.delta.uniform_rate();
  auto rhs = [&](const State& y, State& dy, double) {
    const auto d = rhs_closure_rate(m, delta, y[0], y[1]);
    dy[0] = d.dp;
    dy[1] = d.dw;
  };
  Trajectory traj;
  traj.samples.reserve(times.size());
  State y{initial.pbar, initial.wbar};
  auto stepper = odeint::make_controlled(s.abstol, s.reltol, odeint::runge_kutta_fehlberg78<State>());
  const double h0 = times.size() > 1 ? (times[1] - times[0]) * 1e-3 : 1e-3;
  const std::size_t steps = odeint::integrate_times(
      stepper, rhs, y, times.begin(), times.end(), h0,
      [&](const State& x, double t) { traj.samples.push_back(detail::clamp_sample(t, x)); });
  traj.stats.accepted = steps;
  return traj;
}

}  // namespace homeostat
