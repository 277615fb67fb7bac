#pragma once

// Dormand-Prince 5(4) embedded Runge-Kutta pair with PI-free step control
// and the method's native fourth-order continuous extension, for small
// fixed-size systems.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>

#include "homeostat/errors.hpp"

namespace homeostat {

template <std::size_t N>
using StateVec = std::array<double, N>;

struct DopriSettings {
  double reltol = 1e-10;
  double abstol = 1e-12;
  double max_step = std::numeric_limits<double>::infinity();
  double initial_step = 0.0;  // 0 selects the automatic starting step
  std::size_t max_steps = 50'000'000;
};

struct DopriStats {
  std::size_t accepted = 0;
  std::size_t rejected = 0;
  std::size_t rhs_evaluations = 0;
  double max_error_estimate = 0.0;  // largest normalised error of an accepted step
};

/// Thrown when the controller cannot make progress. Carries the last
/// accepted state.
template <std::size_t N>
class StepSizeUnderflow : public Error {
 public:
  StepSizeUnderflow(double t, StateVec<N> y)
      : Error("integration failed: step size underflow at t = " + std::to_string(t)),
        t_(t),
        y_(y) {}
  double time() const noexcept { return t_; }
  const StateVec<N>& state() const noexcept { return y_; }

 private:
  double t_;
  StateVec<N> y_;
};

namespace dopri_tableau {
inline constexpr double c2 = 1.0 / 5.0, c3 = 3.0 / 10.0, c4 = 4.0 / 5.0, c5 = 8.0 / 9.0;
inline constexpr double a21 = 1.0 / 5.0;
inline constexpr double a31 = 3.0 / 40.0, a32 = 9.0 / 40.0;
inline constexpr double a41 = 44.0 / 45.0, a42 = -56.0 / 15.0, a43 = 32.0 / 9.0;
inline constexpr double a51 = 19372.0 / 6561.0, a52 = -25360.0 / 2187.0,
                        a53 = 64448.0 / 6561.0, a54 = -212.0 / 729.0;
inline constexpr double a61 = 9017.0 / 3168.0, a62 = -355.0 / 33.0, a63 = 46732.0 / 5247.0,
                        a64 = 49.0 / 176.0, a65 = -5103.0 / 18656.0;
inline constexpr double a71 = 35.0 / 384.0, a73 = 500.0 / 1113.0, a74 = 125.0 / 192.0,
                        a75 = -2187.0 / 6784.0, a76 = 11.0 / 84.0;
// b5 - b4
inline constexpr double e1 = 71.0 / 57600.0, e3 = -71.0 / 16695.0, e4 = 71.0 / 1920.0,
                        e5 = -17253.0 / 339200.0, e6 = 22.0 / 525.0, e7 = -1.0 / 40.0;
// continuous extension
inline constexpr double d1 = -12715105075.0 / 11282082432.0,
                        d3 = 87487479700.0 / 32700410799.0,
                        d4 = -10690763975.0 / 1880347072.0,
                        d5 = 701980252875.0 / 199316789632.0,
                        d6 = -1453857185.0 / 822651844.0, d7 = 69997945.0 / 29380423.0;
}  // namespace dopri_tableau

namespace detail {

template <std::size_t N>
struct DopriStep {
  StateVec<N> y1{};
  StateVec<N> k7{};   // f(t + h, y1), reused as k1 of the next step
  StateVec<N> err{};  // local error estimate
  std::array<StateVec<N>, 5> dense{};
};

template <std::size_t N, class Rhs>
DopriStep<N> dopri_step(Rhs& f, double t, const StateVec<N>& y, const StateVec<N>& k1,
                        double h, bool want_dense) {
  using namespace dopri_tableau;
  DopriStep<N> out;
  StateVec<N> tmp, k2, k3, k4, k5, k6;
  for (std::size_t i = 0; i < N; ++i) tmp[i] = y[i] + h * a21 * k1[i];
  k2 = f(t + c2 * h, tmp);
  for (std::size_t i = 0; i < N; ++i) tmp[i] = y[i] + h * (a31 * k1[i] + a32 * k2[i]);
  k3 = f(t + c3 * h, tmp);
  for (std::size_t i = 0; i < N; ++i)
    tmp[i] = y[i] + h * (a41 * k1[i] + a42 * k2[i] + a43 * k3[i]);
  k4 = f(t + c4 * h, tmp);
  for (std::size_t i = 0; i < N; ++i)
    tmp[i] = y[i] + h * (a51 * k1[i] + a52 * k2[i] + a53 * k3[i] + a54 * k4[i]);
  k5 = f(t + c5 * h, tmp);
  for (std::size_t i = 0; i < N; ++i)
    tmp[i] = y[i] + h * (a61 * k1[i] + a62 * k2[i] + a63 * k3[i] + a64 * k4[i] + a65 * k5[i]);
  k6 = f(t + h, tmp);
  for (std::size_t i = 0; i < N; ++i)
    out.y1[i] = y[i] + h * (a71 * k1[i] + a73 * k3[i] + a74 * k4[i] + a75 * k5[i] + a76 * k6[i]);
  out.k7 = f(t + h, out.y1);
  for (std::size_t i = 0; i < N; ++i) {
    out.err[i] = h * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] + e6 * k6[i] +
                      e7 * out.k7[i]);
  }
  if (want_dense) {
    for (std::size_t i = 0; i < N; ++i) {
      const double dy = out.y1[i] - y[i];
      const double bspl = h * k1[i] - dy;
      out.dense[0][i] = y[i];
      out.dense[1][i] = dy;
      out.dense[2][i] = bspl;
      out.dense[3][i] = dy - h * out.k7[i] - bspl;
      out.dense[4][i] = h * (d1 * k1[i] + d3 * k3[i] + d4 * k4[i] + d5 * k5[i] + d6 * k6[i] +
                             d7 * out.k7[i]);
    }
  }
  return out;
}

template <std::size_t N>
StateVec<N> dopri_dense(const std::array<StateVec<N>, 5>& r, double theta) {
  const double theta1 = 1.0 - theta;
  StateVec<N> y;
  for (std::size_t i = 0; i < N; ++i) {
    y[i] = r[0][i] +
           theta * (r[1][i] + theta1 * (r[2][i] + theta * (r[3][i] + theta1 * r[4][i])));
  }
  return y;
}

template <std::size_t N>
double scaled_rms(const StateVec<N>& v, const StateVec<N>& y0, const StateVec<N>& y1,
                  const DopriSettings& s) {
  double acc = 0.0;
  for (std::size_t i = 0; i < N; ++i) {
    const double sc = s.abstol + s.reltol * std::max(std::abs(y0[i]), std::abs(y1[i]));
    acc += (v[i] / sc) * (v[i] / sc);
  }
  return std::sqrt(acc / static_cast<double>(N));
}

}  // namespace detail

/// Adaptive integration from (t0, y0) through the increasing `sample_times`
/// (all >= t0). `observer(t, y)` is invoked once per sample time, in order,
/// with the dense-output state; the final sample is the step end point
/// itself. Returns controller statistics.
template <std::size_t N, class Rhs, class Observer>
DopriStats dopri45_integrate(Rhs&& f, double t0, StateVec<N> y0,
                             std::span<const double> sample_times, const DopriSettings& s,
                             Observer&& observer) {
  DopriStats stats;
  if (sample_times.empty()) return stats;
  if (!(s.reltol > 0.0) || !(s.abstol > 0.0)) throw DomainError("tolerances must be positive");
  const double t_end = sample_times.back();
  if (sample_times.front() < t0) throw DomainError("sample times precede the initial time");

  auto rhs = [&](double t, const StateVec<N>& y) {
    ++stats.rhs_evaluations;
    return f(t, y);
  };

  std::size_t next = 0;
  while (next < sample_times.size() && sample_times[next] == t0) observer(t0, y0), ++next;
  if (next == sample_times.size()) return stats;

  double t = t0;
  StateVec<N> y = y0;
  StateVec<N> k1 = rhs(t, y);

  double h = s.initial_step;
  if (!(h > 0.0)) {
    // Starting step heuristic of Hairer, Norsett & Wanner.
    StateVec<N> zero{};
    const double d0 = detail::scaled_rms<N>(y, y, zero, s);
    const double d1 = detail::scaled_rms<N>(k1, y, zero, s);
    double h0 = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
    h0 = std::min(h0, t_end - t0);
    StateVec<N> y1;
    for (std::size_t i = 0; i < N; ++i) y1[i] = y[i] + h0 * k1[i];
    const StateVec<N> f1 = rhs(t + h0, y1);
    StateVec<N> df;
    for (std::size_t i = 0; i < N; ++i) df[i] = (f1[i] - k1[i]) / h0;
    const double d2 = detail::scaled_rms<N>(df, y, zero, s);
    const double dm = std::max(d1, d2);
    const double h1 = dm <= 1e-15 ? std::max(1e-6, h0 * 1e-3) : std::pow(0.01 / dm, 0.2);
    h = std::min(100.0 * h0, h1);
  }
  h = std::min(h, s.max_step);

  bool last_rejected = false;
  while (next < sample_times.size()) {
    if (stats.accepted + stats.rejected >= s.max_steps) throw StepSizeUnderflow<N>(t, y);
    if (h < 16.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(t))) {
      throw StepSizeUnderflow<N>(t, y);
    }
    bool hits_end = false;
    if (t + h >= t_end) {
      h = t_end - t;
      hits_end = true;
    }
    const double t_new = hits_end ? t_end : t + h;
    const bool want_dense = sample_times[next] < t_new;
    auto step = detail::dopri_step<N>(rhs, t, y, k1, h, want_dense);
    const double err = detail::scaled_rms<N>(step.err, y, step.y1, s);

    if (err <= 1.0) {
      ++stats.accepted;
      stats.max_error_estimate = std::max(stats.max_error_estimate, err);
      while (next < sample_times.size() && sample_times[next] < t_new) {
        const double theta = (sample_times[next] - t) / h;
        observer(sample_times[next], detail::dopri_dense<N>(step.dense, theta));
        ++next;
      }
      while (next < sample_times.size() && sample_times[next] == t_new) {
        observer(t_new, step.y1);
        ++next;
      }
      t = t_new;
      y = step.y1;
      k1 = step.k7;
      double fac = err == 0.0 ? 5.0 : 0.9 * std::pow(err, -0.2);
      fac = std::clamp(fac, 0.2, last_rejected ? 1.0 : 5.0);
      h = std::min(h * fac, s.max_step);
      last_rejected = false;
    } else {
      ++stats.rejected;
      const double fac = std::isfinite(err) ? std::clamp(0.9 * std::pow(err, -0.2), 0.2, 1.0) : 0.2;
      h *= fac;
      last_rejected = true;
    }
  }
  return stats;
}

/// Fixed-step variant (no error control) used for order verification.
/// Steps of size `h` (the last one shortened) from t0 to t_end.
template <std::size_t N, class Rhs>
StateVec<N> dopri45_fixed(Rhs&& f, double t0, StateVec<N> y0, double t_end, double h) {
  if (!(h > 0.0)) throw DomainError("fixed step must be positive");
  double t = t0;
  StateVec<N> k1 = f(t, y0);
  while (t < t_end) {
    const double step = std::min(h, t_end - t);
    auto out = detail::dopri_step<N>(f, t, y0, k1, step, false);
    y0 = out.y1;
    k1 = out.k7;
    t = (t_end - t <= h) ? t_end : t + step;
  }
  return y0;
}

}  // namespace homeostat
