#pragma once

// Small numerical building blocks shared by the solvers: compensated
// summation, sample grids, a bracketing root refiner and finite-difference
// time derivatives on (possibly non-uniform) samples.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <utility>
#include <vector>

#include "homeostat/errors.hpp"

namespace homeostat {

inline constexpr double kEps = std::numeric_limits<double>::epsilon();

/// Neumaier-compensated sum. Error is O(eps) independent of length.
inline double compensated_sum(std::span<const double> values) {
  double sum = 0.0;
  double carry = 0.0;
  for (double v : values) {
    const double t = sum + v;
    if (std::abs(sum) >= std::abs(v)) {
      carry += (sum - t) + v;
    } else {
      carry += (v - t) + sum;
    }
    sum = t;
  }
  return sum + carry;
}

/// n points from a to b inclusive.
inline std::vector<double> linspace(double a, double b, std::size_t n) {
  std::vector<double> out(n);
  if (n == 1) {
    out[0] = a;
    return out;
  }
  const double step = (b - a) / static_cast<double>(n - 1);
  for (std::size_t i = 0; i < n; ++i) out[i] = a + step * static_cast<double>(i);
  out[n - 1] = b;
  return out;
}

/// n log-spaced points from a to b inclusive (a, b > 0).
inline std::vector<double> logspace(double a, double b, std::size_t n) {
  if (!(a > 0.0) || !(b > 0.0)) throw DomainError("logspace: bounds must be positive");
  std::vector<double> out = linspace(std::log(a), std::log(b), n);
  for (auto& v : out) v = std::exp(v);
  out.front() = a;
  out.back() = b;
  return out;
}

struct RootResult {
  double x = 0.0;
  double fx = 0.0;
  int iterations = 0;
};

/// Brent-Dekker bracketing refiner. Requires f(a)*f(b) <= 0. Inverse
/// quadratic and secant steps are accepted only while they stay inside the
/// bracket and shrink it fast enough; bisection otherwise.
///
/// Iterates until the bracket is at the resolution of the floating-point
/// grid (plus `xtol` absolute), or an exact zero is hit.
template <class F>
RootResult brent_root(F&& f, double a, double b, double fa, double fb,
                      double xtol = 0.0, int max_iter = 500) {
  if (fa * fb > 0.0) throw DomainError("brent_root: interval does not bracket a root");
  if (fa == 0.0) return {a, fa, 0};
  if (fb == 0.0) return {b, fb, 0};

  double c = a, fc = fa;
  double d = b - a, e = d;
  int it = 0;
  for (; it < max_iter; ++it) {
    if ((fb > 0.0) == (fc > 0.0)) {
      c = a;
      fc = fa;
      d = e = b - a;
    }
    if (std::abs(fc) < std::abs(fb)) {
      a = b;
      b = c;
      c = a;
      fa = fb;
      fb = fc;
      fc = fa;
    }
    const double tol = 2.0 * kEps * std::abs(b) + 0.5 * xtol;
    const double m = 0.5 * (c - b);
    if (std::abs(m) <= tol || fb == 0.0) break;

    if (std::abs(e) >= tol && std::abs(fa) > std::abs(fb)) {
      double p, q, r;
      const double s = fb / fa;
      if (a == c) {
        p = 2.0 * m * s;
        q = 1.0 - s;
      } else {
        q = fa / fc;
        r = fb / fc;
        p = s * (2.0 * m * q * (q - r) - (b - a) * (r - 1.0));
        q = (q - 1.0) * (r - 1.0) * (s - 1.0);
      }
      if (p > 0.0) {
        q = -q;
      } else {
        p = -p;
      }
      if (2.0 * p < std::min(3.0 * m * q - std::abs(tol * q), std::abs(e * q))) {
        e = d;
        d = p / q;
      } else {
        d = m;
        e = m;
      }
    } else {
      d = m;
      e = m;
    }
    a = b;
    fa = fb;
    b += (std::abs(d) > tol) ? d : (m > 0.0 ? tol : -tol);
    fb = f(b);
  }
  // Report the better of the two bracket ends.
  if (std::abs(fc) < std::abs(fb)) return {c, fc, it};
  return {b, fb, it};
}

/// Second-order finite-difference derivative of samples y(t): three-point
/// centred stencil in the interior, three-point one-sided at both ends.
/// Works on non-uniform spacing.
inline std::vector<double> time_derivative(std::span<const double> t,
                                           std::span<const double> y) {
  const std::size_t n = t.size();
  if (y.size() != n) throw DomainError("time_derivative: size mismatch");
  std::vector<double> d(n, 0.0);
  if (n < 2) return d;
  if (n == 2) {
    d[0] = d[1] = (y[1] - y[0]) / (t[1] - t[0]);
    return d;
  }
  for (std::size_t i = 1; i + 1 < n; ++i) {
    const double h1 = t[i] - t[i - 1];
    const double h2 = t[i + 1] - t[i];
    d[i] = -h2 / (h1 * (h1 + h2)) * y[i - 1] + (h2 - h1) / (h1 * h2) * y[i] +
           h1 / (h2 * (h1 + h2)) * y[i + 1];
  }
  {
    const double h1 = t[1] - t[0];
    const double h2 = t[2] - t[1];
    d[0] = -(2.0 * h1 + h2) / (h1 * (h1 + h2)) * y[0] + (h1 + h2) / (h1 * h2) * y[1] -
           h1 / (h2 * (h1 + h2)) * y[2];
  }
  {
    const double h1 = t[n - 2] - t[n - 3];
    const double h2 = t[n - 1] - t[n - 2];
    d[n - 1] = h2 / (h1 * (h1 + h2)) * y[n - 3] - (h1 + h2) / (h1 * h2) * y[n - 2] +
               (2.0 * h2 + h1) / (h2 * (h1 + h2)) * y[n - 1];
  }
  return d;
}

/// Linear interpolation of (t, y) at `at`; t must be increasing. Clamps
/// outside the sampled range.
inline double interpolate_linear(std::span<const double> t, std::span<const double> y,
                                 double at) {
  if (t.empty()) throw DomainError("interpolate_linear: empty series");
  if (at <= t.front()) return y.front();
  if (at >= t.back()) return y.back();
  std::size_t lo = 0, hi = t.size() - 1;
  while (hi - lo > 1) {
    const std::size_t mid = (lo + hi) / 2;
    if (t[mid] <= at) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  const double w = (at - t[lo]) / (t[hi] - t[lo]);
  return y[lo] + w * (y[hi] - y[lo]);
}

inline double sup_norm(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

}  // namespace homeostat
