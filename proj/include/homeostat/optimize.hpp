#pragma once

// Derivative-free Nelder-Mead simplex minimiser with dimension-adaptive
// coefficients (Gao & Han) and optional restarts from the best vertex.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <vector>

#include "homeostat/errors.hpp"

namespace homeostat {

struct NelderMeadSettings {
  std::size_t max_evaluations = 3000;  // per restart
  std::size_t restarts = 8;
  double xtol = 1e-15;
  double ftol = 1e-34;
  double initial_scale = 0.05;  // relative perturbation of nonzero coordinates
  double zero_step = 0.00025;   // absolute perturbation of zero coordinates
  double target = -std::numeric_limits<double>::infinity();  // stop once f <= target
};

struct NelderMeadResult {
  std::vector<double> x;
  double f = 0.0;
  std::size_t evaluations = 0;
  std::size_t restarts_used = 0;
};

namespace detail {

template <class F>
NelderMeadResult nelder_mead_once(F& f, std::vector<double> x0, const NelderMeadSettings& s,
                                  std::size_t& evals) {
  const std::size_t n = x0.size();
  const double dn = static_cast<double>(n);
  const double rho = 1.0;
  const double chi = 1.0 + 2.0 / dn;
  const double psi = 0.75 - 1.0 / (2.0 * dn);
  const double sigma = 1.0 - 1.0 / dn;

  std::vector<std::vector<double>> sim(n + 1, x0);
  for (std::size_t k = 0; k < n; ++k) {
    sim[k + 1][k] = x0[k] != 0.0 ? (1.0 + s.initial_scale) * x0[k] : s.zero_step;
  }
  std::vector<double> fs(n + 1);
  const std::size_t budget = evals + s.max_evaluations;
  auto eval = [&](const std::vector<double>& x) {
    ++evals;
    return f(x);
  };
  for (std::size_t k = 0; k <= n; ++k) fs[k] = eval(sim[k]);

  std::vector<std::size_t> order(n + 1);
  auto sort_simplex = [&] {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return fs[a] < fs[b]; });
    std::vector<std::vector<double>> s2(n + 1);
    std::vector<double> f2(n + 1);
    for (std::size_t k = 0; k <= n; ++k) {
      s2[k] = std::move(sim[order[k]]);
      f2[k] = fs[order[k]];
    }
    sim = std::move(s2);
    fs = std::move(f2);
  };
  sort_simplex();

  auto blend = [&](const std::vector<double>& c, double t) {
    std::vector<double> x(n);
    for (std::size_t i = 0; i < n; ++i) x[i] = c[i] + t * (sim[n][i] - c[i]);
    return x;
  };

  while (evals < budget && fs[0] > s.target) {
    double xspread = 0.0;
    for (std::size_t k = 1; k <= n; ++k) {
      for (std::size_t i = 0; i < n; ++i) xspread = std::max(xspread, std::abs(sim[k][i] - sim[0][i]));
    }
    if (xspread <= s.xtol && fs[n] - fs[0] <= s.ftol) break;

    std::vector<double> c(n, 0.0);
    for (std::size_t k = 0; k < n; ++k) {
      for (std::size_t i = 0; i < n; ++i) c[i] += sim[k][i];
    }
    for (double& v : c) v /= dn;

    const auto xr = blend(c, -rho);
    const double fr = eval(xr);
    bool shrink = false;
    if (fr < fs[0]) {
      const auto xe = blend(c, -rho * chi);
      const double fe = eval(xe);
      if (fe < fr) {
        sim[n] = xe;
        fs[n] = fe;
      } else {
        sim[n] = xr;
        fs[n] = fr;
      }
    } else if (fr < fs[n - 1]) {
      sim[n] = xr;
      fs[n] = fr;
    } else if (fr < fs[n]) {
      const auto xc = blend(c, -psi * rho);
      const double fc = eval(xc);
      if (fc <= fr) {
        sim[n] = xc;
        fs[n] = fc;
      } else {
        shrink = true;
      }
    } else {
      const auto xcc = blend(c, psi);
      const double fcc = eval(xcc);
      if (fcc < fs[n]) {
        sim[n] = xcc;
        fs[n] = fcc;
      } else {
        shrink = true;
      }
    }
    if (shrink) {
      for (std::size_t k = 1; k <= n; ++k) {
        for (std::size_t i = 0; i < n; ++i) sim[k][i] = sim[0][i] + sigma * (sim[k][i] - sim[0][i]);
        fs[k] = eval(sim[k]);
      }
    }
    sort_simplex();
  }
  return {sim[0], fs[0], 0, 0};
}

}  // namespace detail

/// Minimises f: R^n -> R from x0. Each restart rebuilds the simplex around
/// the best point so far; stops early once f <= target or a restart makes
/// no progress.
template <class F>
NelderMeadResult nelder_mead(F&& f, std::vector<double> x0, const NelderMeadSettings& s = {}) {
  if (x0.empty()) throw DomainError("nelder_mead: empty starting point");
  std::size_t evals = 0;
  NelderMeadResult best{x0, f(x0), 1, 0};
  evals = 1;
  for (std::size_t r = 0; r < std::max<std::size_t>(s.restarts, 1); ++r) {
    if (best.f <= s.target) break;
    auto res = detail::nelder_mead_once(f, best.x, s, evals);
    best.restarts_used = r + 1;
    const bool improved = res.f < best.f;
    if (improved) {
      best.x = std::move(res.x);
      best.f = res.f;
    }
    if (!improved) break;
  }
  best.evaluations = evals;
  return best;
}

}  // namespace homeostat
