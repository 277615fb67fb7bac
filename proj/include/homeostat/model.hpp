#pragma once

// Model parameters of the damage-structured stem/TD lineage: Hill feedback
// maps, the TD death profile, transport speeds and inheritance fractions.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "homeostat/errors.hpp"

namespace homeostat {

/// Decreasing Hill feedback `baseline / (1 + (gain*load)^exponent)`.
struct HillMap {
  double baseline = 0.0;
  double gain = 0.0;
  double exponent = 1.0;

  /// x^exponent with exact shortcuts for the common integer exponents.
  double power(double x) const {
    if (exponent == 2.0) return x * x;
    if (exponent == 1.0) return x;
    return std::pow(x, exponent);
  }

  double operator()(double load) const {
    if (!(load >= 0.0)) throw DomainError("HillMap: load must be nonnegative");
    return baseline / (1.0 + power(gain * load));
  }

  /// Analytic d/dload. At load 0 this is -baseline*gain when exponent == 1
  /// and 0 for exponent > 1.
  double derivative(double load) const {
    if (!(load >= 0.0)) throw DomainError("HillMap: load must be nonnegative");
    const double kx = gain * load;
    const double denom = 1.0 + power(kx);
    const double slope = exponent == 2.0 ? kx : std::pow(kx, exponent - 1.0);
    return -baseline * exponent * gain * slope / (denom * denom);
  }

  HillMap scaled_gain(double factor) const { return {baseline, gain * factor, exponent}; }

  friend bool operator==(const HillMap&, const HillMap&) = default;
};

inline double eval_hill(const HillMap& map, double load) { return map(load); }
inline double eval_hill_derivative(const HillMap& map, double load) {
  return map.derivative(load);
}

/// TD death rate as a function of damage.
class DeathProfile {
 public:
  struct Uniform {
    double rate = 0.0;
    friend bool operator==(const Uniform&, const Uniform&) = default;
  };
  /// Piecewise-linear table, constant beyond the first/last node.
  struct Tabulated {
    std::vector<double> x;
    std::vector<double> rate;
    friend bool operator==(const Tabulated&, const Tabulated&) = default;
  };

  DeathProfile() = default;
  static DeathProfile uniform(double rate) { return DeathProfile(Uniform{rate}); }
  static DeathProfile tabulated(std::vector<double> x, std::vector<double> rate) {
    if (x.size() != rate.size() || x.empty()) {
      throw ValidationError("delta", "tabulated profile needs matching, nonempty x/rate");
    }
    if (!std::is_sorted(x.begin(), x.end()) ||
        std::adjacent_find(x.begin(), x.end()) != x.end()) {
      throw ValidationError("delta", "tabulated profile nodes must be strictly increasing");
    }
    return DeathProfile(Tabulated{std::move(x), std::move(rate)});
  }
  /// delta(x) = rate * (1 + x/xmax), tabulated on [0, xmax].
  static DeathProfile linear_ramp(double rate, double xmax) {
    return tabulated({0.0, xmax}, {rate, 2.0 * rate});
  }

  bool is_uniform() const { return std::holds_alternative<Uniform>(repr_); }

  /// Constant rate; throws when the profile depends on damage.
  double uniform_rate() const {
    if (const auto* u = std::get_if<Uniform>(&repr_)) return u->rate;
    throw UnsupportedConfiguration(
        "operation requires a uniform TD death rate; profile is damage-dependent");
  }

  double operator()(double x) const {
    if (const auto* u = std::get_if<Uniform>(&repr_)) return u->rate;
    const auto& tab = std::get<Tabulated>(repr_);
    if (x <= tab.x.front()) return tab.rate.front();
    if (x >= tab.x.back()) return tab.rate.back();
    const auto it = std::upper_bound(tab.x.begin(), tab.x.end(), x);
    const auto hi = static_cast<std::size_t>(it - tab.x.begin());
    const auto lo = hi - 1;
    const double w = (x - tab.x[lo]) / (tab.x[hi] - tab.x[lo]);
    return tab.rate[lo] + w * (tab.rate[hi] - tab.rate[lo]);
  }

  const std::variant<Uniform, Tabulated>& representation() const { return repr_; }

  friend bool operator==(const DeathProfile&, const DeathProfile&) = default;

 private:
  explicit DeathProfile(std::variant<Uniform, Tabulated> r) : repr_(std::move(r)) {}
  std::variant<Uniform, Tabulated> repr_{Uniform{}};
};

/// Daughter damage fractions for one division type; the two sum to 1.
struct InheritancePair {
  double first = 0.5;
  double second = 0.5;
  friend bool operator==(const InheritancePair&, const InheritancePair&) = default;
};

struct ModelParams {
  HillMap p1;        // symmetric self-renewal probability, load W
  HillMap p2;        // symmetric differentiation probability, load W
  HillMap lambda_p;  // stem division rate, load W
  HillMap lambda_r;  // dedifferentiation rate, load P
  DeathProfile delta = DeathProfile::uniform(0.0);
  double v_p = 1.0;
  double v_w = 1.0;
  InheritancePair alpha;  // stem + stem
  InheritancePair beta;   // TD + TD
  InheritancePair gamma;  // stem (first) + TD (second)

  /// Asymmetric-division probability 1 - p1 - p2.
  double p3(double w) const { return 1.0 - p1(w) - p2(w); }

  friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

/// Reference parameter set used by every verification run.
inline ModelParams reference_params() {
  ModelParams m;
  m.p1 = {0.20, 0.5, 2.0};
  m.p2 = {0.40, 0.5, 2.0};
  m.lambda_p = {1.0, 0.5, 2.0};
  m.lambda_r = {0.3, 0.5, 2.0};
  m.delta = DeathProfile::uniform(0.5);
  m.v_p = m.v_w = 1.0;
  m.alpha = m.beta = m.gamma = {0.5, 0.5};
  return m;
}

/// Intestinal-crypt parameter vector, six significant digits.
inline ModelParams crypt_params() {
  ModelParams m = reference_params();
  m.p1 = {0.076603, 0.004260, 2.0};
  m.p2 = {0.222652, 0.004260, 2.0};
  m.lambda_p = {5.884502, 0.001549, 2.0};
  m.lambda_r = {0.039233, 0.089821, 2.0};
  m.delta = DeathProfile::uniform(0.25);
  return m;
}

/// All four Hill gains multiplied by `factor`.
inline ModelParams with_scaled_gains(ModelParams m, double factor) {
  m.p1 = m.p1.scaled_gain(factor);
  m.p2 = m.p2.scaled_gain(factor);
  m.lambda_p = m.lambda_p.scaled_gain(factor);
  m.lambda_r = m.lambda_r.scaled_gain(factor);
  return m;
}

struct OpenLoopSummary {
  double p1hat = 0.0;
  double p2hat = 0.0;
  double lambda_p_hat = 0.0;
  double lambda_r_hat = 0.0;
  double delta_p = 0.0;  // p1hat - p2hat
  /// -lambda_r_hat / delta; empty for non-uniform or zero death rate.
  std::optional<double> delta_p_crit;
};

namespace detail {

inline constexpr double kSumTolerance = 1e-12;

inline void check_hill(const HillMap& h, const std::string& name, bool probability) {
  if (!std::isfinite(h.baseline) || h.baseline < 0.0) {
    throw ValidationError(name + ".baseline", "must be finite and nonnegative");
  }
  if (probability && h.baseline > 1.0) {
    throw ValidationError(name + ".baseline", "probability must not exceed 1");
  }
  if (!std::isfinite(h.gain) || h.gain < 0.0) {
    throw ValidationError(name + ".gain", "must be finite and nonnegative");
  }
  if (!std::isfinite(h.exponent) || h.exponent < 1.0) {
    throw ValidationError(name + ".exponent", "must be >= 1");
  }
}

inline void check_pair(const InheritancePair& pair, const std::string& name) {
  if (!(pair.first > 0.0 && pair.first < 1.0)) {
    throw ValidationError(name + "1", "inheritance fraction must lie in (0,1)");
  }
  if (!(pair.second > 0.0 && pair.second < 1.0)) {
    throw ValidationError(name + "2", "inheritance fraction must lie in (0,1)");
  }
  if (std::abs(pair.first + pair.second - 1.0) > kSumTolerance) {
    throw ValidationError(name, "fractions must sum to 1");
  }
}

}  // namespace detail

/// Checks every parameter invariant; throws ValidationError naming the first
/// violated field. Pure.
inline OpenLoopSummary validate_params(const ModelParams& m) {
  detail::check_hill(m.p1, "p1", true);
  detail::check_hill(m.p2, "p2", true);
  detail::check_hill(m.lambda_p, "lambda_p", false);
  detail::check_hill(m.lambda_r, "lambda_r", false);
  // Both maps are nonincreasing, so the baseline sum bounds p1(w) + p2(w).
  if (m.p1.baseline + m.p2.baseline > 1.0 + detail::kSumTolerance) {
    throw ValidationError("p1+p2", "baseline probabilities sum above 1");
  }
  if (!(std::isfinite(m.v_p) && m.v_p > 0.0)) throw ValidationError("v_p", "must be positive");
  if (!(std::isfinite(m.v_w) && m.v_w > 0.0)) throw ValidationError("v_w", "must be positive");
  detail::check_pair(m.alpha, "alpha");
  detail::check_pair(m.beta, "beta");
  detail::check_pair(m.gamma, "gamma");

  std::optional<double> crit;
  if (const auto* u = std::get_if<DeathProfile::Uniform>(&m.delta.representation())) {
    if (!std::isfinite(u->rate) || u->rate < 0.0) {
      throw ValidationError("delta", "rate must be finite and nonnegative");
    }
    if (u->rate > 0.0) crit = -m.lambda_r.baseline / u->rate;
  } else {
    const auto& tab = std::get<DeathProfile::Tabulated>(m.delta.representation());
    for (double r : tab.rate) {
      if (!std::isfinite(r) || r < 0.0) {
        throw ValidationError("delta", "tabulated rates must be finite and nonnegative");
      }
    }
  }

  return {m.p1.baseline,
          m.p2.baseline,
          m.lambda_p.baseline,
          m.lambda_r.baseline,
          m.p1.baseline - m.p2.baseline,
          crit};
}

/// Result of sampling the compensatory-feedback conditions
/// Delta(w) = p2(w) - p1(w) > 0 and Delta'(w) < 0.
struct CompensatoryReport {
  double window_lo = 0.0;
  double window_hi = 0.0;
  std::size_t samples = 0;
  bool gap_positive = false;
  bool gap_decreasing = false;
  double min_gap = 0.0;
  double max_gap_slope = 0.0;

  bool holds() const { return gap_positive && gap_decreasing; }
};

/// Samples (0, hi] where hi defaults to 50 * max(1/k1, 1/k2).
inline CompensatoryReport check_compensatory(const ModelParams& m, std::size_t samples = 1000,
                                             std::optional<double> window_hi = std::nullopt) {
  CompensatoryReport rep;
  double hi = 0.0;
  if (window_hi) {
    hi = *window_hi;
  } else {
    for (double k : {m.p1.gain, m.p2.gain}) {
      if (k > 0.0) hi = std::max(hi, 50.0 / k);
    }
    if (hi == 0.0) hi = 50.0;
  }
  rep.window_hi = hi;
  rep.samples = samples;
  rep.min_gap = std::numeric_limits<double>::infinity();
  rep.max_gap_slope = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 1; i <= samples; ++i) {
    const double w = hi * static_cast<double>(i) / static_cast<double>(samples);
    rep.min_gap = std::min(rep.min_gap, m.p2(w) - m.p1(w));
    rep.max_gap_slope = std::max(rep.max_gap_slope, m.p2.derivative(w) - m.p1.derivative(w));
  }
  rep.gap_positive = rep.min_gap > 0.0;
  rep.gap_decreasing = rep.max_gap_slope < 0.0;
  return rep;
}

}  // namespace homeostat
