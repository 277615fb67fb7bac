#pragma once

// Hand-rolled generators for property tests. Every generator is seeded
// explicitly so failures reproduce.

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace gen {

class Source {
 public:
  explicit Source(std::uint64_t seed) : rng_(seed) {}

  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
  double log_uniform(double lo, double hi) {
    return std::exp(uniform(std::log(lo), std::log(hi)));
  }
  std::size_t index(std::size_t lo, std::size_t hi) {
    return std::uniform_int_distribution<std::size_t>(lo, hi)(rng_);
  }

  // Nonnegative density with random zeros and bumps.
  std::vector<double> density(std::size_t n) {
    std::vector<double> v(n);
    for (auto& x : v) x = uniform(0.0, 1.0) < 0.2 ? 0.0 : uniform(0.0, 5.0);
    return v;
  }

 private:
  std::mt19937_64 rng_;
};

}  // namespace gen
