#pragma once

#include <cstdint>
#include <initializer_list>
#include <limits>
#include <random>
#include <string_view>

#include <Eigen/Core>

namespace voi_twin {

// SplitMix64. Cheap to seed, so every (subsystem, agent, qi) tuple can own a
// fresh stream without disturbing the others.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed = 0) : state_(seed) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  double uniform(double lo = 0.0, double hi = 1.0) {
    // 53 random mantissa bits.
    const double u = static_cast<double>((*this)() >> 11) * 0x1.0p-53;
    return lo + (hi - lo) * u;
  }

  double normal(double mean = 0.0, double stddev = 1.0) {
    std::normal_distribution<double> dist(mean, stddev);
    return dist(*this);
  }

  Eigen::VectorXd standard_normal(Eigen::Index n) {
    Eigen::VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = normal();
    return v;
  }

 private:
  std::uint64_t state_;
};

// Stable 64-bit FNV-1a over a subsystem name, mixed with numeric keys.
std::uint64_t derive_seed(std::uint64_t master, std::string_view subsystem,
                          std::initializer_list<std::uint64_t> keys = {});

}  // namespace voi_twin
