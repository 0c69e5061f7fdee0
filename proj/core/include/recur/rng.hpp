#pragma once

#include <cstdint>
#include <random>

namespace recur {

// splitmix64 finalizer.  Used to derive statistically independent seeds from a
// user seed plus structural indices (replicate number, purpose tag), so that
// parallel work is reproducible regardless of thread count or schedule.
std::uint64_t mix64(std::uint64_t x);
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index, std::uint64_t tag = 0);

// Thin wrapper around mt19937_64 with the handful of draws the library needs.
// libstdc++ distributions are deterministic for a fixed seed, which the
// reproducibility guarantees rely on.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed) : engine_(seed) {}

  double uniform() { return unit_(engine_); }
  double uniform(double a, double b) { return a + (b - a) * unit_(engine_); }
  double exponential(double rate) {
    return std::exponential_distribution<double>(rate)(engine_);
  }
  double gamma(double shape, double scale) {
    return std::gamma_distribution<double>(shape, scale)(engine_);
  }
  bool bernoulli(double p) { return std::bernoulli_distribution(p)(engine_); }
  std::size_t uniform_index(std::size_t n) {
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(engine_);
  }

 private:
  std::mt19937_64 engine_;
  std::uniform_real_distribution<double> unit_{0.0, 1.0};
};

}  // namespace recur
