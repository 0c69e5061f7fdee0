#pragma once

#include <cstddef>

#include "recur/common.hpp"

namespace recur {

// Epanechnikov kernel K(x) = 0.75 (1 - x^2) on (-1, 1).
double kernel_weight(double x);

// Bandwidth: either a fixed h > 0 or the rule h = c * n^(-nu).
struct Bandwidth {
  static Bandwidth fixed(double h);
  static Bandwidth rule(double c, double nu);

  bool is_fixed = false;
  double h = 0.0;     // fixed form
  double c = 2.0;     // rule form
  double nu = 1.0 / 3.0;
};

// How to treat a query point whose kernel window contains no usable mass.
enum class ZeroDenominatorPolicy { error, drop_term };

struct KernelConfig {
  Bandwidth bandwidth = Bandwidth::rule(2.0, 1.0 / 3.0);
  ZeroDenominatorPolicy zero_denominator_policy = ZeroDenominatorPolicy::error;
};

// Resolve the bandwidth for a cohort of n subjects.  Throws ConfigError on an
// invalid configuration (h <= 0, c <= 0, or nu outside (1/4, 1/2), the range
// where the smoothed moments keep root-n behaviour of the downstream solver).
double resolve_bandwidth(const KernelConfig& config, std::size_t n);

}  // namespace recur
