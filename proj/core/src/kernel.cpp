#include "recur/kernel.hpp"

#include <cmath>
#include <string>

namespace recur {

double kernel_weight(double x) {
  if (std::abs(x) >= 1.0) return 0.0;
  return 0.75 * (1.0 - x * x);
}

Bandwidth Bandwidth::fixed(double h) {
  Bandwidth b;
  b.is_fixed = true;
  b.h = h;
  return b;
}

Bandwidth Bandwidth::rule(double c, double nu) {
  Bandwidth b;
  b.is_fixed = false;
  b.c = c;
  b.nu = nu;
  return b;
}

double resolve_bandwidth(const KernelConfig& config, std::size_t n) {
  const Bandwidth& b = config.bandwidth;
  if (b.is_fixed) {
    if (!(b.h > 0.0) || !std::isfinite(b.h))
      throw ConfigError("bandwidth: fixed h must be positive, got " + std::to_string(b.h));
    return b.h;
  }
  if (!(b.c > 0.0) || !std::isfinite(b.c))
    throw ConfigError("bandwidth: scale c must be positive, got " + std::to_string(b.c));
  if (!(b.nu > 0.25) || !(b.nu < 0.5))
    throw ConfigError("bandwidth: exponent nu must lie in (1/4, 1/2), got " + std::to_string(b.nu));
  if (n == 0) throw ConfigError("bandwidth: cohort is empty");
  return b.c * std::pow(static_cast<double>(n), -b.nu);
}

}  // namespace recur
