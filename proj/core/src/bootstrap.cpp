#include "recur/bootstrap.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "recur/parallel.hpp"
#include "recur/rng.hpp"

namespace recur {

namespace {

constexpr double kZ975 = 1.959963984540054;

// type-7 (linear interpolation) empirical quantile of a sorted sample
double quantile_sorted(const std::vector<double>& x, double q) {
  const std::size_t m = x.size();
  if (m == 1) return x[0];
  const double pos = q * static_cast<double>(m - 1);
  const auto lo = static_cast<std::size_t>(pos);
  if (lo + 1 >= m) return x[m - 1];
  const double frac = pos - static_cast<double>(lo);
  return x[lo] * (1.0 - frac) + x[lo + 1] * frac;
}

}  // namespace

BootstrapResult bootstrap(const Cohort& cohort, const CohortFitter& fitter, int B,
                          std::uint64_t seed, int threads) {
  if (B < 2) throw ConfigError("bootstrap: B must be at least 2");

  BootstrapResult result;
  result.original = fitter(cohort);  // pre: the fitter succeeds here; errors propagate
  const Eigen::Index p = result.original.size();
  const std::size_t n = cohort.size();

  const double nan = std::numeric_limits<double>::quiet_NaN();
  result.replicates = Matrix::Constant(B, p, nan);
  result.failure_reasons.assign(static_cast<std::size_t>(B), "");

  parallel_for(static_cast<std::size_t>(B), threads, [&](std::size_t r) {
    RandomStream stream(derive_seed(seed, r, 1));
    std::vector<std::size_t> indices(n);
    for (std::size_t i = 0; i < n; ++i) indices[i] = stream.uniform_index(n);
    try {
      Cohort resampled = cohort.resample(indices);
      Vector est = fitter(resampled);
      if (est.size() != p) throw FitError("replicate estimate has unexpected length");
      result.replicates.row(static_cast<Eigen::Index>(r)) = est.transpose();
    } catch (const Error& e) {
      result.failure_reasons[r] = e.what();
    }
  });

  for (const auto& reason : result.failure_reasons)
    if (!reason.empty()) ++result.n_failed;
  if (10 * result.n_failed > B)
    throw FitError("bootstrap: " + std::to_string(result.n_failed) + " of " + std::to_string(B) +
                   " replicates failed (more than 10%); first failure: " +
                   *std::find_if(result.failure_reasons.begin(), result.failure_reasons.end(),
                                 [](const std::string& s) { return !s.empty(); }));

  result.se = Vector::Zero(p);
  result.ci_normal = Matrix::Zero(p, 2);
  result.ci_percentile = Matrix::Zero(p, 2);
  for (Eigen::Index j = 0; j < p; ++j) {
    std::vector<double> draws;
    draws.reserve(static_cast<std::size_t>(B));
    for (int r = 0; r < B; ++r)
      if (result.failure_reasons[static_cast<std::size_t>(r)].empty())
        draws.push_back(result.replicates(r, j));
    if (draws.size() < 2) throw FitError("bootstrap: fewer than 2 successful replicates");

    const double m = static_cast<double>(draws.size());
    double mean = 0.0;
    for (double v : draws) mean += v;
    mean /= m;
    double ss = 0.0;
    for (double v : draws) ss += (v - mean) * (v - mean);
    result.se[j] = std::sqrt(ss / (m - 1.0));

    result.ci_normal(j, 0) = result.original[j] - kZ975 * result.se[j];
    result.ci_normal(j, 1) = result.original[j] + kZ975 * result.se[j];

    std::sort(draws.begin(), draws.end());
    result.ci_percentile(j, 0) = quantile_sorted(draws, 0.025);
    result.ci_percentile(j, 1) = quantile_sorted(draws, 0.975);
  }
  return result;
}

}  // namespace recur
