#pragma once

#include <functional>
#include <string>
#include <vector>

#include "recur/cohort.hpp"
#include "recur/common.hpp"

namespace recur {

// Nonparametric bootstrap with the subject as the sampling unit.
struct BootstrapResult {
  Vector original;                           // fit on the input cohort
  Matrix replicates;                         // B × p; failed rows are NaN
  std::vector<std::string> failure_reasons;  // size B; empty string = success
  Vector se;                                 // sd over successful replicate rows
  Matrix ci_normal;                          // p × 2: original ∓ z_{0.975}·se
  Matrix ci_percentile;                      // p × 2: empirical 2.5 / 97.5 percentiles
  int n_failed = 0;

  int n_replicates() const { return static_cast<int>(replicates.rows()); }
};

using CohortFitter = std::function<Vector(const Cohort&)>;

// Draw B resampled cohorts (subjects with replacement, resample indices a
// function of (seed, replicate) only) and refit each with `fitter` — the
// closure re-runs every estimation step, so two-step methods re-estimate
// their visit model per replicate.  Failed replicates are recorded with the
// error text and excluded from se / CI; more than 10% failures aborts.
// Results are bit-identical for a given (cohort, seed, B) at any thread
// count.  B must be at least 2 and the fitter must succeed on the original
// cohort.
BootstrapResult bootstrap(const Cohort& cohort, const CohortFitter& fitter, int B,
                          std::uint64_t seed, int threads = 1);

}  // namespace recur
