#pragma once

#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "recur/cohort.hpp"
#include "recur/common.hpp"
#include "recur/history.hpp"
#include "recur/kernel.hpp"
#include "recur/solver.hpp"
#include "recur/visit_model.hpp"

namespace recur {

enum class RateMethod { proposed, ppl, locf, full_oracle };

const char* to_string(RateMethod method);

// Fit of the proportional rate model  μ{t | Z(t)} = μ₀(t) exp{βᵀZ(t)}.
// Z is the visit-covariate registry (or the subset named at fit time);
// baseline_cumulative holds the Breslow-type cumulative baseline rate, a
// nondecreasing step curve starting at (0, 0):
//   proposed      Σ_{events T ≤ t} λ̂₀(T*) / {n·Ŝ⁰(T*, β̂, α̂)},  T* = max(T, h)
//   ppl           same with α̂ = 0 weights (meaningful when visits are
//                 noninformative, which is when PPL itself is valid)
//   locf/oracle   Σ_{events T ≤ t} 1 / {n·S⁰(T, β̂)} over their covariate paths
struct RateModelFit {
  RateMethod method = RateMethod::proposed;
  std::vector<std::string> coefficient_names;
  Vector beta_hat;
  double score_norm = 0.0;
  int iterations = 0;
  bool converged = false;
  int dropped_event_terms = 0;  // stays 0 under the error policy
  std::vector<std::pair<double, double>> baseline_cumulative;
  std::optional<VisitModelFit> visit_fit;  // proposed only
};

// Two-step estimator: (1) fit the visit model on `spec`, (2) solve
//   U₂(β) = n⁻¹ Σ_i ∫₀^τ {Z_i(t) − Ê(t, β, α̂)} dN_i(t) = 0
// with Ê the inverse-rate-weighted smoothed mean clamped at max(t, h).
// Throws FitError on: no events in (0, τ], unconverged visit model, zero
// smoothed denominator under the error policy, singular Jacobian (after a
// finite-difference retry), or Newton non-convergence.  solver.initial,
// if set, applies to β (the visit-model step always starts at 0).
RateModelFit fit_proposed(const Cohort& cohort, const HistoryFeatureSpec& spec,
                          const KernelConfig& kernel, const SolverConfig& solver = {},
                          const std::vector<std::string>& z_names = {});

// Unweighted kernel estimator: identical to fit_proposed with an empty
// history spec (α ≡ 0), consistent when visits are noninformative.
RateModelFit fit_ppl(const Cohort& cohort, const KernelConfig& kernel,
                     const SolverConfig& solver = {},
                     const std::vector<std::string>& z_names = {});

struct LocfOptions {
  // Impute each listed visit column before its first observation from a
  // baseline column (visit name -> baseline name) instead of the default
  // backward fill from the first observation.
  std::vector<std::pair<std::string, std::string>> time0_from_baseline;
};

// Last-observation-carried-forward comparator: step-function imputation of
// Z(t) from the observed snapshots (carry-forward, backward fill before the
// first observation), then the full-data estimating equation.  The imputed
// path is evaluated at t−, so a value measured at time t takes effect only
// after t.
RateModelFit fit_locf(const Cohort& cohort, const SolverConfig& solver = {},
                      const std::vector<std::string>& z_names = {},
                      const LocfOptions& options = {});

// Z(t) for subject `index` — a complete covariate path, evaluable anywhere.
using CovariatePath = std::function<Vector(std::size_t index, double t)>;

// Full-data pseudo-partial score solver (risk-set means over exact paths);
// the engine behind fit_locf and the simulation oracle.
RateModelFit fit_with_covariate_paths(const Cohort& cohort, const CovariatePath& path,
                                      const std::vector<std::string>& coefficient_names,
                                      const SolverConfig& solver = {},
                                      RateMethod label = RateMethod::full_oracle);

// M̂₀(t) recomputed from a proposed fit at an arbitrary t ∈ [0, τ].
double baseline_cumulative_proposed(const Cohort& cohort, const HistoryFeatureSpec& spec,
                                    const RateModelFit& fit, const KernelConfig& kernel, double t);

// Step lookup into fit.baseline_cumulative.
double baseline_cumulative_at(const RateModelFit& fit, double t);

}  // namespace recur
