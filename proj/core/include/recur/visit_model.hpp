#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "recur/cohort.hpp"
#include "recur/common.hpp"
#include "recur/history.hpp"
#include "recur/kernel.hpp"
#include "recur/solver.hpp"

namespace recur {

// Fit of the multiplicative non-event visit-rate model
//   rate(t | X(t)) = λ₀(t) exp{αᵀX(t)}
// by partial-likelihood Newton-Raphson over start-stop episodes on which X is
// constant.  Score events are the non-event visit times ≤ τ; event visits
// enter only through the history features.
struct VisitModelFit {
  Vector alpha_hat;
  std::vector<std::string> feature_labels;
  double score_norm = 0.0;
  int iterations = 0;
  bool converged = false;
  double log_pseudo_likelihood = 0.0;

  // λ̂₀(t) sampled on an even grid over [0, τ] (filled when a kernel is given)
  std::vector<std::pair<double, double>> baseline_grid;

  // per non-event visit V (ascending, including V > τ): Σ_j I(C_j ≥ V)exp{α̂ᵀX_j(V)};
  // the raw risk denominators behind λ̂₀
  std::vector<std::pair<double, double>> risk_points;
};

// Solve U₁(α) = n⁻¹ Σ_i ∫₀^τ {X_i(u) − X̄(u,α)} dO_i(u) = 0.  Throws on a
// structurally unfittable model (no non-event visits in (0, τ], collinear
// features); returns converged=false diagnostics when Newton stalls.  When
// `baseline_kernel` is given the λ̂₀ grid is evaluated on grid_points points.
VisitModelFit fit_visit_model(const Cohort& cohort, const HistoryFeatureSpec& spec,
                              const SolverConfig& solver = {},
                              const std::optional<KernelConfig>& baseline_kernel = std::nullopt,
                              int grid_points = 101);

// λ̂₀(t): kernel-smoothed visit rate at the clamped time max(t, h),
//   Σ_visits K_h(max(t,h) − V) / Σ_j I(C_j ≥ V)exp{αᵀX_j(V)} ,
// 0 when the window holds no visits.
double baseline_visit_rate(const Cohort& cohort, const HistoryFeatureSpec& spec,
                           const Vector& alpha_hat, double h, double t);

// Same quantity evaluated from precomputed risk points (fast path).
double baseline_visit_rate(const std::vector<std::pair<double, double>>& risk_points, double h,
                           double t);

}  // namespace recur
