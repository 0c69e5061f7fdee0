#pragma once

#include <string>
#include <vector>

#include "recur/cohort.hpp"
#include "recur/common.hpp"
#include "recur/kernel.hpp"
#include "recur/solver.hpp"

namespace recur {

// Covariate split for the joint event/visit model when visits may depend on
// current unobserved covariates: Z drives the event rate, W the visit rate,
// with no overlap (shared covariates are not identifiable in this setting).
struct DisjointPartition {
  std::vector<std::string> z_names;
  std::vector<std::string> w_names;
};

struct DisjointFit {
  std::vector<std::string> z_names, w_names;
  Vector beta_hat;   // event-model coefficients on Z
  Vector theta_hat;  // visit-model coefficients on W
  double beta_score_norm = 0.0;
  double theta_score_norm = 0.0;
  int iterations = 0;  // outer block-Newton sweeps
  bool converged = false;
  // nonempty when some |corr(Z_j, W_k)| > 0.95 across visit snapshots
  std::string collinearity_warning;
  int dropped_event_terms = 0;
  int dropped_visit_terms = 0;
};

// Solve the coupled pair of smoothed estimating equations
//   U_Z(β,θ) = n⁻¹ Σ_i ∫₀^τ {Z_i(t) − Ê_Z(t)} dN_i(t),  Ê_Z smoothed over
//              non-event visits with weights exp{βᵀZ(V) − θᵀW(V)},
//   U_W(β,θ) = the exchanged-role analogue over event visits with weights
//              exp{θᵀW(V) − βᵀZ(V)},
// by block Newton: alternate a damped β-step on U_Z and θ-step on U_W until
// the stacked score sup-norm is below tolerance.  β starts at the plain
// kernel fit of the event model, θ at the exchanged-role kernel fit.
DisjointFit fit_disjoint(const Cohort& cohort, const DisjointPartition& partition,
                         const KernelConfig& kernel, const SolverConfig& solver = {});

}  // namespace recur
