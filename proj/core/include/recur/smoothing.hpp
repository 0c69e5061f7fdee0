#pragma once

#include <vector>

#include "recur/cohort.hpp"
#include "recur/common.hpp"
#include "recur/history.hpp"
#include "recur/kernel.hpp"
#include "recur/solver.hpp"

namespace recur {

// Kernel-weighted moments around one query time:
//   s_k = n⁻¹ Σ_rows K_h(t − V) · exp{E_row − log_shift} · value_row^⊗k
// where E_row is the row's full weight exponent.  The shared shift (the
// window's max exponent) keeps the sums finite; ratios s1/s0, s2/s0 are
// shift-invariant, and value() undoes the shift where the absolute scale
// is needed.
struct SmoothedMoments {
  double s0 = 0.0;
  Vector s1;
  Matrix s2;
  double log_shift = 0.0;
  int window_count = 0;  // rows with positive kernel weight

  Vector mean() const;        // s1/s0
  Matrix covariance() const;  // s2/s0 − mean·meanᵀ
  double value() const;       // exp(log_shift)·s0, the unshifted moment
};

// Flat panel of visit rows used as smoothing mass.  `values` columns are what
// the moments are taken of; `exponents` columns enter the weight exponent
// linearly through the coefficients handed to PanelSmoother; `offset` is a
// fixed additive exponent term (e.g. −α̂ᵀX(V) for the inverse-rate weights).
struct SmoothingPanel {
  std::vector<double> times;  // ascending
  Matrix values;
  Matrix exponents;
  std::vector<double> offset;
  std::vector<int> subject;
  int n_subjects = 0;

  std::size_t size() const { return times.size(); }
};

// Evaluates windowed moments over a panel at a fixed bandwidth.  Callers set
// the exponent coefficients once per solver iterate, then query many times;
// queries are thread-safe and independent.
class PanelSmoother {
 public:
  PanelSmoother(SmoothingPanel panel, double h);

  void set_coefficients(const Vector& coefficients);
  // moments at t (no boundary clamp here; callers clamp to max(t, h)).
  // order: 0 = s0 only, 1 = +s1, 2 = +s2.
  SmoothedMoments moments(double t, int order = 2) const;

  double bandwidth() const { return h_; }
  const SmoothingPanel& panel() const { return panel_; }

 private:
  SmoothingPanel panel_;
  double h_;
  std::vector<double> exponent_;  // coefficients·exponents.row(v) + offset[v]
};

// Visits of one kind driving an estimating function: times ≤ τ with the
// covariates entering that score.
struct ScoreTerms {
  std::vector<double> times;  // ascending
  Matrix z;
  std::vector<int> subject;

  std::size_t size() const { return times.size(); }
};

// Resolve visit-covariate names to registry columns (empty names = all).
std::vector<int> resolve_visit_columns(const Cohort& cohort, const std::vector<std::string>& names);

// Panel over visits of `kind`; value and exponent columns are visit-registry
// indices.  When a feature map and alpha are given, offset = −αᵀX(V) with X
// evaluated strictly before V.  Missing covariate values in used columns are
// a DataError naming subject, time and column.
SmoothingPanel build_smoothing_panel(const Cohort& cohort, VisitKind kind,
                                     const std::vector<int>& value_columns,
                                     const std::vector<int>& exponent_columns,
                                     const HistoryFeatureMap* features = nullptr,
                                     const Vector* alpha = nullptr);

ScoreTerms build_score_terms(const Cohort& cohort, VisitKind kind,
                             const std::vector<int>& columns);

// Score of the form n⁻¹ Σ_terms {z_term − mean_block(max(t, h))} where the
// smoothed mean is taken over the value-column block starting at block_offset
// (the term covariates must align with that block).  Requires the panel's
// value and exponent columns to coincide, so the returned Jacobian is
// −Σ cov.block(block, all)/n = ∂u/∂coefficients.  Zero-mass windows follow
// `policy`: throw, or drop the term and count it.
ScoreFunctionEval smoothed_score_block(PanelSmoother& smoother, const ScoreTerms& terms,
                                       ZeroDenominatorPolicy policy, const Vector& coefficients,
                                       Eigen::Index block_offset = 0);

// Ŝ^(k)(t, β, α): moments of the visit-covariate vector over non-event
// visits with weights exp{βᵀZ(V) − αᵀX(V)}, evaluated exactly at t (s0 = 0 is
// a valid return; no boundary clamp).
SmoothedMoments smoothed_moments(const Cohort& cohort, const HistoryFeatureSpec& spec, double t,
                                 const Vector& beta, const Vector& alpha, double h);

// Ê(t, β, α) = s1/s0 at the clamped time max(t, h).  A window with no mass is
// an error (the drop_term policy only applies inside score assembly).
Vector weighted_covariate_mean(const Cohort& cohort, const HistoryFeatureSpec& spec, double t,
                               const Vector& beta, const Vector& alpha, double h,
                               const KernelConfig& config);

// X̄(u, α): risk-set mean of the history features at u, weights exp{αᵀX(u)}.
Vector visit_mean(const Cohort& cohort, const HistoryFeatureSpec& spec, double u,
                  const Vector& alpha);

}  // namespace recur
