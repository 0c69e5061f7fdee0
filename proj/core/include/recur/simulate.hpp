#pragma once

#include <cmath>
#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "recur/cohort.hpp"
#include "recur/common.hpp"
#include "recur/disjoint.hpp"
#include "recur/history.hpp"
#include "recur/kernel.hpp"
#include "recur/rate_model.hpp"
#include "recur/rng.hpp"
#include "recur/solver.hpp"

namespace recur {

// Data-generating process for one replicated experiment.
//
// Per subject: censoring C ~ U[0, censor_max] (or a fixed value); a uniform
// baseline covariate Z1 ~ U[−0.5, 0.5]; a 0/1 renewal process Z2 alternating
// with Exp(ξ) sojourns, ξ ~ Gamma(frailty_mean, frailty_variance),
// Z2(0) = 1 w.p. 0.5; a phase-shifted wave Z3(t) = sin(πt + w1); a latent
// wave L(t) = sin(πt + w2), both phases U[0, 2π].
//
// Events arrive with intensity t·exp{beta_B·Z1 + beta_T1·Z2(t) +
// beta_T2·Z3(t) + gamma1·L(t) − 1}; non-event visits with intensity
// lambda20·exp{alpha1·Z1 + alpha2·X2(t) + alpha3·X3(t) + alpha4·Z2(t) +
// alpha5·Z3(t) + gamma2·L(t) [+ theta_W·W(t)]}, where X_j(t) is the value of
// Z_j recorded at the latest visit of either kind before t (Z_j(0) before the
// first).  The optional W is a second independent renewal process for the
// joint event/visit fit.
struct ScenarioConfig {
  std::string name = "custom";
  double alpha1 = 0, alpha2 = 0, alpha3 = 0, alpha4 = 0, alpha5 = 0;
  double gamma1 = 0, gamma2 = 0;
  double beta_B = -1, beta_T1 = -1, beta_T2 = 1;
  int n = 200;
  int reps = 200;
  std::uint64_t seed = 20240801;
  KernelConfig kernel;
  double censor_max = 5.0;
  std::optional<double> censor_fixed;  // overrides the U[0, censor_max] draw
  double frailty_mean = 1.0;
  double frailty_variance = 0.2;
  std::optional<double> tau;
  bool with_w_process = false;
  double theta_W = 0.0;
  double lambda20 = 1.0;

  void validate() const;
};

// Everything needed to evaluate a subject's true covariate paths at any time.
struct SubjectTruth {
  double censor = 0.0;
  double z1 = 0.0;
  int z2_0 = 0;
  double xi = 1.0;
  std::vector<double> z2_jumps;  // renewal transition times in (0, C]
  double w1 = 0.0, w2 = 0.0;     // phases of Z3 and L
  int w_0 = 0;
  double xi_w = 1.0;
  std::vector<double> w_jumps;

  double z2(double t) const;      // right-continuous renewal state
  double z3(double t) const { return std::sin(kPi * t + w1); }
  double latent(double t) const { return std::sin(kPi * t + w2); }
  double w(double t) const;

  static constexpr double kPi = 3.141592653589793238462643383279502884;
};

// One recorded visit with the covariate state the generator consulted just
// before it (the values a correctly-specified observed-history feature map
// must reproduce).
struct DgpVisitState {
  double time = 0.0;
  VisitKind kind = VisitKind::nonevent;
  double x2 = 0.0;  // last recorded Z2, Z2(0) before the first visit
  double x3 = 0.0;
};

struct SimulatedCohort {
  Cohort cohort;
  std::vector<SubjectTruth> truth;                  // aligned with cohort subjects
  std::vector<std::vector<DgpVisitState>> dgp_x;    // per subject, per visit in time order
};

// Deterministic in (config, rep_index).  Baseline columns: Z1, Z2_0, Z3_0
// [, W_0]; visit columns: Z1, Z2, Z3 [, W] snapshot at every visit of either
// kind.
SimulatedCohort generate_cohort(const ScenarioConfig& config, int rep_index);

// Poisson process on [0, horizon] by thinning: proposals at rate `bound`,
// kept with probability intensity(t)/bound.  The bound must dominate the
// intensity (violations throw).
std::vector<double> thinning_sample(const std::function<double(double)>& intensity, double bound,
                                    double horizon, RandomStream& stream);

// Named presets: "I".."X", "GammaShift" (visit intensity exp{0.5·Z1 +
// 0.5·Z2(t) + 0.5·Z3(t)} for the attenuation-limit check), "Disjoint"
// (independent W with theta_W = −0.5, n = 400).
ScenarioConfig scenario_preset(const std::string& name);

// Observed-history features used when fitting simulated cohorts:
// Z1, last-recorded Z2 (Z2_0 before the first visit), last-recorded Z3.
HistoryFeatureSpec simulation_history_spec();

// Carry-forward imputation options matching the generator's pre-first-visit
// state.
LocfOptions simulation_locf_options();

// Rate-model fit against the true covariate paths (the infeasible benchmark).
// Covariate names resolve against the cohort's visit registry; subjects in a
// resampled cohort map back to their truth by the id prefix before '#'.
RateModelFit fit_full_oracle(const SimulatedCohort& simulated, const Cohort& cohort,
                             const SolverConfig& solver = {},
                             const std::vector<std::string>& z_names = {});

// Replicated experiment over one scenario.
struct MethodReplicates {
  std::string method;                        // proposed | ppl | locf | oracle | disjoint
  std::vector<std::string> coefficients;     // display names (beta_B, beta_T1, beta_T2[, theta_W])
  Vector truth;
  Matrix estimates;                          // reps × p, NaN on failure
  Matrix boot_se;                            // reps × p when bootstrapped, else 0×0
  Matrix covered;                            // reps × p of {0,1}, NaN on failure, else 0×0
  std::vector<std::string> failure_reasons;  // per rep; empty = success
  int failures = 0;
};

struct ScenarioRun {
  ScenarioConfig config;
  std::vector<MethodReplicates> methods;
};

// Fit each requested method on every generated replicate; with bootstrap_B > 0
// also bootstrap each fit for SEE and normal-interval coverage of the truth.
// Deterministic in (config, methods, bootstrap_B) at any thread count.
ScenarioRun run_scenario(const ScenarioConfig& config, const std::vector<std::string>& methods,
                         int bootstrap_B = 0, int threads = 1);

struct SummaryRow {
  std::string scenario;
  std::string method;
  std::string coefficient;
  double bias = 0.0;  // mean(estimate) − truth over successful reps
  double se = 0.0;    // sd of estimates (NaN when < 2 successes)
  double see = 0.0;   // mean bootstrap se (NaN without bootstrap)
  double cp = 0.0;    // normal-interval coverage of truth (NaN without bootstrap)
  int failures = 0;
};

std::vector<SummaryRow> summarize(const ScenarioRun& run);
void write_summary_csv(const std::vector<SummaryRow>& rows, std::ostream& out);

}  // namespace recur
