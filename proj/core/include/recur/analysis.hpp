#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "recur/cohort.hpp"
#include "recur/common.hpp"
#include "recur/disjoint.hpp"
#include "recur/history.hpp"
#include "recur/kernel.hpp"
#include "recur/rate_model.hpp"
#include "recur/solver.hpp"

namespace recur {

// One estimation request against a loaded cohort: which covariates enter the
// event model, how observed history maps to visit-model features, kernel and
// solver settings, and optionally a bootstrap.
struct AnalysisConfig {
  std::vector<std::string> event_covariates;  // empty = every visit covariate
  HistoryFeatureSpec history;
  KernelConfig kernel;
  std::optional<double> tau;
  std::string method = "proposed";            // proposed | ppl | locf | disjoint
  std::optional<DisjointPartition> disjoint;
  LocfOptions locf;
  int bootstrap_B = 0;
  std::uint64_t seed = 1;
  SolverConfig solver;

  void validate() const;
};

// JSON round trip.  Unknown keys are rejected so typos fail loudly.
AnalysisConfig parse_analysis_config(const nlohmann::json& j);
nlohmann::ordered_json analysis_config_json(const AnalysisConfig& config);

// Fit (and bootstrap when bootstrap_B > 0) per the config and assemble the
// result document: tool info, the echoed config, coefficient table with
// intervals, solver diagnostics, visit-model summary and baseline curves.
// Deterministic for a given (cohort, config) at any thread count.
nlohmann::ordered_json run_analysis(const Cohort& cohort, const AnalysisConfig& config,
                                    int threads = 1, bool include_replicates = false);

}  // namespace recur
