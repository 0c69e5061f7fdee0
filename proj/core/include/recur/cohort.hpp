#pragma once

#include <optional>
#include <string>
#include <vector>

#include "recur/common.hpp"

namespace recur {

enum class VisitKind { event, nonevent };

const char* to_string(VisitKind kind);

// One clinical contact.  `covariates` is aligned with the cohort-level
// visit-covariate registry; NaN entries mean "not measured at this visit".
struct Visit {
  double time = 0.0;
  VisitKind kind = VisitKind::nonevent;
  Vector covariates;
};

struct Subject {
  std::string id;
  double censor_time = 0.0;
  Vector baseline;             // aligned with the baseline-covariate registry
  std::vector<Visit> visits;   // sorted by (time, kind); events before non-events on ties
};

// Observed-data view at time t for one subject: everything strictly before t.
struct CountingState {
  int events_before = 0;
  int nonevents_before = 0;
  std::optional<double> last_visit_time;  // latest visit time < t, either kind
  Vector last_observed;                   // covariates at that visit (empty if none)
};

// Immutable-after-construction panel of subjects plus the two covariate
// registries.  Construction sorts visits, validates the invariants below and
// throws DataError on violation:
//   - censor_time finite and > 0; baseline values finite
//   - visit times finite, in (0, censor_time]
//   - covariate vectors sized to their registries
//   - per subject, at most one visit of each kind at a given time
//   - subject ids unique and non-empty
// tau defaults to the largest censoring time and is clamped to it from above;
// estimating functions never look past min(tau, C_i), so the clamp is benign.
class Cohort {
 public:
  Cohort(std::vector<Subject> subjects,
         std::vector<std::string> baseline_covariates,
         std::vector<std::string> visit_covariates,
         std::optional<double> tau = std::nullopt);

  const std::vector<Subject>& subjects() const { return subjects_; }
  std::size_t size() const { return subjects_.size(); }
  const Subject& subject(std::size_t i) const { return subjects_[i]; }

  const std::vector<std::string>& baseline_covariates() const { return baseline_names_; }
  const std::vector<std::string>& visit_covariates() const { return visit_names_; }

  double tau() const { return tau_; }
  double max_censor_time() const { return max_censor_; }

  // Registry lookups; -1 when the name is absent.
  int baseline_index(const std::string& name) const;
  int visit_index(const std::string& name) const;

  std::size_t total_visits() const;
  std::size_t count_visits(VisitKind kind, double up_to) const;

  // New cohort made of subjects_[indices], in order (bootstrap resampling).
  // Duplicated subjects get distinct ids ("<id>#k") to keep ids unique.
  Cohort resample(const std::vector<std::size_t>& indices) const;

 private:
  std::vector<Subject> subjects_;
  std::vector<std::string> baseline_names_;
  std::vector<std::string> visit_names_;
  double tau_ = 0.0;
  double max_censor_ = 0.0;
};

// State of a subject's observed history at time t (strictly-prior convention:
// a visit exactly at t is not included).
CountingState counting_state(const Subject& subject, double t);

}  // namespace recur
