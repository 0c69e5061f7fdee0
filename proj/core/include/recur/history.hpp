#pragma once

#include <optional>
#include <string>
#include <vector>

#include "recur/cohort.hpp"
#include "recur/common.hpp"

namespace recur {

// Feature-construction rules mapping the observed history strictly before t
// to one coordinate of X(t).  "Last observed" means the most recent non-missing
// value of the named visit covariate at any visit (either kind) before t.
enum class HistoryRuleKind {
  baseline,                    // baseline column, constant in t
  any_prior_visit,             // 1 if any visit (either kind) occurred before t
  baseline_x_any_prior,        // baseline column x any-prior-visit indicator
  last_observed,               // last observed value; fill before first observation
  last_observed_x_any_prior,   // last observed value x indicator (0 before first visit)
  threshold_last_observed,     // 1 if (last observed value, or fill) >= cutpoint
};

struct HistoryRule {
  HistoryRuleKind kind = HistoryRuleKind::baseline;
  std::string name;                          // covariate referenced (unused for any_prior_visit)
  double fill = 0.0;                         // last_observed / threshold fallback value
  std::optional<std::string> fill_baseline;  // fill from a per-subject baseline column instead
  double cutpoint = 0.0;                     // threshold_last_observed only

  static HistoryRule Baseline(std::string name);
  static HistoryRule AnyPriorVisit();
  static HistoryRule InteractBaselineWithAnyPrior(std::string name);
  static HistoryRule LastObserved(std::string name, double fill);
  static HistoryRule LastObservedFillFromBaseline(std::string name, std::string baseline_name);
  static HistoryRule InteractLastObservedWithAnyPrior(std::string name);
  static HistoryRule ThresholdLastObserved(std::string name, double cutpoint, double fill);

  std::string label() const;  // display name for the resulting coefficient
};

struct HistoryFeatureSpec {
  std::vector<HistoryRule> rules;
  std::size_t dimension() const { return rules.size(); }
};

// HistoryFeatureSpec resolved against a cohort's registries.  Resolution
// validates that referenced names exist, fills are finite, and that columns
// referenced by fill-less rules have no missing values anywhere (a missing
// value is only tolerable where a fill says what to use instead).
class HistoryFeatureMap {
 public:
  HistoryFeatureMap(const Cohort& cohort, const HistoryFeatureSpec& spec);

  std::size_t dimension() const { return rules_.size(); }
  std::vector<std::string> labels() const;

  // X(t) for one subject; visits at time >= t are ignored (strict-prior).
  Vector features(const Subject& subject, double t) const;

 private:
  struct Resolved {
    HistoryRuleKind kind;
    int baseline_index = -1;       // baseline / baseline_x_any_prior / fill source
    int visit_index = -1;          // visit column for last-observed style rules
    double fill = 0.0;
    double cutpoint = 0.0;
    std::string label;
  };

  friend class HistoryWalker;
  std::vector<Resolved> rules_;
  std::vector<int> tracked_columns_;  // distinct visit columns any rule observes
};

// Incremental evaluator: feed visits in time order, read X between feeds.
// Equivalent to repeated HistoryFeatureMap::features calls but O(1) per visit,
// used to build per-subject step functions of X.
class HistoryWalker {
 public:
  HistoryWalker(const HistoryFeatureMap& map, const Subject& subject);
  void apply(const Visit& visit);   // absorb a visit into the history
  Vector features() const;          // X(t) for any t past all absorbed visits

 private:
  const HistoryFeatureMap* map_;
  const Subject* subject_;
  int visits_seen_ = 0;
  std::vector<double> last_value_;  // per tracked column
  std::vector<char> has_value_;
};

// Step-function representation of u -> X(u) on (0, censor_time].  Segment k
// covers (starts[k], starts[k+1]] (last segment ends at the censoring time).
struct FeaturePath {
  std::vector<double> starts;  // starts[0] = 0, then the distinct visit times
  std::vector<Vector> x;       // features on each segment
  double censor_time = 0.0;

  const Vector& at(double u) const;  // u in (0, censor_time]
};

FeaturePath build_feature_path(const HistoryFeatureMap& map, const Subject& subject);

// One-shot convenience form.
Vector history_features(const Cohort& cohort, const Subject& subject,
                        const HistoryFeatureSpec& spec, double t);

}  // namespace recur
