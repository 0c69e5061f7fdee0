#include "recur/history.hpp"

#include <algorithm>
#include <cmath>

namespace recur {

HistoryRule HistoryRule::Baseline(std::string name) {
  HistoryRule r;
  r.kind = HistoryRuleKind::baseline;
  r.name = std::move(name);
  return r;
}

HistoryRule HistoryRule::AnyPriorVisit() {
  HistoryRule r;
  r.kind = HistoryRuleKind::any_prior_visit;
  return r;
}

HistoryRule HistoryRule::InteractBaselineWithAnyPrior(std::string name) {
  HistoryRule r;
  r.kind = HistoryRuleKind::baseline_x_any_prior;
  r.name = std::move(name);
  return r;
}

HistoryRule HistoryRule::LastObserved(std::string name, double fill) {
  HistoryRule r;
  r.kind = HistoryRuleKind::last_observed;
  r.name = std::move(name);
  r.fill = fill;
  return r;
}

HistoryRule HistoryRule::LastObservedFillFromBaseline(std::string name, std::string baseline_name) {
  HistoryRule r;
  r.kind = HistoryRuleKind::last_observed;
  r.name = std::move(name);
  r.fill_baseline = std::move(baseline_name);
  return r;
}

HistoryRule HistoryRule::InteractLastObservedWithAnyPrior(std::string name) {
  HistoryRule r;
  r.kind = HistoryRuleKind::last_observed_x_any_prior;
  r.name = std::move(name);
  return r;
}

HistoryRule HistoryRule::ThresholdLastObserved(std::string name, double cutpoint, double fill) {
  HistoryRule r;
  r.kind = HistoryRuleKind::threshold_last_observed;
  r.name = std::move(name);
  r.cutpoint = cutpoint;
  r.fill = fill;
  return r;
}

std::string HistoryRule::label() const {
  switch (kind) {
    case HistoryRuleKind::baseline:
      return name;
    case HistoryRuleKind::any_prior_visit:
      return "any_prior_visit";
    case HistoryRuleKind::baseline_x_any_prior:
      return name + ":any_prior_visit";
    case HistoryRuleKind::last_observed:
      return "last(" + name + ")";
    case HistoryRuleKind::last_observed_x_any_prior:
      return "last(" + name + "):any_prior_visit";
    case HistoryRuleKind::threshold_last_observed:
      return "last(" + name + ")>=" + std::to_string(cutpoint);
  }
  return name;
}

namespace {

bool needs_visit_column(HistoryRuleKind kind) {
  return kind == HistoryRuleKind::last_observed ||
         kind == HistoryRuleKind::last_observed_x_any_prior ||
         kind == HistoryRuleKind::threshold_last_observed;
}

bool has_fill(const HistoryRule& rule) {
  // last_observed and threshold_last_observed carry a fallback; the
  // interaction form relies on the indicator being 0 before the first visit
  // and therefore cannot tolerate missing values once visits exist.
  return rule.kind == HistoryRuleKind::last_observed ||
         rule.kind == HistoryRuleKind::threshold_last_observed;
}

}  // namespace

HistoryFeatureMap::HistoryFeatureMap(const Cohort& cohort, const HistoryFeatureSpec& spec) {
  rules_.reserve(spec.rules.size());
  for (const auto& rule : spec.rules) {
    Resolved res;
    res.kind = rule.kind;
    res.fill = rule.fill;
    res.cutpoint = rule.cutpoint;
    res.label = rule.label();

    if (rule.kind == HistoryRuleKind::baseline ||
        rule.kind == HistoryRuleKind::baseline_x_any_prior) {
      res.baseline_index = cohort.baseline_index(rule.name);
      if (res.baseline_index < 0)
        throw ConfigError("history rule references unknown baseline covariate '" + rule.name + "'");
    } else if (needs_visit_column(rule.kind)) {
      res.visit_index = cohort.visit_index(rule.name);
      if (res.visit_index < 0)
        throw ConfigError("history rule references unknown visit covariate '" + rule.name + "'");
      if (rule.fill_baseline) {
        res.baseline_index = cohort.baseline_index(*rule.fill_baseline);
        if (res.baseline_index < 0)
          throw ConfigError("history rule fill references unknown baseline covariate '" +
                            *rule.fill_baseline + "'");
      } else if (has_fill(rule) && !std::isfinite(rule.fill)) {
        throw ConfigError("history rule for '" + rule.name + "' has non-finite fill");
      }
    }

    if (res.visit_index >= 0 &&
        std::find(tracked_columns_.begin(), tracked_columns_.end(), res.visit_index) ==
            tracked_columns_.end())
      tracked_columns_.push_back(res.visit_index);

    // A column consumed by a fill-less rule must be observed at every visit.
    if (res.visit_index >= 0 && !has_fill(rule)) {
      for (const auto& s : cohort.subjects())
        for (const auto& v : s.visits)
          if (std::isnan(v.covariates[res.visit_index]))
            throw DataError("covariate '" + rule.name + "' is missing at t=" +
                            std::to_string(v.time) + " for subject '" + s.id +
                            "' but a history rule without a fill uses it");
    }

    rules_.push_back(std::move(res));
  }
}

std::vector<std::string> HistoryFeatureMap::labels() const {
  std::vector<std::string> out;
  out.reserve(rules_.size());
  for (const auto& r : rules_) out.push_back(r.label);
  return out;
}

HistoryWalker::HistoryWalker(const HistoryFeatureMap& map, const Subject& subject)
    : map_(&map),
      subject_(&subject),
      last_value_(map.tracked_columns_.size(), 0.0),
      has_value_(map.tracked_columns_.size(), 0) {}

void HistoryWalker::apply(const Visit& visit) {
  ++visits_seen_;
  for (std::size_t k = 0; k < map_->tracked_columns_.size(); ++k) {
    const double value = visit.covariates[map_->tracked_columns_[k]];
    if (!std::isnan(value)) {
      last_value_[k] = value;
      has_value_[k] = 1;
    }
  }
}

Vector HistoryWalker::features() const {
  const auto& rules = map_->rules_;
  Vector x(static_cast<Eigen::Index>(rules.size()));
  const double indicator = visits_seen_ > 0 ? 1.0 : 0.0;
  for (std::size_t j = 0; j < rules.size(); ++j) {
    const auto& r = rules[j];
    double value = 0.0;
    switch (r.kind) {
      case HistoryRuleKind::baseline:
        value = subject_->baseline[r.baseline_index];
        break;
      case HistoryRuleKind::any_prior_visit:
        value = indicator;
        break;
      case HistoryRuleKind::baseline_x_any_prior:
        value = subject_->baseline[r.baseline_index] * indicator;
        break;
      case HistoryRuleKind::last_observed:
      case HistoryRuleKind::threshold_last_observed: {
        const auto slot = std::find(map_->tracked_columns_.begin(), map_->tracked_columns_.end(),
                                    r.visit_index) -
                          map_->tracked_columns_.begin();
        double last;
        if (has_value_[slot])
          last = last_value_[slot];
        else if (r.baseline_index >= 0)
          last = subject_->baseline[r.baseline_index];
        else
          last = r.fill;
        value = r.kind == HistoryRuleKind::last_observed
                    ? last
                    : (last >= r.cutpoint ? 1.0 : 0.0);
        break;
      }
      case HistoryRuleKind::last_observed_x_any_prior: {
        const auto slot = std::find(map_->tracked_columns_.begin(), map_->tracked_columns_.end(),
                                    r.visit_index) -
                          map_->tracked_columns_.begin();
        value = has_value_[slot] ? last_value_[slot] * indicator : 0.0;
        break;
      }
    }
    x[static_cast<Eigen::Index>(j)] = value;
  }
  return x;
}

Vector HistoryFeatureMap::features(const Subject& subject, double t) const {
  HistoryWalker walker(*this, subject);
  for (const auto& v : subject.visits) {
    if (!(v.time < t)) break;
    walker.apply(v);
  }
  return walker.features();
}

const Vector& FeaturePath::at(double u) const {
  // segment k covers (starts[k], starts[k+1]]; a query exactly at a visit time
  // must see the pre-visit features (strict-prior convention)
  auto it = std::lower_bound(starts.begin(), starts.end(), u);
  std::size_t k = static_cast<std::size_t>(it - starts.begin());
  if (k == 0) k = 1;  // u <= 0 is outside the domain; clamp defensively
  return x[k - 1];
}

FeaturePath build_feature_path(const HistoryFeatureMap& map, const Subject& subject) {
  FeaturePath path;
  path.censor_time = subject.censor_time;
  path.starts.push_back(0.0);
  HistoryWalker walker(map, subject);
  Vector current = walker.features();
  std::size_t i = 0;
  const auto& visits = subject.visits;
  while (i < visits.size()) {
    const double t = visits[i].time;
    while (i < visits.size() && visits[i].time == t) walker.apply(visits[i++]);
    path.x.push_back(std::move(current));
    path.starts.push_back(t);
    current = walker.features();
  }
  path.x.push_back(std::move(current));
  return path;
}

Vector history_features(const Cohort& cohort, const Subject& subject,
                        const HistoryFeatureSpec& spec, double t) {
  HistoryFeatureMap map(cohort, spec);
  return map.features(subject, t);
}

}  // namespace recur
