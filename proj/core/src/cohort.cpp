#include "recur/cohort.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

namespace recur {

const char* to_string(VisitKind kind) {
  return kind == VisitKind::event ? "event" : "nonevent";
}

namespace {

bool visit_order(const Visit& a, const Visit& b) {
  if (a.time != b.time) return a.time < b.time;
  // events first on shared timestamps purely for deterministic layout
  return static_cast<int>(a.kind) < static_cast<int>(b.kind);
}

}  // namespace

Cohort::Cohort(std::vector<Subject> subjects,
               std::vector<std::string> baseline_covariates,
               std::vector<std::string> visit_covariates,
               std::optional<double> tau)
    : subjects_(std::move(subjects)),
      baseline_names_(std::move(baseline_covariates)),
      visit_names_(std::move(visit_covariates)) {
  if (subjects_.empty()) throw DataError("cohort: no subjects");

  // names are unique within each registry; a baseline and a visit covariate
  // may share a name (e.g. a fixed covariate carried as both)
  {
    std::unordered_set<std::string> names;
    for (const auto& n : baseline_names_)
      if (!names.insert(n).second) throw DataError("cohort: duplicate baseline covariate '" + n + "'");
    names.clear();
    for (const auto& n : visit_names_)
      if (!names.insert(n).second) throw DataError("cohort: duplicate visit covariate '" + n + "'");
  }

  std::unordered_set<std::string> ids;
  max_censor_ = 0.0;
  for (auto& s : subjects_) {
    if (s.id.empty()) throw DataError("cohort: empty subject id");
    if (!ids.insert(s.id).second) throw DataError("cohort: duplicate subject id '" + s.id + "'");
    if (!std::isfinite(s.censor_time) || s.censor_time <= 0.0)
      throw DataError("cohort: subject '" + s.id + "' has non-positive censoring time");
    if (static_cast<std::size_t>(s.baseline.size()) != baseline_names_.size())
      throw DataError("cohort: subject '" + s.id + "' has " + std::to_string(s.baseline.size()) +
                      " baseline values, registry has " + std::to_string(baseline_names_.size()));
    for (Eigen::Index j = 0; j < s.baseline.size(); ++j)
      if (!std::isfinite(s.baseline[j]))
        throw DataError("cohort: subject '" + s.id + "' baseline '" + baseline_names_[j] +
                        "' is not finite");

    std::sort(s.visits.begin(), s.visits.end(), visit_order);
    const Visit* prev = nullptr;
    for (const auto& v : s.visits) {
      if (!std::isfinite(v.time) || v.time <= 0.0)
        throw DataError("cohort: subject '" + s.id + "' visit time must be positive and finite");
      if (v.time > s.censor_time)
        throw DataError("cohort: subject '" + s.id + "' visit at t=" + std::to_string(v.time) +
                        " exceeds censoring time " + std::to_string(s.censor_time));
      if (static_cast<std::size_t>(v.covariates.size()) != visit_names_.size())
        throw DataError("cohort: subject '" + s.id + "' visit at t=" + std::to_string(v.time) +
                        " has " + std::to_string(v.covariates.size()) +
                        " covariate values, registry has " + std::to_string(visit_names_.size()));
      if (prev && prev->time == v.time && prev->kind == v.kind)
        throw DataError("cohort: subject '" + s.id + "' has duplicate " +
                        std::string(to_string(v.kind)) + " visit at t=" + std::to_string(v.time));
      prev = &v;
    }
    max_censor_ = std::max(max_censor_, s.censor_time);
  }

  if (tau) {
    if (!std::isfinite(*tau) || *tau <= 0.0) throw DataError("cohort: tau must be positive");
    tau_ = std::min(*tau, max_censor_);
  } else {
    tau_ = max_censor_;
  }
}

int Cohort::baseline_index(const std::string& name) const {
  for (std::size_t j = 0; j < baseline_names_.size(); ++j)
    if (baseline_names_[j] == name) return static_cast<int>(j);
  return -1;
}

int Cohort::visit_index(const std::string& name) const {
  for (std::size_t j = 0; j < visit_names_.size(); ++j)
    if (visit_names_[j] == name) return static_cast<int>(j);
  return -1;
}

std::size_t Cohort::total_visits() const {
  std::size_t n = 0;
  for (const auto& s : subjects_) n += s.visits.size();
  return n;
}

std::size_t Cohort::count_visits(VisitKind kind, double up_to) const {
  std::size_t n = 0;
  for (const auto& s : subjects_)
    for (const auto& v : s.visits)
      if (v.kind == kind && v.time <= up_to) ++n;
  return n;
}

Cohort Cohort::resample(const std::vector<std::size_t>& indices) const {
  std::vector<Subject> picked;
  picked.reserve(indices.size());
  std::unordered_set<std::string> seen;
  for (std::size_t k = 0; k < indices.size(); ++k) {
    if (indices[k] >= subjects_.size())
      throw DataError("cohort: resample index out of range");
    Subject s = subjects_[indices[k]];
    if (!seen.insert(s.id).second) {
      s.id += "#" + std::to_string(k);
      seen.insert(s.id);
    }
    picked.push_back(std::move(s));
  }
  return Cohort(std::move(picked), baseline_names_, visit_names_, tau_);
}

CountingState counting_state(const Subject& subject, double t) {
  CountingState state;
  for (const auto& v : subject.visits) {
    if (!(v.time < t)) break;
    if (v.kind == VisitKind::event)
      ++state.events_before;
    else
      ++state.nonevents_before;
    state.last_visit_time = v.time;
    state.last_observed = v.covariates;
  }
  return state;
}

}  // namespace recur
