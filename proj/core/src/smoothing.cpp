#include "recur/smoothing.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace recur {

Vector SmoothedMoments::mean() const {
  if (!(s0 > 0.0)) throw FitError("smoothed moments: zero denominator");
  return s1 / s0;
}

Matrix SmoothedMoments::covariance() const {
  Vector m = mean();
  return s2 / s0 - m * m.transpose();
}

double SmoothedMoments::value() const { return std::exp(log_shift) * s0; }

PanelSmoother::PanelSmoother(SmoothingPanel panel, double h)
    : panel_(std::move(panel)), h_(h), exponent_(panel_.size(), 0.0) {
  if (!(h > 0.0)) throw ConfigError("smoothing bandwidth must be positive");
  for (std::size_t v = 0; v < panel_.size(); ++v) exponent_[v] = panel_.offset[v];
}

void PanelSmoother::set_coefficients(const Vector& coefficients) {
  if (coefficients.size() != panel_.exponents.cols())
    throw ConfigError("smoothing coefficients have length " +
                      std::to_string(coefficients.size()) + ", panel expects " +
                      std::to_string(panel_.exponents.cols()));
  Vector lin = panel_.exponents * coefficients;
  for (std::size_t v = 0; v < panel_.size(); ++v) exponent_[v] = lin[v] + panel_.offset[v];
}

SmoothedMoments PanelSmoother::moments(double t, int order) const {
  const Eigen::Index p = panel_.values.cols();
  SmoothedMoments m;
  m.s1 = Vector::Zero(p);
  m.s2 = Matrix::Zero(p, p);

  // rows with t−h < V < t+h (the kernel vanishes at the boundary)
  const auto lo =
      std::upper_bound(panel_.times.begin(), panel_.times.end(), t - h_) - panel_.times.begin();
  const auto hi =
      std::lower_bound(panel_.times.begin(), panel_.times.end(), t + h_) - panel_.times.begin();
  if (lo >= hi) return m;

  double shift = exponent_[lo];
  for (auto v = lo + 1; v < hi; ++v) shift = std::max(shift, exponent_[v]);
  m.log_shift = shift;

  for (auto v = lo; v < hi; ++v) {
    const double w = kernel_weight((t - panel_.times[v]) / h_) / h_ * std::exp(exponent_[v] - shift);
    if (w == 0.0) continue;  // exactly at the window boundary
    ++m.window_count;
    m.s0 += w;
    if (order >= 1) m.s1 += w * panel_.values.row(v).transpose();
    if (order >= 2) m.s2 += w * panel_.values.row(v).transpose() * panel_.values.row(v);
  }
  const double n = static_cast<double>(panel_.n_subjects);
  m.s0 /= n;
  m.s1 /= n;
  m.s2 /= n;
  return m;
}

std::vector<int> resolve_visit_columns(const Cohort& cohort, const std::vector<std::string>& names) {
  std::vector<int> cols;
  if (names.empty()) {
    cols.resize(cohort.visit_covariates().size());
    std::iota(cols.begin(), cols.end(), 0);
    return cols;
  }
  cols.reserve(names.size());
  for (const auto& name : names) {
    int j = cohort.visit_index(name);
    if (j < 0) throw ConfigError("unknown visit covariate '" + name + "'");
    if (std::find(cols.begin(), cols.end(), j) != cols.end())
      throw ConfigError("visit covariate '" + name + "' listed twice");
    cols.push_back(j);
  }
  return cols;
}

namespace {

double checked_value(const Cohort& cohort, const Subject& subject, const Visit& visit, int column) {
  const double value = visit.covariates[column];
  if (std::isnan(value))
    throw DataError("covariate '" + cohort.visit_covariates()[column] + "' is missing at " +
                    std::string(to_string(visit.kind)) + " visit t=" + std::to_string(visit.time) +
                    " of subject '" + subject.id + "'");
  return value;
}

}  // namespace

SmoothingPanel build_smoothing_panel(const Cohort& cohort, VisitKind kind,
                                     const std::vector<int>& value_columns,
                                     const std::vector<int>& exponent_columns,
                                     const HistoryFeatureMap* features, const Vector* alpha) {
  if (features && alpha && static_cast<std::size_t>(alpha->size()) != features->dimension())
    throw ConfigError("alpha has length " + std::to_string(alpha->size()) +
                      ", history spec has dimension " + std::to_string(features->dimension()));

  SmoothingPanel panel;
  panel.n_subjects = static_cast<int>(cohort.size());
  std::size_t rows = 0;
  for (const auto& s : cohort.subjects())
    for (const auto& v : s.visits)
      if (v.kind == kind) ++rows;
  panel.values.resize(rows, static_cast<Eigen::Index>(value_columns.size()));
  panel.exponents.resize(rows, static_cast<Eigen::Index>(exponent_columns.size()));
  panel.times.reserve(rows);
  panel.offset.reserve(rows);
  panel.subject.reserve(rows);

  std::size_t r = 0;
  for (std::size_t i = 0; i < cohort.size(); ++i) {
    const Subject& s = cohort.subject(i);
    // walk visits grouped by time so X at a visit excludes that timestamp
    std::optional<HistoryWalker> walker;
    if (features) walker.emplace(*features, s);
    std::size_t k = 0;
    while (k < s.visits.size()) {
      const double t = s.visits[k].time;
      double offset = 0.0;
      if (features && alpha && alpha->size() > 0) offset = -alpha->dot(walker->features());
      for (std::size_t g = k; g < s.visits.size() && s.visits[g].time == t; ++g) {
        const Visit& v = s.visits[g];
        if (v.kind == kind) {
          panel.times.push_back(v.time);
          panel.offset.push_back(offset);
          panel.subject.push_back(static_cast<int>(i));
          for (std::size_t j = 0; j < value_columns.size(); ++j)
            panel.values(r, static_cast<Eigen::Index>(j)) =
                checked_value(cohort, s, v, value_columns[j]);
          for (std::size_t j = 0; j < exponent_columns.size(); ++j)
            panel.exponents(r, static_cast<Eigen::Index>(j)) =
                checked_value(cohort, s, v, exponent_columns[j]);
          ++r;
        }
      }
      while (k < s.visits.size() && s.visits[k].time == t) {
        if (features) walker->apply(s.visits[k]);
        ++k;
      }
    }
  }

  // global sort by time (stable so equal times keep subject order)
  std::vector<std::size_t> order(panel.times.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return panel.times[a] < panel.times[b]; });
  SmoothingPanel sorted;
  sorted.n_subjects = panel.n_subjects;
  sorted.values.resize(panel.values.rows(), panel.values.cols());
  sorted.exponents.resize(panel.exponents.rows(), panel.exponents.cols());
  sorted.times.resize(panel.times.size());
  sorted.offset.resize(panel.offset.size());
  sorted.subject.resize(panel.subject.size());
  for (std::size_t v = 0; v < order.size(); ++v) {
    sorted.times[v] = panel.times[order[v]];
    sorted.offset[v] = panel.offset[order[v]];
    sorted.subject[v] = panel.subject[order[v]];
    sorted.values.row(v) = panel.values.row(order[v]);
    sorted.exponents.row(v) = panel.exponents.row(order[v]);
  }
  return sorted;
}

ScoreTerms build_score_terms(const Cohort& cohort, VisitKind kind,
                             const std::vector<int>& columns) {
  ScoreTerms terms;
  std::size_t rows = 0;
  for (const auto& s : cohort.subjects())
    for (const auto& v : s.visits)
      if (v.kind == kind && v.time <= cohort.tau()) ++rows;
  terms.z.resize(rows, static_cast<Eigen::Index>(columns.size()));
  terms.times.reserve(rows);
  terms.subject.reserve(rows);

  std::size_t r = 0;
  for (std::size_t i = 0; i < cohort.size(); ++i) {
    const Subject& s = cohort.subject(i);
    for (const auto& v : s.visits) {
      if (v.kind != kind || v.time > cohort.tau()) continue;
      terms.times.push_back(v.time);
      terms.subject.push_back(static_cast<int>(i));
      for (std::size_t j = 0; j < columns.size(); ++j)
        terms.z(r, static_cast<Eigen::Index>(j)) = checked_value(cohort, s, v, columns[j]);
      ++r;
    }
  }

  std::vector<std::size_t> order(terms.times.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return terms.times[a] < terms.times[b]; });
  ScoreTerms sorted;
  sorted.z.resize(terms.z.rows(), terms.z.cols());
  sorted.times.resize(terms.times.size());
  sorted.subject.resize(terms.subject.size());
  for (std::size_t v = 0; v < order.size(); ++v) {
    sorted.times[v] = terms.times[order[v]];
    sorted.subject[v] = terms.subject[order[v]];
    sorted.z.row(v) = terms.z.row(order[v]);
  }
  return sorted;
}

ScoreFunctionEval smoothed_score_block(PanelSmoother& smoother, const ScoreTerms& terms,
                                       ZeroDenominatorPolicy policy, const Vector& coefficients,
                                       Eigen::Index block_offset) {
  smoother.set_coefficients(coefficients);
  const Eigen::Index p = terms.z.cols();
  const Eigen::Index q = smoother.panel().exponents.cols();
  const double h = smoother.bandwidth();
  const double n = smoother.panel().n_subjects;

  ScoreFunctionEval ev;
  ev.u = Vector::Zero(p);
  ev.jac = Matrix::Zero(p, q);
  for (std::size_t e = 0; e < terms.size(); ++e) {
    const double tc = std::max(terms.times[e], h);
    SmoothedMoments m = smoother.moments(tc);
    if (!(m.s0 > 0.0)) {
      if (policy == ZeroDenominatorPolicy::error)
        throw FitError("zero smoothed denominator at t=" + std::to_string(terms.times[e]) +
                       " (no smoothing visits in the kernel window)");
      ++ev.dropped;
      continue;
    }
    ev.u += terms.z.row(static_cast<Eigen::Index>(e)).transpose() -
            m.mean().segment(block_offset, p);
    ev.jac -= m.covariance().block(block_offset, 0, p, q);
  }
  ev.u /= n;
  ev.jac /= n;
  return ev;
}

SmoothedMoments smoothed_moments(const Cohort& cohort, const HistoryFeatureSpec& spec, double t,
                                 const Vector& beta, const Vector& alpha, double h) {
  if (t < 0.0) throw ConfigError("smoothed moments: t must be nonnegative");
  HistoryFeatureMap features(cohort, spec);
  std::vector<int> cols = resolve_visit_columns(cohort, {});
  if (beta.size() != static_cast<Eigen::Index>(cols.size()))
    throw ConfigError("beta has length " + std::to_string(beta.size()) + ", cohort has " +
                      std::to_string(cols.size()) + " visit covariates");
  PanelSmoother smoother(
      build_smoothing_panel(cohort, VisitKind::nonevent, cols, cols, &features, &alpha), h);
  smoother.set_coefficients(beta);
  return smoother.moments(t);
}

Vector weighted_covariate_mean(const Cohort& cohort, const HistoryFeatureSpec& spec, double t,
                               const Vector& beta, const Vector& alpha, double h,
                               const KernelConfig& config) {
  (void)config;  // the zero-denominator policy only matters to score assembly
  const double tc = std::max(t, h);
  SmoothedMoments m = smoothed_moments(cohort, spec, tc, beta, alpha, h);
  if (!(m.s0 > 0.0))
    throw FitError("zero smoothed denominator at t=" + std::to_string(tc) + " (window_count=" +
                   std::to_string(m.window_count) + ")");
  return m.mean();
}

Vector visit_mean(const Cohort& cohort, const HistoryFeatureSpec& spec, double u,
                  const Vector& alpha) {
  HistoryFeatureMap features(cohort, spec);
  if (static_cast<std::size_t>(alpha.size()) != features.dimension())
    throw ConfigError("alpha length does not match the history spec dimension");

  double denom = 0.0;
  Vector numer = Vector::Zero(alpha.size());
  double shift = -std::numeric_limits<double>::infinity();
  std::vector<std::pair<Vector, double>> at_risk;  // (X_i(u), αᵀX_i(u))
  for (const auto& s : cohort.subjects()) {
    if (s.censor_time < u) continue;
    Vector x = features.features(s, u);
    const double eta = alpha.dot(x);
    shift = std::max(shift, eta);
    at_risk.emplace_back(std::move(x), eta);
  }
  if (at_risk.empty())
    throw FitError("empty risk set at u=" + std::to_string(u));
  for (const auto& [x, eta] : at_risk) {
    const double w = std::exp(eta - shift);
    denom += w;
    numer += w * x;
  }
  return numer / denom;
}

}  // namespace recur
