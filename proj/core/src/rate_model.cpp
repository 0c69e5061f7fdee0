#include "recur/rate_model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numeric>

#include "recur/smoothing.hpp"

namespace recur {

const char* to_string(RateMethod method) {
  switch (method) {
    case RateMethod::proposed: return "proposed";
    case RateMethod::ppl: return "ppl";
    case RateMethod::locf: return "locf";
    case RateMethod::full_oracle: return "full_oracle";
  }
  return "?";
}

namespace {

std::vector<std::string> names_for(const Cohort& cohort, const std::vector<int>& cols) {
  std::vector<std::string> names;
  names.reserve(cols.size());
  for (int j : cols) names.push_back(cohort.visit_covariates()[j]);
  return names;
}

// Breslow-type cumulative baseline curve: one increment per event, collapsed
// to distinct event times, anchored at (0, 0).
std::vector<std::pair<double, double>> accumulate_baseline(
    const ScoreTerms& events, const std::function<double(double)>& increment_at) {
  std::vector<std::pair<double, double>> curve;
  curve.emplace_back(0.0, 0.0);
  double cum = 0.0;
  for (std::size_t e = 0; e < events.size(); ++e) {
    cum += increment_at(events.times[e]);
    if (e + 1 == events.size() || events.times[e + 1] != events.times[e])
      curve.emplace_back(events.times[e], cum);
  }
  return curve;
}

}  // namespace

RateModelFit fit_proposed(const Cohort& cohort, const HistoryFeatureSpec& spec,
                          const KernelConfig& kernel, const SolverConfig& solver,
                          const std::vector<std::string>& z_names) {
  const double h = resolve_bandwidth(kernel, cohort.size());
  const std::vector<int> cols = resolve_visit_columns(cohort, z_names);
  const int n = static_cast<int>(cohort.size());

  ScoreTerms events = build_score_terms(cohort, VisitKind::event, cols);
  if (events.size() == 0) throw FitError("no event visits in (0, tau]");

  SolverConfig visit_solver = solver;
  visit_solver.initial = Vector();  // solver.initial targets beta
  VisitModelFit vfit = fit_visit_model(cohort, spec, visit_solver, kernel);
  if (!vfit.converged)
    throw FitError("visit model did not converge (score norm " +
                   std::to_string(vfit.score_norm) + ")");

  HistoryFeatureMap features(cohort, spec);
  PanelSmoother smoother(
      build_smoothing_panel(cohort, VisitKind::nonevent, cols, cols, &features, &vfit.alpha_hat),
      h);

  ScoreRootResult root = solve_estimating_equation(
      static_cast<Eigen::Index>(cols.size()), solver, [&](const Vector& beta) {
        return smoothed_score_block(smoother, events, kernel.zero_denominator_policy, beta);
      });

  RateModelFit fit;
  fit.method = RateMethod::proposed;
  fit.coefficient_names = names_for(cohort, cols);
  fit.beta_hat = root.x;
  fit.iterations = root.iterations;
  fit.converged = true;

  // fresh final pass: pins score_norm and leaves the smoother at β̂
  ScoreFunctionEval final_ev =
      smoothed_score_block(smoother, events, kernel.zero_denominator_policy, fit.beta_hat);
  fit.score_norm = sup_norm(final_ev.u);
  fit.dropped_event_terms = final_ev.dropped;

  fit.baseline_cumulative = accumulate_baseline(events, [&](double t) {
    const double tc = std::max(t, h);
    SmoothedMoments m = smoother.moments(tc, 0);
    if (!(m.s0 > 0.0)) return 0.0;  // dropped term (error policy threw already)
    return baseline_visit_rate(vfit.risk_points, h, tc) / (n * m.value());
  });
  fit.visit_fit = std::move(vfit);
  return fit;
}

RateModelFit fit_ppl(const Cohort& cohort, const KernelConfig& kernel, const SolverConfig& solver,
                     const std::vector<std::string>& z_names) {
  RateModelFit fit = fit_proposed(cohort, HistoryFeatureSpec{}, kernel, solver, z_names);
  fit.method = RateMethod::ppl;
  fit.visit_fit.reset();
  return fit;
}

namespace {

// Per-subject step paths for the LOCF imputation: per column, the non-missing
// observations in time order; time0 covers (0, first obs).
struct LocfPaths {
  std::vector<std::vector<std::vector<double>>> times;   // [subject][column]
  std::vector<std::vector<std::vector<double>>> values;  // [subject][column]
  std::vector<std::vector<double>> time0;                // NaN = nothing to impute from
  std::vector<std::string> column_names;
};

LocfPaths build_locf_paths(const Cohort& cohort, const std::vector<int>& cols,
                           const LocfOptions& options) {
  std::vector<int> fill_baseline(cols.size(), -1);
  for (const auto& [visit_name, baseline_name] : options.time0_from_baseline) {
    const int vj = cohort.visit_index(visit_name);
    const int bj = cohort.baseline_index(baseline_name);
    if (bj < 0) throw ConfigError("unknown baseline covariate '" + baseline_name + "'");
    for (std::size_t c = 0; c < cols.size(); ++c)
      if (cols[c] == vj) fill_baseline[c] = bj;
  }

  const double nan = std::numeric_limits<double>::quiet_NaN();
  LocfPaths paths;
  paths.times.resize(cohort.size());
  paths.values.resize(cohort.size());
  paths.time0.resize(cohort.size());
  for (int j : cols) paths.column_names.push_back(cohort.visit_covariates()[j]);

  for (std::size_t i = 0; i < cohort.size(); ++i) {
    const Subject& s = cohort.subject(i);
    paths.times[i].resize(cols.size());
    paths.values[i].resize(cols.size());
    paths.time0[i].assign(cols.size(), nan);
    for (std::size_t c = 0; c < cols.size(); ++c) {
      for (const auto& v : s.visits) {
        const double value = v.covariates[cols[c]];
        if (std::isnan(value)) continue;
        paths.times[i][c].push_back(v.time);
        paths.values[i][c].push_back(value);
      }
      if (fill_baseline[c] >= 0)
        paths.time0[i][c] = s.baseline[fill_baseline[c]];
      else if (!paths.values[i][c].empty())
        paths.time0[i][c] = paths.values[i][c].front();  // backward fill
    }
  }
  return paths;
}

}  // namespace

RateModelFit fit_locf(const Cohort& cohort, const SolverConfig& solver,
                      const std::vector<std::string>& z_names, const LocfOptions& options) {
  const std::vector<int> cols = resolve_visit_columns(cohort, z_names);
  auto paths = std::make_shared<LocfPaths>(build_locf_paths(cohort, cols, options));
  const Cohort* chrt = &cohort;

  CovariatePath path = [paths, chrt](std::size_t i, double t) {
    Vector z(static_cast<Eigen::Index>(paths->column_names.size()));
    for (std::size_t c = 0; c < paths->column_names.size(); ++c) {
      const auto& times = paths->times[i][c];
      // last observation strictly before t: the imputed process is evaluated
      // at t−, so a measurement taken at an event does not inform that event
      auto it = std::lower_bound(times.begin(), times.end(), t);
      double value;
      if (it == times.begin()) {
        value = paths->time0[i][c];
        if (std::isnan(value))
          throw FitError("subject '" + chrt->subject(i).id + "' has no observed value of '" +
                         paths->column_names[c] + "' and no fill");
      } else {
        value = paths->values[i][c][static_cast<std::size_t>(it - times.begin()) - 1];
      }
      z[static_cast<Eigen::Index>(c)] = value;
    }
    return z;
  };

  RateModelFit fit = fit_with_covariate_paths(cohort, path, names_for(cohort, cols), solver,
                                              RateMethod::locf);
  return fit;
}

RateModelFit fit_with_covariate_paths(const Cohort& cohort, const CovariatePath& path,
                                      const std::vector<std::string>& coefficient_names,
                                      const SolverConfig& solver, RateMethod label) {
  const Eigen::Index p = static_cast<Eigen::Index>(coefficient_names.size());
  const int n = static_cast<int>(cohort.size());

  // event times ascending with their subjects (covariates come from the path)
  std::vector<std::pair<double, int>> events;
  for (std::size_t i = 0; i < cohort.size(); ++i)
    for (const auto& v : cohort.subject(i).visits)
      if (v.kind == VisitKind::event && v.time <= cohort.tau())
        events.emplace_back(v.time, static_cast<int>(i));
  if (events.empty()) throw FitError("no event visits in (0, tau]");
  std::sort(events.begin(), events.end());

  // subjects by censor time descending: the risk set grows as t decreases
  std::vector<std::size_t> by_censor(cohort.size());
  std::iota(by_censor.begin(), by_censor.end(), 0);
  std::sort(by_censor.begin(), by_censor.end(), [&](std::size_t a, std::size_t b) {
    return cohort.subject(a).censor_time > cohort.subject(b).censor_time;
  });

  // S^(k)(t,β) via a descending sweep; per-event max-shift in the exponent
  Matrix zbuf(cohort.size(), p);
  auto eval = [&](const Vector& beta) {
    ScoreFunctionEval ev;
    ev.u = Vector::Zero(p);
    ev.jac = Matrix::Zero(p, p);
    std::size_t entered = 0;
    std::vector<std::size_t> at_risk;
    at_risk.reserve(cohort.size());
    for (auto e = events.rbegin(); e != events.rend(); ++e) {
      const double t = e->first;
      while (entered < by_censor.size() &&
             cohort.subject(by_censor[entered]).censor_time >= t)
        at_risk.push_back(by_censor[entered++]);

      double shift = -std::numeric_limits<double>::infinity();
      Eigen::Index m = 0;
      Vector eta(static_cast<Eigen::Index>(at_risk.size()));
      for (std::size_t j : at_risk) {
        zbuf.row(m) = path(j, t).transpose();
        eta[m] = beta.dot(zbuf.row(m));
        shift = std::max(shift, eta[m]);
        ++m;
      }
      double s0 = 0.0;
      Vector s1 = Vector::Zero(p);
      Matrix s2 = Matrix::Zero(p, p);
      for (Eigen::Index r = 0; r < m; ++r) {
        const double w = std::exp(eta[r] - shift);
        s0 += w;
        s1 += w * zbuf.row(r).transpose();
        s2 += w * zbuf.row(r).transpose() * zbuf.row(r);
      }
      const Vector mean = s1 / s0;
      ev.u += path(e->second, t) - mean;
      ev.jac -= (s2 / s0 - mean * mean.transpose());
    }
    ev.u /= n;
    ev.jac /= n;
    return ev;
  };

  ScoreRootResult root = solve_estimating_equation(p, solver, eval);

  RateModelFit fit;
  fit.method = label;
  fit.coefficient_names = coefficient_names;
  fit.beta_hat = root.x;
  fit.iterations = root.iterations;
  fit.converged = true;

  ScoreFunctionEval final_ev = eval(fit.beta_hat);
  fit.score_norm = sup_norm(final_ev.u);

  // Breslow curve over true/imputed paths: ΔM(T) = 1 / {n·S⁰(T, β̂)}
  {
    fit.baseline_cumulative.emplace_back(0.0, 0.0);
    double cum = 0.0;
    std::size_t entered = 0;
    std::vector<std::size_t> at_risk;
    std::vector<double> s0_at(events.size());
    for (std::size_t e = events.size(); e-- > 0;) {
      const double t = events[e].first;
      while (entered < by_censor.size() &&
             cohort.subject(by_censor[entered]).censor_time >= t)
        at_risk.push_back(by_censor[entered++]);
      double shift = -std::numeric_limits<double>::infinity();
      std::vector<double> eta;
      eta.reserve(at_risk.size());
      for (std::size_t j : at_risk) {
        eta.push_back(fit.beta_hat.dot(path(j, t)));
        shift = std::max(shift, eta.back());
      }
      double acc = 0.0;
      for (double v : eta) acc += std::exp(v - shift);
      s0_at[e] = std::exp(shift) * acc / n;
    }
    for (std::size_t e = 0; e < events.size(); ++e) {
      cum += 1.0 / (n * s0_at[e]);
      if (e + 1 == events.size() || events[e + 1].first != events[e].first)
        fit.baseline_cumulative.emplace_back(events[e].first, cum);
    }
  }
  return fit;
}

double baseline_cumulative_proposed(const Cohort& cohort, const HistoryFeatureSpec& spec,
                                    const RateModelFit& fit, const KernelConfig& kernel,
                                    double t) {
  if (fit.method != RateMethod::proposed || !fit.visit_fit)
    throw ConfigError("baseline_cumulative_proposed requires a proposed-method fit");
  if (t < 0.0 || t > cohort.tau())
    throw ConfigError("baseline cumulative rate: t must lie in [0, tau]");

  const double h = resolve_bandwidth(kernel, cohort.size());
  const int n = static_cast<int>(cohort.size());
  std::vector<int> cols;
  for (const auto& name : fit.coefficient_names) cols.push_back(cohort.visit_index(name));
  for (int c : cols)
    if (c < 0) throw ConfigError("fit coefficients do not match the cohort's visit covariates");

  HistoryFeatureMap features(cohort, spec);
  PanelSmoother smoother(
      build_smoothing_panel(cohort, VisitKind::nonevent, cols, cols, &features,
                            &fit.visit_fit->alpha_hat),
      h);
  smoother.set_coefficients(fit.beta_hat);

  double cum = 0.0;
  ScoreTerms events = build_score_terms(cohort, VisitKind::event, cols);
  for (std::size_t e = 0; e < events.size() && events.times[e] <= t; ++e) {
    const double tc = std::max(events.times[e], h);
    SmoothedMoments m = smoother.moments(tc, 0);
    if (!(m.s0 > 0.0)) {
      if (kernel.zero_denominator_policy == ZeroDenominatorPolicy::error)
        throw FitError("zero smoothed denominator at event time t=" +
                       std::to_string(events.times[e]));
      continue;
    }
    cum += baseline_visit_rate(fit.visit_fit->risk_points, h, tc) / (n * m.value());
  }
  return cum;
}

double baseline_cumulative_at(const RateModelFit& fit, double t) {
  double value = 0.0;
  for (const auto& [time, cum] : fit.baseline_cumulative) {
    if (time > t) break;
    value = cum;
  }
  return value;
}

}  // namespace recur
