#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>

#include "recur/rate_model.hpp"
#include "recur/simulate.hpp"

using namespace recur;

namespace {

const double kNan = std::numeric_limits<double>::quiet_NaN();

Vector vec1(double x) {
  Vector v(1);
  v << x;
  return v;
}

Cohort sim_cohort(int n, int rep = 0) {
  ScenarioConfig config = scenario_preset("I");
  config.n = n;
  return generate_cohort(config, rep).cohort;
}

KernelConfig sim_kernel() { return scenario_preset("I").kernel; }

// cohort copy with baseline column bi and visit column vi mapped through f
Cohort transform_columns(const Cohort& cohort, int bi, int vi, double (*f)(double)) {
  std::vector<Subject> subjects(cohort.subjects().begin(), cohort.subjects().end());
  for (auto& s : subjects) {
    if (bi >= 0) s.baseline[bi] = f(s.baseline[bi]);
    for (auto& v : s.visits)
      if (vi >= 0) v.covariates[vi] = f(v.covariates[vi]);
  }
  return Cohort(std::move(subjects), cohort.baseline_covariates(), cohort.visit_covariates(),
                cohort.tau());
}

}  // namespace

TEST_CASE("plain kernel fit equals the two-step fit with no history features") {
  Cohort cohort = sim_cohort(120);
  RateModelFit two_step = fit_proposed(cohort, HistoryFeatureSpec{}, sim_kernel());
  RateModelFit plain = fit_ppl(cohort, sim_kernel());

  REQUIRE(two_step.beta_hat.size() == plain.beta_hat.size());
  for (Eigen::Index j = 0; j < plain.beta_hat.size(); ++j)
    CHECK(two_step.beta_hat[j] == plain.beta_hat[j]);
  CHECK(plain.method == RateMethod::ppl);
  CHECK_FALSE(plain.visit_fit.has_value());
  CHECK(plain.converged);
  CHECK(plain.score_norm < 1e-8);
}

TEST_CASE("estimates are translation invariant in any covariate") {
  Cohort cohort = sim_cohort(150);
  const int z2_visit = cohort.visit_index("Z2");
  const int z2_baseline = cohort.baseline_index("Z2_0");
  Cohort shifted = transform_columns(cohort, z2_baseline, z2_visit,
                                     +[](double x) { return x + 10.0; });

  RateModelFit base = fit_proposed(cohort, simulation_history_spec(), sim_kernel());
  RateModelFit moved = fit_proposed(shifted, simulation_history_spec(), sim_kernel());

  REQUIRE(base.converged);
  REQUIRE(moved.converged);
  for (Eigen::Index j = 0; j < base.beta_hat.size(); ++j)
    CHECK(moved.beta_hat[j] == doctest::Approx(base.beta_hat[j]).epsilon(1e-10));
  for (Eigen::Index j = 0; j < base.visit_fit->alpha_hat.size(); ++j)
    CHECK(moved.visit_fit->alpha_hat[j] ==
          doctest::Approx(base.visit_fit->alpha_hat[j]).epsilon(1e-10));
}

TEST_CASE("rescaling a covariate rescales its coefficient inversely") {
  Cohort cohort = sim_cohort(150);
  const int z2_visit = cohort.visit_index("Z2");
  const int z2_baseline = cohort.baseline_index("Z2_0");
  Cohort doubled = transform_columns(cohort, z2_baseline, z2_visit,
                                     +[](double x) { return 2.0 * x; });

  RateModelFit base = fit_proposed(cohort, simulation_history_spec(), sim_kernel());
  RateModelFit scaled = fit_proposed(doubled, simulation_history_spec(), sim_kernel());

  // coefficient order: Z1, Z2, Z3 in the event model; features Z1, last(Z2), last(Z3)
  CHECK(scaled.beta_hat[0] == doctest::Approx(base.beta_hat[0]).epsilon(1e-6));
  CHECK(scaled.beta_hat[1] == doctest::Approx(base.beta_hat[1] / 2.0).epsilon(1e-6));
  CHECK(scaled.beta_hat[2] == doctest::Approx(base.beta_hat[2]).epsilon(1e-6));
  CHECK(scaled.visit_fit->alpha_hat[0] ==
        doctest::Approx(base.visit_fit->alpha_hat[0]).epsilon(1e-6));
  CHECK(scaled.visit_fit->alpha_hat[1] ==
        doctest::Approx(base.visit_fit->alpha_hat[1] / 2.0).epsilon(1e-6));
  CHECK(scaled.visit_fit->alpha_hat[2] ==
        doctest::Approx(base.visit_fit->alpha_hat[2]).epsilon(1e-6));
}

TEST_CASE("carry-forward fit equals the explicit step-function path fit") {
  Cohort cohort = sim_cohort(100, 1);
  const LocfOptions options = simulation_locf_options();
  const std::vector<std::string> names = {"Z1", "Z2", "Z3"};

  std::vector<int> visit_cols, fill_cols;
  for (const auto& name : names) visit_cols.push_back(cohort.visit_index(name));
  for (const auto& [visit_name, baseline_name] : options.time0_from_baseline)
    fill_cols.push_back(cohort.baseline_index(baseline_name));

  // carry the last value observed strictly before t; before the first
  // observation fall back to the configured baseline column
  CovariatePath path = [&](std::size_t i, double t) {
    const Subject& s = cohort.subject(i);
    Vector z(static_cast<Eigen::Index>(names.size()));
    for (std::size_t c = 0; c < names.size(); ++c) {
      double value = s.baseline[fill_cols[c]];
      for (const Visit& v : s.visits) {
        if (v.time >= t) break;
        if (!std::isnan(v.covariates[visit_cols[c]])) value = v.covariates[visit_cols[c]];
      }
      z[static_cast<Eigen::Index>(c)] = value;
    }
    return z;
  };

  RateModelFit by_paths = fit_with_covariate_paths(cohort, path, names);
  RateModelFit by_locf = fit_locf(cohort, {}, names, options);

  CHECK(by_locf.method == RateMethod::locf);
  for (Eigen::Index j = 0; j < by_paths.beta_hat.size(); ++j)
    CHECK(by_locf.beta_hat[j] == doctest::Approx(by_paths.beta_hat[j]).epsilon(1e-10));
}

TEST_CASE("two-subject full-path fit solves exactly with unit baseline mass") {
  // constant covariate z in {0, 1}; the z=1 subject has two of the three
  // events, so beta = log 2; every risk set holds both subjects, so each
  // baseline increment is 1/(2 * 1.5) and the curve reaches 1 at t=1
  Subject a;
  a.id = "a";
  a.censor_time = 1.0;
  a.baseline = vec1(0.0);
  a.visits = {{0.5, VisitKind::event, vec1(0.0)}};
  Subject b;
  b.id = "b";
  b.censor_time = 1.0;
  b.baseline = vec1(1.0);
  b.visits = {{0.25, VisitKind::event, vec1(1.0)}, {0.75, VisitKind::event, vec1(1.0)}};
  Cohort cohort({a, b}, {"z0"}, {"z"});

  CovariatePath path = [&](std::size_t i, double) { return vec1(cohort.subject(i).baseline[0]); };
  RateModelFit fit = fit_with_covariate_paths(cohort, path, {"z"});

  CHECK(fit.converged);
  CHECK(fit.score_norm < 1e-8);
  CHECK(fit.beta_hat[0] == doctest::Approx(std::log(2.0)).epsilon(1e-7));

  REQUIRE(!fit.baseline_cumulative.empty());
  CHECK(fit.baseline_cumulative.front().first == 0.0);
  CHECK(fit.baseline_cumulative.front().second == 0.0);
  for (std::size_t k = 1; k < fit.baseline_cumulative.size(); ++k)
    CHECK(fit.baseline_cumulative[k].second >= fit.baseline_cumulative[k - 1].second);
  CHECK(baseline_cumulative_at(fit, 0.2) == doctest::Approx(0.0));
  CHECK(baseline_cumulative_at(fit, 0.3) == doctest::Approx(1.0 / 3.0).epsilon(1e-7));
  CHECK(baseline_cumulative_at(fit, 1.0) == doctest::Approx(1.0).epsilon(1e-7));
}

TEST_CASE("carry-forward needs an observed value or a configured fill") {
  Subject a;
  a.id = "a";
  a.censor_time = 1.0;
  a.baseline = vec1(1.0);
  a.visits = {{0.2, VisitKind::nonevent, vec1(1.0)}, {0.5, VisitKind::event, vec1(1.0)}};
  Subject b;  // z is never measured for this subject
  b.id = "b";
  b.censor_time = 1.0;
  b.baseline = vec1(0.0);
  b.visits = {{0.6, VisitKind::event, vec1(kNan)}};
  Cohort cohort({a, b}, {"z0"}, {"z"});

  CHECK_THROWS_AS(fit_locf(cohort), FitError);

  LocfOptions options;
  options.time0_from_baseline = {{"z", "z0"}};
  RateModelFit fit = fit_locf(cohort, {}, {}, options);
  CHECK(fit.converged);
  // paths become constant (a: 1, b: 0) with one event each: beta = 0 exactly
  CHECK(fit.beta_hat[0] == doctest::Approx(0.0).epsilon(1e-7));
}

TEST_CASE("a cohort without events in (0, tau] cannot be fit") {
  Subject a;
  a.id = "a";
  a.censor_time = 2.0;
  a.visits = {{0.5, VisitKind::nonevent, vec1(1.0)}, {1.5, VisitKind::nonevent, vec1(0.0)}};
  Cohort cohort({a}, {}, {"z"});
  KernelConfig config;
  config.bandwidth = Bandwidth::fixed(0.5);

  CHECK_THROWS_AS(fit_ppl(cohort, config), FitError);
  CHECK_THROWS_AS(fit_locf(cohort), FitError);
}

TEST_CASE("events without kernel mass follow the zero-denominator policy") {
  Subject a;
  a.id = "a";
  a.censor_time = 3.0;
  a.visits = {{0.4, VisitKind::nonevent, vec1(0.0)},
              {1.2, VisitKind::nonevent, vec1(0.0)},
              {0.8, VisitKind::event, vec1(0.0)},
              {2.9, VisitKind::event, vec1(0.0)}};  // no non-event visit within h
  Subject b;
  b.id = "b";
  b.censor_time = 3.0;
  b.visits = {{0.6, VisitKind::nonevent, vec1(1.0)},
              {1.4, VisitKind::nonevent, vec1(1.0)},
              {1.0, VisitKind::event, vec1(1.0)}};
  Cohort cohort({a, b}, {}, {"z"});

  KernelConfig strict;
  strict.bandwidth = Bandwidth::fixed(0.5);
  strict.zero_denominator_policy = ZeroDenominatorPolicy::error;
  CHECK_THROWS_AS(fit_ppl(cohort, strict), FitError);

  KernelConfig lenient = strict;
  lenient.zero_denominator_policy = ZeroDenominatorPolicy::drop_term;
  RateModelFit fit = fit_ppl(cohort, lenient);
  CHECK(fit.converged);
  CHECK(fit.dropped_event_terms == 1);
}

TEST_CASE("smoothed baseline curve is reproducible point by point") {
  Cohort cohort = sim_cohort(100);
  HistoryFeatureSpec spec = simulation_history_spec();
  RateModelFit fit = fit_proposed(cohort, spec, sim_kernel());

  REQUIRE(!fit.baseline_cumulative.empty());
  CHECK(fit.baseline_cumulative.front().first == 0.0);
  CHECK(fit.baseline_cumulative.front().second == 0.0);
  for (std::size_t k = 1; k < fit.baseline_cumulative.size(); ++k)
    CHECK(fit.baseline_cumulative[k].second >= fit.baseline_cumulative[k - 1].second);

  for (double frac : {0.1, 0.2, 0.4, 0.7, 1.0}) {
    const double t = frac * cohort.tau();
    CHECK(baseline_cumulative_proposed(cohort, spec, fit, sim_kernel(), t) ==
          doctest::Approx(baseline_cumulative_at(fit, t)).epsilon(1e-10));
  }
}

TEST_CASE("named subsets select event-model columns") {
  Cohort cohort = sim_cohort(100);
  RateModelFit fit = fit_ppl(cohort, sim_kernel(), {}, {"Z1"});
  CHECK(fit.coefficient_names == std::vector<std::string>{"Z1"});
  CHECK(fit.beta_hat.size() == 1);
  CHECK(fit.converged);
}
