// Microbenchmarks for the hot paths: cohort generation, windowed kernel
// moments, the visit-model fit, and the event-model fits.
#include <benchmark/benchmark.h>

#include "recur/rate_model.hpp"
#include "recur/simulate.hpp"
#include "recur/smoothing.hpp"
#include "recur/visit_model.hpp"

using namespace recur;

namespace {

ScenarioConfig bench_config(int n) {
  ScenarioConfig config = scenario_preset("II");
  config.n = n;
  config.seed = 42;
  return config;
}

void bm_generate_cohort(benchmark::State& state) {
  const ScenarioConfig config = bench_config(static_cast<int>(state.range(0)));
  int rep = 0;
  for (auto _ : state) {
    SimulatedCohort sim = generate_cohort(config, rep++);
    benchmark::DoNotOptimize(sim.cohort.size());
  }
}
BENCHMARK(bm_generate_cohort)->Arg(200)->Arg(1000);

void bm_smoothed_moments(benchmark::State& state) {
  const ScenarioConfig config = bench_config(static_cast<int>(state.range(0)));
  const Cohort cohort = generate_cohort(config, 0).cohort;
  SmoothingPanel panel =
      build_smoothing_panel(cohort, VisitKind::nonevent, {0, 1, 2}, {0, 1, 2});
  PanelSmoother smoother(std::move(panel), resolve_bandwidth(config.kernel, cohort.size()));
  Vector beta(3);
  beta << -1.0, -1.0, 1.0;
  smoother.set_coefficients(beta);
  double t = 0.5;
  for (auto _ : state) {
    SmoothedMoments m = smoother.moments(t, 2);
    benchmark::DoNotOptimize(m.value());
    t += 0.37;
    if (t > 4.5) t = 0.5;
  }
}
BENCHMARK(bm_smoothed_moments)->Arg(200)->Arg(1000);

void bm_fit_visit_model(benchmark::State& state) {
  const ScenarioConfig config = bench_config(static_cast<int>(state.range(0)));
  const Cohort cohort = generate_cohort(config, 0).cohort;
  const HistoryFeatureSpec spec = simulation_history_spec();
  for (auto _ : state) {
    VisitModelFit fit = fit_visit_model(cohort, spec);
    benchmark::DoNotOptimize(fit.alpha_hat);
  }
}
BENCHMARK(bm_fit_visit_model)->Arg(200)->Arg(1000)->Unit(benchmark::kMillisecond);

void bm_fit_ppl(benchmark::State& state) {
  const ScenarioConfig config = bench_config(static_cast<int>(state.range(0)));
  const Cohort cohort = generate_cohort(config, 0).cohort;
  for (auto _ : state) {
    RateModelFit fit = fit_ppl(cohort, config.kernel);
    benchmark::DoNotOptimize(fit.beta_hat);
  }
}
BENCHMARK(bm_fit_ppl)->Arg(200)->Arg(1000)->Unit(benchmark::kMillisecond);

void bm_fit_proposed(benchmark::State& state) {
  const ScenarioConfig config = bench_config(static_cast<int>(state.range(0)));
  const Cohort cohort = generate_cohort(config, 0).cohort;
  const HistoryFeatureSpec spec = simulation_history_spec();
  for (auto _ : state) {
    RateModelFit fit = fit_proposed(cohort, spec, config.kernel);
    benchmark::DoNotOptimize(fit.beta_hat);
  }
}
BENCHMARK(bm_fit_proposed)->Arg(200)->Arg(1000)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
