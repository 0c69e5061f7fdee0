#include "recur/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_map>

#include "recur/bootstrap.hpp"
#include "recur/csv.hpp"
#include "recur/parallel.hpp"
#include "recur/smoothing.hpp"

namespace recur {

void ScenarioConfig::validate() const {
  if (n < 2) throw ConfigError("scenario: n must be at least 2");
  if (reps < 1) throw ConfigError("scenario: reps must be at least 1");
  if (!(censor_max > 0.0)) throw ConfigError("scenario: censor_max must be positive");
  if (censor_fixed && !(*censor_fixed > 0.0))
    throw ConfigError("scenario: censor_fixed must be positive");
  if (!(frailty_mean > 0.0)) throw ConfigError("scenario: frailty_mean must be positive");
  if (frailty_variance < 0.0) throw ConfigError("scenario: frailty_variance must be nonnegative");
  if (!(lambda20 > 0.0)) throw ConfigError("scenario: lambda20 must be positive");
  if (tau && !(*tau > 0.0)) throw ConfigError("scenario: tau must be positive");
}

namespace {

double renewal_state(int initial, const std::vector<double>& jumps, double t) {
  const auto flips = std::upper_bound(jumps.begin(), jumps.end(), t) - jumps.begin();
  return static_cast<double>((initial + flips) % 2);
}

}  // namespace

double SubjectTruth::z2(double t) const { return renewal_state(z2_0, z2_jumps, t); }
double SubjectTruth::w(double t) const { return renewal_state(w_0, w_jumps, t); }

namespace {

// Exp(ξ)-sojourn transition times of a 0/1 renewal process on (0, horizon].
std::vector<double> draw_renewal_jumps(double xi, double horizon, RandomStream& stream) {
  std::vector<double> jumps;
  double t = 0.0;
  for (;;) {
    t += stream.exponential(xi);
    if (t > horizon) break;
    jumps.push_back(t);
  }
  return jumps;
}

double draw_frailty(const ScenarioConfig& config, RandomStream& stream) {
  if (config.frailty_variance == 0.0) return config.frailty_mean;
  const double shape = config.frailty_mean * config.frailty_mean / config.frailty_variance;
  const double scale = config.frailty_variance / config.frailty_mean;
  return stream.gamma(shape, scale);
}

}  // namespace

std::vector<double> thinning_sample(const std::function<double(double)>& intensity, double bound,
                                    double horizon, RandomStream& stream) {
  if (!(bound >= 0.0)) throw ConfigError("thinning: bound must be nonnegative");
  if (!(horizon >= 0.0)) throw ConfigError("thinning: horizon must be nonnegative");
  std::vector<double> points;
  if (bound == 0.0 || horizon == 0.0) return points;
  double t = 0.0;
  for (;;) {
    t += stream.exponential(bound);
    if (t > horizon) break;
    const double lambda = intensity(t);
    if (lambda > bound * (1.0 + 1e-12))
      throw DataError("thinning: intensity " + std::to_string(lambda) + " exceeds bound " +
                      std::to_string(bound) + " at t=" + std::to_string(t));
    if (stream.uniform() * bound < lambda) points.push_back(t);
  }
  return points;
}

SimulatedCohort generate_cohort(const ScenarioConfig& config, int rep_index) {
  config.validate();
  RandomStream stream(derive_seed(config.seed, static_cast<std::uint64_t>(rep_index), 2));

  std::vector<std::string> baseline_names = {"Z1", "Z2_0", "Z3_0"};
  std::vector<std::string> visit_names = {"Z1", "Z2", "Z3"};
  if (config.with_w_process) {
    baseline_names.push_back("W_0");
    visit_names.push_back("W");
  }

  std::vector<Subject> subjects;
  subjects.reserve(static_cast<std::size_t>(config.n));
  std::vector<SubjectTruth> truths;
  truths.reserve(static_cast<std::size_t>(config.n));
  std::vector<std::vector<DgpVisitState>> dgp;
  dgp.reserve(static_cast<std::size_t>(config.n));

  for (int i = 0; i < config.n; ++i) {
    SubjectTruth tr;
    tr.censor = config.censor_fixed ? *config.censor_fixed : stream.uniform(0.0, config.censor_max);
    if (tr.censor <= 0.0) tr.censor = std::numeric_limits<double>::min();
    tr.z1 = stream.uniform(-0.5, 0.5);
    tr.z2_0 = stream.bernoulli(0.5) ? 1 : 0;
    tr.xi = draw_frailty(config, stream);
    tr.z2_jumps = draw_renewal_jumps(tr.xi, tr.censor, stream);
    tr.w1 = stream.uniform(0.0, 2.0 * SubjectTruth::kPi);
    tr.w2 = stream.uniform(0.0, 2.0 * SubjectTruth::kPi);
    if (config.with_w_process) {
      tr.w_0 = stream.bernoulli(0.5) ? 1 : 0;
      tr.xi_w = draw_frailty(config, stream);
      tr.w_jumps = draw_renewal_jumps(tr.xi_w, tr.censor, stream);
    }

    const double C = tr.censor;
    auto event_intensity = [&](double t) {
      return t * std::exp(config.beta_B * tr.z1 + config.beta_T1 * tr.z2(t) +
                          config.beta_T2 * tr.z3(t) + config.gamma1 * tr.latent(t) - 1.0);
    };
    // state of the recorded history: the value of each tracked covariate at
    // the latest visit of either kind (initial values before the first)
    double x2 = static_cast<double>(tr.z2_0);
    double x3 = tr.z3(0.0);
    auto visit_intensity = [&](double t) {
      double eta = config.alpha1 * tr.z1 + config.alpha2 * x2 + config.alpha3 * x3 +
                   config.alpha4 * tr.z2(t) + config.alpha5 * tr.z3(t) +
                   config.gamma2 * tr.latent(t);
      if (config.with_w_process) eta += config.theta_W * tr.w(t);
      return config.lambda20 * std::exp(eta);
    };
    const double event_bound =
        C * std::exp(config.beta_B * tr.z1 + std::max(0.0, config.beta_T1) +
                     std::abs(config.beta_T2) + std::abs(config.gamma1) - 1.0);
    auto visit_bound = [&]() {
      double eta = config.alpha1 * tr.z1 + config.alpha2 * x2 + config.alpha3 * x3 +
                   std::max(0.0, config.alpha4) + std::abs(config.alpha5) +
                   std::abs(config.gamma2);
      if (config.with_w_process) eta += std::max(0.0, config.theta_W);
      return config.lambda20 * std::exp(eta);
    };

    // the two processes are coupled through the recorded history, so they are
    // generated jointly: exponential proposals at the combined bound, each
    // classified as event / non-event / rejection; the history state and the
    // visit bound refresh after every accepted visit
    std::vector<Visit> visits;
    std::vector<DgpVisitState> states;
    double vb = visit_bound();
    double t = 0.0;
    for (;;) {
      t += stream.exponential(event_bound + vb);
      if (t > C) break;
      const double lam_event = event_intensity(t);
      const double lam_visit = visit_intensity(t);
      if (lam_event > event_bound * (1.0 + 1e-12) || lam_visit > vb * (1.0 + 1e-12))
        throw DataError("scenario '" + config.name + "': intensity exceeds its envelope at t=" +
                        std::to_string(t));
      const double u = stream.uniform() * (event_bound + vb);
      VisitKind kind;
      if (u < lam_event)
        kind = VisitKind::event;
      else if (u < lam_event + lam_visit)
        kind = VisitKind::nonevent;
      else
        continue;

      states.push_back({t, kind, x2, x3});
      Vector snapshot(static_cast<Eigen::Index>(visit_names.size()));
      snapshot[0] = tr.z1;
      snapshot[1] = tr.z2(t);
      snapshot[2] = tr.z3(t);
      if (config.with_w_process) snapshot[3] = tr.w(t);
      visits.push_back({t, kind, std::move(snapshot)});
      x2 = tr.z2(t);
      x3 = tr.z3(t);
      vb = visit_bound();
    }

    Subject s;
    s.id = "s" + std::to_string(i + 1);
    s.censor_time = C;
    s.baseline.resize(static_cast<Eigen::Index>(baseline_names.size()));
    s.baseline[0] = tr.z1;
    s.baseline[1] = static_cast<double>(tr.z2_0);
    s.baseline[2] = tr.z3(0.0);
    if (config.with_w_process) s.baseline[3] = static_cast<double>(tr.w_0);
    s.visits = std::move(visits);

    subjects.push_back(std::move(s));
    truths.push_back(std::move(tr));
    dgp.push_back(std::move(states));
  }

  const double tau = config.tau ? *config.tau : config.censor_max;
  return SimulatedCohort{Cohort(std::move(subjects), baseline_names, visit_names, tau),
                         std::move(truths), std::move(dgp)};
}

ScenarioConfig scenario_preset(const std::string& name) {
  ScenarioConfig c;
  c.name = name;
  auto set = [&](double a1, double a2, double a3, double a4, double a5, double g1, double g2) {
    c.alpha1 = a1;
    c.alpha2 = a2;
    c.alpha3 = a3;
    c.alpha4 = a4;
    c.alpha5 = a5;
    c.gamma1 = g1;
    c.gamma2 = g2;
  };
  if (name == "I")
    set(0, 0, 0, 0, 0, 0, 0);
  else if (name == "II")
    set(-0.5, -0.5, 0.5, 0, 0, 0, 0);
  else if (name == "III")
    set(-1, -1, 1, 0, 0, 0, 0);
  else if (name == "IV")
    set(0, 0, 0, 0, 0, 1, 1);
  else if (name == "V")
    set(-0.5, -0.5, 0.5, 0, 0, 1, 1);
  else if (name == "VI")
    set(-1, -1, 1, 0, 0, 1, 1);
  else if (name == "VII")
    set(-1, -1, 0.5, 0, 0.5, 1, 1);
  else if (name == "VIII")
    set(-1, -0.5, 1, -0.5, 0, 1, 1);
  else if (name == "IX")
    set(-1, -0.5, 0.5, -0.5, 0.5, 1, 1);
  else if (name == "X")
    set(-1, 0, 0, -0.5, 0.5, 1, 1);
  else if (name == "GammaShift")
    // visit intensity exp{0.5·Z1 + 0.5·Z2(t) + 0.5·Z3(t)}: current covariate
    // values only, so the plain kernel estimator's limit is the event
    // coefficients minus 0.5 each
    set(0.5, 0, 0, 0.5, 0.5, 0, 0);
  else if (name == "Disjoint") {
    set(0, 0, 0, 0, 0, 0, 0);
    c.with_w_process = true;
    c.theta_W = -0.5;
    c.n = 400;
  } else {
    throw ConfigError("unknown scenario preset '" + name + "'");
  }
  return c;
}

HistoryFeatureSpec simulation_history_spec() {
  HistoryFeatureSpec spec;
  spec.rules = {HistoryRule::Baseline("Z1"),
                HistoryRule::LastObservedFillFromBaseline("Z2", "Z2_0"),
                HistoryRule::LastObservedFillFromBaseline("Z3", "Z3_0")};
  return spec;
}

LocfOptions simulation_locf_options() {
  LocfOptions options;
  // Z1 is constant, so its baseline value covers subjects with no visits
  options.time0_from_baseline = {{"Z1", "Z1"}, {"Z2", "Z2_0"}, {"Z3", "Z3_0"}};
  return options;
}

namespace {

// truth-path covariate evaluator for the oracle fit; resampled subjects map
// back to the generating subject by the id prefix before '#'
CovariatePath oracle_path(const SimulatedCohort& simulated, const Cohort& cohort,
                          const std::vector<int>& cols) {
  std::unordered_map<std::string, std::size_t> by_id;
  for (std::size_t i = 0; i < simulated.cohort.size(); ++i)
    by_id.emplace(simulated.cohort.subject(i).id, i);

  std::vector<std::size_t> truth_of(cohort.size());
  for (std::size_t i = 0; i < cohort.size(); ++i) {
    std::string id = cohort.subject(i).id;
    const auto cut = id.find('#');
    if (cut != std::string::npos) id.resize(cut);
    const auto it = by_id.find(id);
    if (it == by_id.end())
      throw ConfigError("oracle fit: subject '" + id + "' is not part of the simulated cohort");
    truth_of[i] = it->second;
  }

  // visit columns: 0=Z1, 1=Z2, 2=Z3, 3=W
  return [&simulated, truth_of, cols](std::size_t i, double t) {
    const SubjectTruth& tr = simulated.truth[truth_of[i]];
    Vector z(static_cast<Eigen::Index>(cols.size()));
    for (std::size_t c = 0; c < cols.size(); ++c) {
      switch (cols[c]) {
        case 0: z[static_cast<Eigen::Index>(c)] = tr.z1; break;
        case 1: z[static_cast<Eigen::Index>(c)] = tr.z2(t); break;
        case 2: z[static_cast<Eigen::Index>(c)] = tr.z3(t); break;
        default: z[static_cast<Eigen::Index>(c)] = tr.w(t); break;
      }
    }
    return z;
  };
}

}  // namespace

RateModelFit fit_full_oracle(const SimulatedCohort& simulated, const Cohort& cohort,
                             const SolverConfig& solver, const std::vector<std::string>& z_names) {
  const std::vector<int> cols = resolve_visit_columns(cohort, z_names);
  std::vector<std::string> names;
  names.reserve(cols.size());
  for (int j : cols) names.push_back(cohort.visit_covariates()[j]);
  return fit_with_covariate_paths(cohort, oracle_path(simulated, cohort, cols), names, solver,
                                  RateMethod::full_oracle);
}

namespace {

const std::vector<std::string> kEventCovariates = {"Z1", "Z2", "Z3"};

std::string display_name(const std::string& covariate) {
  if (covariate == "Z1") return "beta_B";
  if (covariate == "Z2") return "beta_T1";
  if (covariate == "Z3") return "beta_T2";
  if (covariate == "W") return "theta_W";
  return covariate;
}

struct MethodPlan {
  std::string name;
  std::vector<std::string> coefficients;
  Vector truth;
  // fit the cohort of one replicate; `simulated` backs the oracle paths
  std::function<Vector(const SimulatedCohort&, const Cohort&)> fit;
};

MethodPlan make_plan(const std::string& method, const ScenarioConfig& config) {
  MethodPlan plan;
  plan.name = method;
  const Vector beta_truth =
      (Vector(3) << config.beta_B, config.beta_T1, config.beta_T2).finished();
  for (const auto& z : kEventCovariates) plan.coefficients.push_back(display_name(z));
  plan.truth = beta_truth;

  const KernelConfig kernel = config.kernel;
  if (method == "proposed") {
    plan.fit = [kernel](const SimulatedCohort&, const Cohort& cohort) {
      return fit_proposed(cohort, simulation_history_spec(), kernel, {}, kEventCovariates)
          .beta_hat;
    };
  } else if (method == "ppl") {
    plan.fit = [kernel](const SimulatedCohort&, const Cohort& cohort) {
      return fit_ppl(cohort, kernel, {}, kEventCovariates).beta_hat;
    };
  } else if (method == "locf") {
    plan.fit = [](const SimulatedCohort&, const Cohort& cohort) {
      return fit_locf(cohort, {}, kEventCovariates, simulation_locf_options()).beta_hat;
    };
  } else if (method == "oracle") {
    plan.fit = [](const SimulatedCohort& simulated, const Cohort& cohort) {
      return fit_full_oracle(simulated, cohort, {}, kEventCovariates).beta_hat;
    };
  } else if (method == "disjoint") {
    if (!config.with_w_process)
      throw ConfigError("method 'disjoint' requires a scenario with the W process");
    plan.coefficients.push_back(display_name("W"));
    plan.truth = (Vector(4) << config.beta_B, config.beta_T1, config.beta_T2, config.theta_W)
                     .finished();
    plan.fit = [kernel](const SimulatedCohort&, const Cohort& cohort) {
      DisjointFit fit = fit_disjoint(cohort, {kEventCovariates, {"W"}}, kernel, {});
      Vector stacked(fit.beta_hat.size() + fit.theta_hat.size());
      stacked << fit.beta_hat, fit.theta_hat;
      return stacked;
    };
  } else {
    throw ConfigError("unknown method '" + method +
                      "' (expected proposed, ppl, locf, oracle or disjoint)");
  }
  return plan;
}

}  // namespace

ScenarioRun run_scenario(const ScenarioConfig& config, const std::vector<std::string>& methods,
                         int bootstrap_B, int threads) {
  config.validate();
  if (methods.empty()) throw ConfigError("run_scenario: no methods requested");
  if (bootstrap_B < 0) throw ConfigError("run_scenario: bootstrap_B must be nonnegative");

  std::vector<MethodPlan> plans;
  plans.reserve(methods.size());
  for (const auto& m : methods) plans.push_back(make_plan(m, config));

  ScenarioRun run;
  run.config = config;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (const auto& plan : plans) {
    MethodReplicates mr;
    mr.method = plan.name;
    mr.coefficients = plan.coefficients;
    mr.truth = plan.truth;
    mr.estimates = Matrix::Constant(config.reps, plan.truth.size(), nan);
    if (bootstrap_B > 0) {
      mr.boot_se = Matrix::Constant(config.reps, plan.truth.size(), nan);
      mr.covered = Matrix::Constant(config.reps, plan.truth.size(), nan);
    }
    mr.failure_reasons.assign(static_cast<std::size_t>(config.reps), "");
    run.methods.push_back(std::move(mr));
  }

  parallel_for(static_cast<std::size_t>(config.reps), threads, [&](std::size_t rep) {
    const SimulatedCohort simulated = generate_cohort(config, static_cast<int>(rep));
    for (std::size_t m = 0; m < plans.size(); ++m) {
      MethodReplicates& mr = run.methods[m];
      try {
        const Vector est = plans[m].fit(simulated, simulated.cohort);
        mr.estimates.row(static_cast<Eigen::Index>(rep)) = est.transpose();
        if (bootstrap_B > 0) {
          const auto& plan = plans[m];
          BootstrapResult boot = bootstrap(
              simulated.cohort,
              [&](const Cohort& resampled) { return plan.fit(simulated, resampled); },
              bootstrap_B, derive_seed(config.seed, rep, 4 + m));
          mr.boot_se.row(static_cast<Eigen::Index>(rep)) = boot.se.transpose();
          for (Eigen::Index j = 0; j < plan.truth.size(); ++j)
            mr.covered(static_cast<Eigen::Index>(rep), j) =
                (boot.ci_normal(j, 0) <= plan.truth[j] && plan.truth[j] <= boot.ci_normal(j, 1))
                    ? 1.0
                    : 0.0;
        }
      } catch (const Error& e) {
        mr.failure_reasons[rep] = e.what();
        mr.estimates.row(static_cast<Eigen::Index>(rep)).setConstant(nan);
        if (bootstrap_B > 0) {
          mr.boot_se.row(static_cast<Eigen::Index>(rep)).setConstant(nan);
          mr.covered.row(static_cast<Eigen::Index>(rep)).setConstant(nan);
        }
      }
    }
  });

  for (auto& mr : run.methods)
    for (const auto& reason : mr.failure_reasons)
      if (!reason.empty()) ++mr.failures;
  return run;
}

std::vector<SummaryRow> summarize(const ScenarioRun& run) {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  std::vector<SummaryRow> rows;
  for (const auto& mr : run.methods) {
    for (Eigen::Index j = 0; j < mr.truth.size(); ++j) {
      SummaryRow row;
      row.scenario = run.config.name;
      row.method = mr.method;
      row.coefficient = mr.coefficients[static_cast<std::size_t>(j)];
      row.failures = mr.failures;

      std::vector<double> est, bse, cov;
      for (Eigen::Index r = 0; r < mr.estimates.rows(); ++r) {
        if (!mr.failure_reasons[static_cast<std::size_t>(r)].empty()) continue;
        est.push_back(mr.estimates(r, j));
        if (mr.boot_se.size() > 0) bse.push_back(mr.boot_se(r, j));
        if (mr.covered.size() > 0) cov.push_back(mr.covered(r, j));
      }

      if (est.empty()) {
        row.bias = row.se = row.see = row.cp = nan;
        rows.push_back(row);
        continue;
      }
      double mean = 0.0;
      for (double v : est) mean += v;
      mean /= static_cast<double>(est.size());
      row.bias = mean - mr.truth[j];
      if (est.size() >= 2) {
        double ss = 0.0;
        for (double v : est) ss += (v - mean) * (v - mean);
        row.se = std::sqrt(ss / (static_cast<double>(est.size()) - 1.0));
      } else {
        row.se = nan;
      }
      auto mean_of = [&](const std::vector<double>& xs) {
        if (xs.empty()) return nan;
        double s = 0.0;
        for (double v : xs) s += v;
        return s / static_cast<double>(xs.size());
      };
      row.see = mean_of(bse);
      row.cp = mean_of(cov);
      rows.push_back(row);
    }
  }
  return rows;
}

void write_summary_csv(const std::vector<SummaryRow>& rows, std::ostream& out) {
  out << "scenario,method,coefficient,bias,se,see,cp,failures\n";
  auto cell = [](double v) { return std::isnan(v) ? std::string() : format_double(v); };
  for (const auto& row : rows) {
    out << row.scenario << ',' << row.method << ',' << row.coefficient << ',' << cell(row.bias)
        << ',' << cell(row.se) << ',' << cell(row.see) << ',' << cell(row.cp) << ','
        << row.failures << '\n';
  }
}

}  // namespace recur
