#include "recur/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <string>

#include "recur/bootstrap.hpp"
#include "recur/visit_model.hpp"

namespace recur {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

void check_keys(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
  if (!obj.is_object()) throw ConfigError(where + ": expected a JSON object");
  for (const auto& [key, value] : obj.items()) {
    (void)value;
    if (allowed.find(key) == allowed.end())
      throw ConfigError(where + ": unknown key '" + key + "'");
  }
}

double require_number(const json& obj, const char* key, const std::string& where) {
  if (!obj.contains(key)) throw ConfigError(where + ": missing key '" + key + "'");
  if (!obj[key].is_number()) throw ConfigError(where + ": '" + std::string(key) + "' must be a number");
  return obj[key].get<double>();
}

std::string require_string(const json& obj, const char* key, const std::string& where) {
  if (!obj.contains(key) || !obj[key].is_string())
    throw ConfigError(where + ": missing string key '" + std::string(key) + "'");
  return obj[key].get<std::string>();
}

std::vector<std::string> string_list(const json& value, const std::string& where) {
  if (!value.is_array()) throw ConfigError(where + ": expected an array of strings");
  std::vector<std::string> out;
  for (const auto& item : value) {
    if (!item.is_string()) throw ConfigError(where + ": expected an array of strings");
    out.push_back(item.get<std::string>());
  }
  return out;
}

HistoryRule parse_rule(const json& obj, std::size_t index) {
  const std::string where = "history_rules[" + std::to_string(index) + "]";
  const std::string kind = require_string(obj, "kind", where);
  if (kind == "baseline") {
    check_keys(obj, {"kind", "name"}, where);
    return HistoryRule::Baseline(require_string(obj, "name", where));
  }
  if (kind == "any_prior_visit") {
    check_keys(obj, {"kind"}, where);
    return HistoryRule::AnyPriorVisit();
  }
  if (kind == "baseline_x_any_prior") {
    check_keys(obj, {"kind", "name"}, where);
    return HistoryRule::InteractBaselineWithAnyPrior(require_string(obj, "name", where));
  }
  if (kind == "last_observed") {
    check_keys(obj, {"kind", "name", "fill", "fill_baseline"}, where);
    const std::string name = require_string(obj, "name", where);
    const bool has_fill = obj.contains("fill");
    const bool has_fb = obj.contains("fill_baseline");
    if (has_fill == has_fb)
      throw ConfigError(where + ": provide exactly one of 'fill' and 'fill_baseline'");
    if (has_fb) return HistoryRule::LastObservedFillFromBaseline(name, require_string(obj, "fill_baseline", where));
    return HistoryRule::LastObserved(name, require_number(obj, "fill", where));
  }
  if (kind == "last_observed_x_any_prior") {
    check_keys(obj, {"kind", "name"}, where);
    return HistoryRule::InteractLastObservedWithAnyPrior(require_string(obj, "name", where));
  }
  if (kind == "threshold_last_observed") {
    check_keys(obj, {"kind", "name", "cutpoint", "fill"}, where);
    return HistoryRule::ThresholdLastObserved(require_string(obj, "name", where),
                                              require_number(obj, "cutpoint", where),
                                              require_number(obj, "fill", where));
  }
  throw ConfigError(where + ": unknown rule kind '" + kind + "'");
}

ordered_json rule_json(const HistoryRule& rule) {
  ordered_json obj;
  switch (rule.kind) {
    case HistoryRuleKind::baseline:
      obj["kind"] = "baseline";
      obj["name"] = rule.name;
      break;
    case HistoryRuleKind::any_prior_visit:
      obj["kind"] = "any_prior_visit";
      break;
    case HistoryRuleKind::baseline_x_any_prior:
      obj["kind"] = "baseline_x_any_prior";
      obj["name"] = rule.name;
      break;
    case HistoryRuleKind::last_observed:
      obj["kind"] = "last_observed";
      obj["name"] = rule.name;
      if (rule.fill_baseline)
        obj["fill_baseline"] = *rule.fill_baseline;
      else
        obj["fill"] = rule.fill;
      break;
    case HistoryRuleKind::last_observed_x_any_prior:
      obj["kind"] = "last_observed_x_any_prior";
      obj["name"] = rule.name;
      break;
    case HistoryRuleKind::threshold_last_observed:
      obj["kind"] = "threshold_last_observed";
      obj["name"] = rule.name;
      obj["cutpoint"] = rule.cutpoint;
      obj["fill"] = rule.fill;
      break;
  }
  return obj;
}

KernelConfig parse_kernel(const json& obj) {
  const std::string where = "kernel";
  check_keys(obj, {"bandwidth_c", "bandwidth_nu", "fixed_bandwidth", "zero_denominator_policy"},
             where);
  KernelConfig config;
  if (obj.contains("fixed_bandwidth")) {
    if (obj.contains("bandwidth_c") || obj.contains("bandwidth_nu"))
      throw ConfigError("kernel: fixed_bandwidth excludes bandwidth_c / bandwidth_nu");
    config.bandwidth = Bandwidth::fixed(require_number(obj, "fixed_bandwidth", where));
  } else {
    Bandwidth rule = Bandwidth::rule(2.0, 1.0 / 3.0);
    if (obj.contains("bandwidth_c")) rule.c = require_number(obj, "bandwidth_c", where);
    if (obj.contains("bandwidth_nu")) rule.nu = require_number(obj, "bandwidth_nu", where);
    config.bandwidth = rule;
  }
  if (obj.contains("zero_denominator_policy")) {
    const std::string policy = require_string(obj, "zero_denominator_policy", where);
    if (policy == "error")
      config.zero_denominator_policy = ZeroDenominatorPolicy::error;
    else if (policy == "drop_term")
      config.zero_denominator_policy = ZeroDenominatorPolicy::drop_term;
    else
      throw ConfigError("kernel: zero_denominator_policy must be 'error' or 'drop_term'");
  }
  return config;
}

ordered_json kernel_json(const KernelConfig& config) {
  ordered_json obj;
  if (config.bandwidth.is_fixed) {
    obj["fixed_bandwidth"] = config.bandwidth.h;
  } else {
    obj["bandwidth_c"] = config.bandwidth.c;
    obj["bandwidth_nu"] = config.bandwidth.nu;
  }
  obj["zero_denominator_policy"] =
      config.zero_denominator_policy == ZeroDenominatorPolicy::error ? "error" : "drop_term";
  return obj;
}

SolverConfig parse_solver(const json& obj) {
  const std::string where = "solver";
  check_keys(obj, {"tolerance", "max_iterations", "max_step_halvings", "initial"}, where);
  SolverConfig solver;
  if (obj.contains("tolerance")) solver.tolerance = require_number(obj, "tolerance", where);
  if (obj.contains("max_iterations"))
    solver.max_iterations = static_cast<int>(require_number(obj, "max_iterations", where));
  if (obj.contains("max_step_halvings"))
    solver.max_step_halvings = static_cast<int>(require_number(obj, "max_step_halvings", where));
  if (obj.contains("initial")) {
    if (!obj["initial"].is_array()) throw ConfigError("solver: 'initial' must be an array");
    solver.initial.resize(static_cast<Eigen::Index>(obj["initial"].size()));
    Eigen::Index k = 0;
    for (const auto& item : obj["initial"]) {
      if (!item.is_number()) throw ConfigError("solver: 'initial' must contain numbers");
      solver.initial[k++] = item.get<double>();
    }
  }
  solver.validate();
  return solver;
}

ordered_json solver_json(const SolverConfig& solver) {
  ordered_json obj;
  obj["tolerance"] = solver.tolerance;
  obj["max_iterations"] = solver.max_iterations;
  obj["max_step_halvings"] = solver.max_step_halvings;
  if (solver.initial.size() > 0) {
    ordered_json arr = ordered_json::array();
    for (Eigen::Index j = 0; j < solver.initial.size(); ++j) arr.push_back(solver.initial[j]);
    obj["initial"] = arr;
  }
  return obj;
}

ordered_json curve_json(const std::vector<std::pair<double, double>>& curve) {
  ordered_json arr = ordered_json::array();
  for (const auto& [t, value] : curve) arr.push_back(ordered_json::array({t, value}));
  return arr;
}

ordered_json vector_json(const Vector& v) {
  ordered_json arr = ordered_json::array();
  for (Eigen::Index j = 0; j < v.size(); ++j) arr.push_back(v[j]);
  return arr;
}

}  // namespace

void AnalysisConfig::validate() const {
  static const std::set<std::string> methods = {"proposed", "ppl", "locf", "disjoint"};
  if (methods.find(method) == methods.end())
    throw ConfigError("method must be one of proposed, ppl, locf, disjoint (got '" + method + "')");
  if (method == "disjoint") {
    if (!disjoint) throw ConfigError("method 'disjoint' requires the disjoint partition");
  } else if (disjoint) {
    throw ConfigError("the disjoint partition only applies to method 'disjoint'");
  }
  if (bootstrap_B != 0 && bootstrap_B < 2)
    throw ConfigError("bootstrap_B must be 0 (off) or at least 2");
  if (tau && !(*tau > 0.0)) throw ConfigError("tau must be positive");
  solver.validate();
}

AnalysisConfig parse_analysis_config(const json& j) {
  check_keys(j,
             {"event_covariates", "history_rules", "kernel", "tau", "method", "disjoint",
              "locf_fill_from_baseline", "bootstrap_B", "seed", "solver"},
             "config");
  AnalysisConfig config;
  if (j.contains("event_covariates"))
    config.event_covariates = string_list(j["event_covariates"], "event_covariates");
  if (j.contains("history_rules")) {
    if (!j["history_rules"].is_array())
      throw ConfigError("history_rules: expected an array of rule objects");
    std::size_t index = 0;
    for (const auto& rule : j["history_rules"]) config.history.rules.push_back(parse_rule(rule, index++));
  }
  if (j.contains("kernel")) config.kernel = parse_kernel(j["kernel"]);
  if (j.contains("tau")) {
    if (!j["tau"].is_number()) throw ConfigError("tau must be a number");
    config.tau = j["tau"].get<double>();
  }
  if (j.contains("method")) {
    if (!j["method"].is_string()) throw ConfigError("method must be a string");
    config.method = j["method"].get<std::string>();
  }
  if (j.contains("disjoint")) {
    check_keys(j["disjoint"], {"z", "w"}, "disjoint");
    DisjointPartition partition;
    if (j["disjoint"].contains("z")) partition.z_names = string_list(j["disjoint"]["z"], "disjoint.z");
    if (j["disjoint"].contains("w")) partition.w_names = string_list(j["disjoint"]["w"], "disjoint.w");
    config.disjoint = std::move(partition);
  }
  if (j.contains("locf_fill_from_baseline")) {
    const auto& fills = j["locf_fill_from_baseline"];
    if (!fills.is_object())
      throw ConfigError("locf_fill_from_baseline must map visit names to baseline names");
    for (const auto& [visit_name, baseline_name] : fills.items()) {
      if (!baseline_name.is_string())
        throw ConfigError("locf_fill_from_baseline must map visit names to baseline names");
      config.locf.time0_from_baseline.emplace_back(visit_name, baseline_name.get<std::string>());
    }
  }
  if (j.contains("bootstrap_B"))
    config.bootstrap_B = static_cast<int>(require_number(j, "bootstrap_B", "config"));
  if (j.contains("seed")) {
    if (!j["seed"].is_number_integer() && !j["seed"].is_number_unsigned())
      throw ConfigError("seed must be an integer");
    config.seed = j["seed"].get<std::uint64_t>();
  }
  if (j.contains("solver")) config.solver = parse_solver(j["solver"]);
  config.validate();
  return config;
}

ordered_json analysis_config_json(const AnalysisConfig& config) {
  ordered_json j;
  if (!config.event_covariates.empty()) {
    ordered_json arr = ordered_json::array();
    for (const auto& name : config.event_covariates) arr.push_back(name);
    j["event_covariates"] = arr;
  }
  if (!config.history.rules.empty()) {
    ordered_json arr = ordered_json::array();
    for (const auto& rule : config.history.rules) arr.push_back(rule_json(rule));
    j["history_rules"] = arr;
  }
  j["kernel"] = kernel_json(config.kernel);
  if (config.tau) j["tau"] = *config.tau;
  j["method"] = config.method;
  if (config.disjoint) {
    ordered_json z = ordered_json::array(), w = ordered_json::array();
    for (const auto& name : config.disjoint->z_names) z.push_back(name);
    for (const auto& name : config.disjoint->w_names) w.push_back(name);
    j["disjoint"] = ordered_json{{"z", z}, {"w", w}};
  }
  if (!config.locf.time0_from_baseline.empty()) {
    ordered_json fills;
    for (const auto& [visit_name, baseline_name] : config.locf.time0_from_baseline)
      fills[visit_name] = baseline_name;
    j["locf_fill_from_baseline"] = fills;
  }
  if (config.bootstrap_B > 0) j["bootstrap_B"] = config.bootstrap_B;
  j["seed"] = config.seed;
  j["solver"] = solver_json(config.solver);
  return j;
}

namespace {

struct FitProduct {
  Vector estimates;
  std::vector<std::string> names;
  std::vector<std::string> roles;  // "event" / "visit" per coefficient
  ordered_json detail;             // method-specific result fields
};

FitProduct run_fit(const Cohort& cohort, const AnalysisConfig& config) {
  FitProduct out;
  if (config.method == "disjoint") {
    DisjointFit fit = fit_disjoint(cohort, *config.disjoint, config.kernel, config.solver);
    out.estimates.resize(fit.beta_hat.size() + fit.theta_hat.size());
    out.estimates << fit.beta_hat, fit.theta_hat;
    for (const auto& name : fit.z_names) {
      out.names.push_back(name);
      out.roles.push_back("event");
    }
    for (const auto& name : fit.w_names) {
      out.names.push_back(name);
      out.roles.push_back("visit");
    }
    out.detail["score_norms"] = ordered_json::array({fit.beta_score_norm, fit.theta_score_norm});
    out.detail["iterations"] = fit.iterations;
    out.detail["converged"] = fit.converged;
    out.detail["dropped_event_terms"] = fit.dropped_event_terms;
    out.detail["dropped_visit_terms"] = fit.dropped_visit_terms;
    if (fit.collinearity_warning.empty())
      out.detail["collinearity_warning"] = nullptr;
    else
      out.detail["collinearity_warning"] = fit.collinearity_warning;
    return out;
  }

  RateModelFit fit;
  if (config.method == "proposed")
    fit = fit_proposed(cohort, config.history, config.kernel, config.solver,
                       config.event_covariates);
  else if (config.method == "ppl")
    fit = fit_ppl(cohort, config.kernel, config.solver, config.event_covariates);
  else
    fit = fit_locf(cohort, config.solver, config.event_covariates, config.locf);

  out.estimates = fit.beta_hat;
  out.names = fit.coefficient_names;
  out.roles.assign(out.names.size(), "event");
  out.detail["score_norm"] = fit.score_norm;
  out.detail["iterations"] = fit.iterations;
  out.detail["converged"] = fit.converged;
  out.detail["dropped_event_terms"] = fit.dropped_event_terms;
  if (fit.visit_fit) {
    const VisitModelFit& vf = *fit.visit_fit;
    ordered_json vm;
    ordered_json alpha = ordered_json::array();
    for (std::size_t k = 0; k < vf.feature_labels.size(); ++k)
      alpha.push_back(ordered_json{{"name", vf.feature_labels[k]},
                                   {"estimate", vf.alpha_hat[static_cast<Eigen::Index>(k)]}});
    vm["alpha"] = alpha;
    vm["score_norm"] = vf.score_norm;
    vm["iterations"] = vf.iterations;
    vm["converged"] = vf.converged;
    vm["log_pseudo_likelihood"] = vf.log_pseudo_likelihood;
    vm["baseline_rate"] = curve_json(vf.baseline_grid);
    out.detail["visit_model"] = vm;
  }
  out.detail["baseline_cumulative"] = curve_json(fit.baseline_cumulative);
  return out;
}

Vector fit_estimates_only(const Cohort& cohort, const AnalysisConfig& config) {
  if (config.method == "disjoint") {
    DisjointFit fit = fit_disjoint(cohort, *config.disjoint, config.kernel, config.solver);
    Vector stacked(fit.beta_hat.size() + fit.theta_hat.size());
    stacked << fit.beta_hat, fit.theta_hat;
    return stacked;
  }
  if (config.method == "proposed")
    return fit_proposed(cohort, config.history, config.kernel, config.solver,
                        config.event_covariates)
        .beta_hat;
  if (config.method == "ppl")
    return fit_ppl(cohort, config.kernel, config.solver, config.event_covariates).beta_hat;
  return fit_locf(cohort, config.solver, config.event_covariates, config.locf).beta_hat;
}

}  // namespace

ordered_json run_analysis(const Cohort& cohort, const AnalysisConfig& config, int threads,
                          bool include_replicates) {
  config.validate();

  // an explicit tau in the config overrides the cohort's
  const Cohort* data = &cohort;
  std::optional<Cohort> retruncated;
  if (config.tau && *config.tau != cohort.tau()) {
    retruncated.emplace(cohort.subjects(), cohort.baseline_covariates(), cohort.visit_covariates(),
                        *config.tau);
    data = &*retruncated;
  }

  FitProduct fit = run_fit(*data, config);

  ordered_json doc;
  doc["tool"] = ordered_json{{"name", "recur"}, {"version", kVersion}};
  doc["config"] = analysis_config_json(config);

  ordered_json result;
  result["method"] = config.method;
  result["n_subjects"] = data->size();
  result["tau"] = data->tau();
  result["bandwidth"] = resolve_bandwidth(config.kernel, data->size());
  result["n_event_visits"] = data->count_visits(VisitKind::event, data->tau());
  result["n_nonevent_visits"] = data->count_visits(VisitKind::nonevent, data->tau());

  std::optional<BootstrapResult> boot;
  if (config.bootstrap_B > 0) {
    const AnalysisConfig* cfg = &config;
    boot = bootstrap(
        *data, [cfg](const Cohort& c) { return fit_estimates_only(c, *cfg); }, config.bootstrap_B,
        config.seed, threads);
  }

  ordered_json coefficients = ordered_json::array();
  for (std::size_t k = 0; k < fit.names.size(); ++k) {
    ordered_json entry;
    entry["name"] = fit.names[k];
    entry["role"] = fit.roles[k];
    entry["estimate"] = fit.estimates[static_cast<Eigen::Index>(k)];
    if (boot) {
      const auto j = static_cast<Eigen::Index>(k);
      entry["se"] = boot->se[j];
      entry["ci_normal"] = ordered_json::array({boot->ci_normal(j, 0), boot->ci_normal(j, 1)});
      entry["ci_percentile"] =
          ordered_json::array({boot->ci_percentile(j, 0), boot->ci_percentile(j, 1)});
    }
    coefficients.push_back(entry);
  }
  result["coefficients"] = coefficients;
  for (auto& [key, value] : fit.detail.items()) result[key] = value;

  if (boot) {
    ordered_json b;
    b["B"] = config.bootstrap_B;
    b["n_failed"] = boot->n_failed;
    b["seed"] = config.seed;
    if (include_replicates) {
      ordered_json reps = ordered_json::array();
      for (Eigen::Index r = 0; r < boot->replicates.rows(); ++r) {
        if (!boot->failure_reasons[static_cast<std::size_t>(r)].empty()) {
          reps.push_back(nullptr);
          continue;
        }
        reps.push_back(vector_json(boot->replicates.row(r).transpose()));
      }
      b["replicates"] = reps;
      ordered_json failures = ordered_json::array();
      for (std::size_t r = 0; r < boot->failure_reasons.size(); ++r)
        if (!boot->failure_reasons[r].empty())
          failures.push_back(
              ordered_json{{"replicate", r}, {"reason", boot->failure_reasons[r]}});
      b["failures"] = failures;
    }
    result["bootstrap"] = b;
  }

  doc["result"] = result;
  return doc;
}

}  // namespace recur
