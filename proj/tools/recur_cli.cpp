// recur: proportional rate models for recurrent events with
// visit-driven covariate observation.
//
//   recur fit       --subjects s.csv --visits v.csv [--config c.json] [...]
//   recur bootstrap --subjects s.csv --visits v.csv --replicates B [...]
//   recur simulate  --scenario II --n 200 --reps 200 [...]
//
// Results are JSON documents (fit/bootstrap) or CSV tables (simulate).

#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "recur/analysis.hpp"
#include "recur/csv.hpp"
#include "recur/parallel.hpp"
#include "recur/simulate.hpp"

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

std::string iso_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path);
  if (!out) throw recur::ConfigError("cannot open output file '" + path + "'");
  out << text;
}

std::string dump_doc(ordered_json doc) {
  doc["generated_at"] = iso_timestamp();
  return doc.dump(2) + "\n";
}

// shared data/config flags of `fit` and `bootstrap`
struct FitArgs {
  std::string subjects_path, visits_path, config_path, out_path, curves_path;
  std::string method;
  std::vector<std::string> event_covariates;
  std::optional<double> tau, bandwidth_c, bandwidth_nu, fixed_bandwidth;
  std::optional<int> bootstrap_B;
  std::optional<std::uint64_t> seed;
  int threads = 1;
};

void add_fit_flags(CLI::App* cmd, FitArgs& args) {
  cmd->add_option("--subjects", args.subjects_path, "subjects CSV (subject_id,censor_time,...)")
      ->required();
  cmd->add_option("--visits", args.visits_path, "visits CSV (subject_id,time,kind,...)")
      ->required();
  cmd->add_option("--config", args.config_path, "analysis config JSON");
  cmd->add_option("--method", args.method, "proposed | ppl | locf | disjoint");
  cmd->add_option("--event-covariates", args.event_covariates,
                  "visit covariates entering the event model (default: all)");
  cmd->add_option("--tau", args.tau, "follow-up truncation time");
  cmd->add_option("--bandwidth-c", args.bandwidth_c, "bandwidth rule constant (h = c*n^-nu)");
  cmd->add_option("--bandwidth-nu", args.bandwidth_nu, "bandwidth rule exponent");
  cmd->add_option("--fixed-bandwidth", args.fixed_bandwidth, "fixed kernel bandwidth");
  cmd->add_option("--seed", args.seed, "bootstrap seed");
  cmd->add_option("--threads", args.threads, "bootstrap worker threads");
  cmd->add_option("--out", args.out_path, "result JSON path (default: stdout)");
  cmd->add_option("--curves", args.curves_path, "also write the baseline cumulative curve CSV");
}

recur::AnalysisConfig build_config(const FitArgs& args) {
  recur::AnalysisConfig config;
  if (!args.config_path.empty()) {
    std::ifstream in(args.config_path);
    if (!in) throw recur::ConfigError("cannot open config file '" + args.config_path + "'");
    json j;
    try {
      in >> j;
    } catch (const json::exception& e) {
      throw recur::ConfigError("config file '" + args.config_path + "': " + e.what());
    }
    config = recur::parse_analysis_config(j);
  }
  if (!args.method.empty()) config.method = args.method;
  if (!args.event_covariates.empty()) config.event_covariates = args.event_covariates;
  if (args.tau) config.tau = args.tau;
  if (args.fixed_bandwidth) {
    config.kernel.bandwidth = recur::Bandwidth::fixed(*args.fixed_bandwidth);
  } else if (args.bandwidth_c || args.bandwidth_nu) {
    recur::Bandwidth rule = config.kernel.bandwidth.is_fixed
                                ? recur::Bandwidth::rule(2.0, 1.0 / 3.0)
                                : config.kernel.bandwidth;
    if (args.bandwidth_c) rule.c = *args.bandwidth_c;
    if (args.bandwidth_nu) rule.nu = *args.bandwidth_nu;
    rule.is_fixed = false;
    config.kernel.bandwidth = rule;
  }
  if (args.bootstrap_B) config.bootstrap_B = *args.bootstrap_B;
  if (args.seed) config.seed = *args.seed;
  config.validate();
  return config;
}

void write_curves_csv(const ordered_json& doc, const std::string& path) {
  if (path.empty()) return;
  const auto& result = doc.at("result");
  if (!result.contains("baseline_cumulative"))
    throw recur::ConfigError("--curves: this method reports no baseline cumulative curve");
  std::ostringstream out;
  out << "time,baseline_cumulative\n";
  for (const auto& point : result.at("baseline_cumulative"))
    out << recur::format_double(point.at(0).get<double>()) << ','
        << recur::format_double(point.at(1).get<double>()) << '\n';
  write_text(path, out.str());
}

void write_replicates_csv(const ordered_json& doc, const std::string& path) {
  if (path.empty()) return;
  const auto& result = doc.at("result");
  const auto& boot = result.at("bootstrap");
  std::ostringstream out;
  out << "replicate";
  for (const auto& coef : result.at("coefficients"))
    out << ',' << coef.at("name").get<std::string>();
  out << ",failure\n";
  const auto& reps = boot.at("replicates");
  for (std::size_t r = 0; r < reps.size(); ++r) {
    out << r;
    if (reps[r].is_null()) {
      for (std::size_t j = 0; j < result.at("coefficients").size(); ++j) out << ',';
      std::string reason = "failed";
      for (const auto& f : boot.at("failures"))
        if (f.at("replicate").get<std::size_t>() == r) reason = f.at("reason").get<std::string>();
      out << ',' << reason << '\n';
    } else {
      for (const auto& value : reps[r]) out << ',' << recur::format_double(value.get<double>());
      out << ",\n";
    }
  }
  write_text(path, out.str());
}

int run_fit_command(const FitArgs& args, bool is_bootstrap, const std::string& replicates_csv) {
  recur::AnalysisConfig config = build_config(args);
  if (is_bootstrap && config.bootstrap_B < 2)
    throw recur::ConfigError("bootstrap: --replicates must be at least 2");
  recur::Cohort cohort = recur::load_cohort(args.subjects_path, args.visits_path, config.tau);
  ordered_json doc = recur::run_analysis(cohort, config, args.threads, is_bootstrap);
  write_text(args.out_path, dump_doc(doc));
  write_curves_csv(doc, args.curves_path);
  if (is_bootstrap) write_replicates_csv(doc, replicates_csv);
  return 0;
}

struct SimulateArgs {
  std::string scenario = "I";
  std::optional<int> n, reps;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> methods = {"proposed"};
  int bootstrap_B = 0;
  int threads = 1;
  std::optional<double> tau, bandwidth_c, bandwidth_nu, fixed_bandwidth;
  std::string out_path;
  std::optional<int> dump_rep;
  std::string dump_subjects, dump_visits;
};

int run_simulate_command(const SimulateArgs& args) {
  recur::ScenarioConfig config = recur::scenario_preset(args.scenario);
  if (args.n) config.n = *args.n;
  if (args.reps) config.reps = *args.reps;
  if (args.seed) config.seed = *args.seed;
  if (args.tau) config.tau = args.tau;
  if (args.fixed_bandwidth)
    config.kernel.bandwidth = recur::Bandwidth::fixed(*args.fixed_bandwidth);
  if (args.bandwidth_c) config.kernel.bandwidth.c = *args.bandwidth_c;
  if (args.bandwidth_nu) config.kernel.bandwidth.nu = *args.bandwidth_nu;

  if (args.dump_rep) {
    if (args.dump_subjects.empty() || args.dump_visits.empty())
      throw recur::ConfigError("--dump-rep needs --dump-subjects and --dump-visits paths");
    const recur::SimulatedCohort simulated = recur::generate_cohort(config, *args.dump_rep);
    recur::save_cohort(simulated.cohort, args.dump_subjects, args.dump_visits);
  }

  const recur::ScenarioRun run =
      recur::run_scenario(config, args.methods, args.bootstrap_B, args.threads);
  std::ostringstream out;
  recur::write_summary_csv(recur::summarize(run), out);
  write_text(args.out_path, out.str());
  return 0;
}

ordered_json error_doc(const char* type, const std::string& message) {
  ordered_json doc;
  doc["error"] = ordered_json{{"type", type}, {"message", message}};
  return doc;
}

// best effort: put the machine-readable error where the result would have gone
void report_error(const std::string& out_path, const char* type, const std::string& message) {
  std::cerr << "error (" << type << "): " << message << "\n";
  if (!out_path.empty() && out_path != "-") {
    std::ofstream out(out_path);
    if (out) out << error_doc(type, message).dump(2) << "\n";
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"proportional rate models for recurrent events with visit-driven covariates"};
  app.require_subcommand(1);

  FitArgs fit_args;
  CLI::App* fit_cmd = app.add_subcommand("fit", "fit an event rate model to cohort CSV files");
  add_fit_flags(fit_cmd, fit_args);
  fit_cmd->add_option("--bootstrap-B", fit_args.bootstrap_B,
                      "bootstrap replicates for se / intervals (0 = off)");

  FitArgs boot_args;
  CLI::App* boot_cmd =
      app.add_subcommand("bootstrap", "fit plus bootstrap with the replicate draws retained");
  add_fit_flags(boot_cmd, boot_args);
  std::string replicates_csv;
  boot_cmd->add_option("--replicates", boot_args.bootstrap_B, "number of bootstrap replicates")
      ->required();
  boot_cmd->add_option("--replicates-csv", replicates_csv, "dump replicate estimates as CSV");

  SimulateArgs sim_args;
  CLI::App* sim_cmd =
      app.add_subcommand("simulate", "replicated experiments on generated cohorts");
  sim_cmd->add_option("--scenario", sim_args.scenario,
                      "preset: I..X, GammaShift, Disjoint (default I)");
  sim_cmd->add_option("--n", sim_args.n, "subjects per replicate");
  sim_cmd->add_option("--reps", sim_args.reps, "number of replicates");
  sim_cmd->add_option("--seed", sim_args.seed, "master seed");
  sim_cmd->add_option("--methods", sim_args.methods,
                      "fitters: proposed ppl locf oracle disjoint (default proposed)");
  sim_cmd->add_option("--bootstrap-B", sim_args.bootstrap_B,
                      "bootstrap replicates per fit for SEE/CP (0 = off)");
  sim_cmd->add_option("--threads", sim_args.threads, "worker threads over replicates");
  sim_cmd->add_option("--tau", sim_args.tau, "follow-up truncation time");
  sim_cmd->add_option("--bandwidth-c", sim_args.bandwidth_c, "bandwidth rule constant");
  sim_cmd->add_option("--bandwidth-nu", sim_args.bandwidth_nu, "bandwidth rule exponent");
  sim_cmd->add_option("--fixed-bandwidth", sim_args.fixed_bandwidth, "fixed kernel bandwidth");
  sim_cmd->add_option("--out", sim_args.out_path, "summary CSV path (default: stdout)");
  sim_cmd->add_option("--dump-rep", sim_args.dump_rep, "also write one replicate's cohort CSVs");
  sim_cmd->add_option("--dump-subjects", sim_args.dump_subjects, "subjects CSV path for --dump-rep");
  sim_cmd->add_option("--dump-visits", sim_args.dump_visits, "visits CSV path for --dump-rep");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;  // help/version exit cleanly; usage errors are config errors
  }

  const std::string out_path = fit_cmd->parsed()    ? fit_args.out_path
                               : boot_cmd->parsed() ? boot_args.out_path
                                                    : sim_args.out_path;
  try {
    if (fit_cmd->parsed()) return run_fit_command(fit_args, false, "");
    if (boot_cmd->parsed()) return run_fit_command(boot_args, true, replicates_csv);
    if (sim_cmd->parsed()) return run_simulate_command(sim_args);
  } catch (const recur::ConfigError& e) {
    report_error(out_path, "config", e.what());
    return 2;
  } catch (const recur::DataError& e) {
    report_error(out_path, "data", e.what());
    return 2;
  } catch (const recur::FitError& e) {
    report_error(out_path, "fit", e.what());
    return 1;
  } catch (const std::exception& e) {
    report_error(out_path, "internal", e.what());
    return 1;
  }
  return 2;
}
