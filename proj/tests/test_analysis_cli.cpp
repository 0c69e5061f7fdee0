#define DOCTEST_CONFIG_IMPLEMENT
#include <doctest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "recur/analysis.hpp"
#include "recur/csv.hpp"
#include "recur/simulate.hpp"

using namespace recur;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

std::string g_cli;          // path to the command-line binary, from --cli=
std::filesystem::path g_dir;  // scratch directory

struct CliResult {
  int exit_code = -1;
  std::string out_text;  // contents of the --out file, if any
};

CliResult run_cli(const std::string& args, const std::string& out_file) {
  const std::string command = g_cli + " " + args + " >" + (g_dir / "stdout.txt").string() +
                              " 2>" + (g_dir / "stderr.txt").string();
  const int status = std::system(command.c_str());
  CliResult result;
  result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  if (!out_file.empty()) {
    std::ifstream in(out_file);
    std::ostringstream text;
    text << in.rdbuf();
    result.out_text = text.str();
  }
  return result;
}

std::string write_file(const std::string& name, const std::string& content) {
  const std::string path = (g_dir / name).string();
  std::ofstream out(path);
  out << content;
  return path;
}

// simulated cohort saved as the CSV pair the tool consumes
struct CsvCohort {
  std::string subjects, visits;
  Cohort cohort;
};

CsvCohort make_csv_cohort(int n = 60) {
  ScenarioConfig config = scenario_preset("II");
  config.n = n;
  Cohort cohort = generate_cohort(config, 0).cohort;
  const std::string subjects = (g_dir / "subjects.csv").string();
  const std::string visits = (g_dir / "visits.csv").string();
  save_cohort(cohort, subjects, visits);
  return {subjects, visits, cohort};
}

const char* kConfigJson = R"({
  "event_covariates": ["Z1", "Z2", "Z3"],
  "history_rules": [
    {"kind": "baseline", "name": "Z1"},
    {"kind": "last_observed", "name": "Z2", "fill_baseline": "Z2_0"},
    {"kind": "last_observed", "name": "Z3", "fill_baseline": "Z3_0"}
  ],
  "kernel": {"zero_denominator_policy": "drop_term"},
  "method": "proposed",
  "seed": 7
})";

AnalysisConfig library_config() {
  return parse_analysis_config(json::parse(kConfigJson));
}

}  // namespace

TEST_CASE("analysis config survives a JSON round trip") {
  AnalysisConfig config;
  config.event_covariates = {"Z1", "Z2"};
  config.history.rules = {HistoryRule::Baseline("Z1"),
                          HistoryRule::AnyPriorVisit(),
                          HistoryRule::InteractBaselineWithAnyPrior("Z1"),
                          HistoryRule::LastObserved("Z2", 0.5),
                          HistoryRule::LastObservedFillFromBaseline("Z2", "Z2_0"),
                          HistoryRule::InteractLastObservedWithAnyPrior("Z2"),
                          HistoryRule::ThresholdLastObserved("Z2", 0.5, 0.0)};
  config.kernel.bandwidth = Bandwidth::fixed(0.75);
  config.kernel.zero_denominator_policy = ZeroDenominatorPolicy::drop_term;
  config.tau = 4.5;
  config.method = "locf";
  config.locf.time0_from_baseline = {{"Z2", "Z2_0"}};
  config.bootstrap_B = 16;
  config.seed = 99;
  config.solver.tolerance = 1e-9;
  config.solver.max_iterations = 33;

  ordered_json once = analysis_config_json(config);
  AnalysisConfig parsed = parse_analysis_config(once);
  ordered_json twice = analysis_config_json(parsed);
  CHECK(once == twice);

  AnalysisConfig rule_form;
  rule_form.kernel.bandwidth = Bandwidth::rule(1.5, 0.3);
  ordered_json rule_json = analysis_config_json(rule_form);
  CHECK(analysis_config_json(parse_analysis_config(rule_json)) == rule_json);
}

TEST_CASE("config parsing rejects malformed documents") {
  auto parse = [](const char* text) { return parse_analysis_config(json::parse(text)); };

  CHECK_THROWS_AS(parse(R"({"methid": "ppl"})"), ConfigError);  // typo fails loudly
  CHECK_THROWS_AS(parse(R"({"method": "nearest"})"), ConfigError);
  CHECK_THROWS_AS(parse(R"({"history_rules": [{"kind": "baseline"}]})"), ConfigError);
  CHECK_THROWS_AS(parse(R"({"history_rules": [{"kind": "baseline", "name": "b", "x": 1}]})"),
                  ConfigError);
  CHECK_THROWS_AS(
      parse(R"({"history_rules": [{"kind": "last_observed", "name": "z", "fill": 0, "fill_baseline": "b"}]})"),
      ConfigError);
  CHECK_THROWS_AS(parse(R"({"kernel": {"fixed_bandwidth": 0.5, "bandwidth_c": 2}})"), ConfigError);
  CHECK_THROWS_AS(parse(R"({"kernel": {"zero_denominator_policy": "ignore"}})"), ConfigError);
  CHECK_THROWS_AS(parse(R"({"bootstrap_B": 1})"), ConfigError);
  CHECK_THROWS_AS(parse(R"({"method": "disjoint"})"), ConfigError);  // partition required
  CHECK_THROWS_AS(parse(R"({"tau": -1})"), ConfigError);
  CHECK_NOTHROW(parse(R"({"method": "ppl"})"));
}

TEST_CASE("run_analysis emits one deterministic document at any thread count") {
  ScenarioConfig scenario = scenario_preset("II");
  scenario.n = 60;
  Cohort cohort = generate_cohort(scenario, 0).cohort;

  AnalysisConfig config = library_config();
  config.bootstrap_B = 16;

  ordered_json serial = run_analysis(cohort, config, 1);
  ordered_json threaded = run_analysis(cohort, config, 3);
  CHECK(serial == threaded);

  const auto& result = serial.at("result");
  CHECK(result.at("method") == "proposed");
  CHECK(result.at("n_subjects") == 60);
  REQUIRE(result.at("coefficients").size() == 3);
  for (const auto& entry : result.at("coefficients")) {
    CHECK(entry.at("role") == "event");
    CHECK(entry.at("estimate").is_number());
    CHECK(entry.at("se").is_number());
    CHECK(entry.at("ci_normal").size() == 2);
    CHECK(entry.at("ci_percentile").size() == 2);
  }
  CHECK(result.at("bootstrap").at("B") == 16);
  CHECK(result.contains("visit_model"));
  const auto& curve = result.at("baseline_cumulative");
  REQUIRE(!curve.empty());
  CHECK(curve.front().at(0) == 0.0);
  CHECK(curve.front().at(1) == 0.0);

  // the unweighted method carries no visit model
  AnalysisConfig plain;
  plain.method = "ppl";
  ordered_json ppl_doc = run_analysis(cohort, plain, 1);
  CHECK_FALSE(ppl_doc.at("result").contains("visit_model"));
}

TEST_CASE("cli fit matches the library result byte for byte") {
  REQUIRE(!g_cli.empty());
  CsvCohort data = make_csv_cohort();
  const std::string config_path = write_file("config.json", kConfigJson);
  const std::string out1 = (g_dir / "fit1.json").string();
  const std::string out2 = (g_dir / "fit2.json").string();

  CliResult first = run_cli("fit --subjects " + data.subjects + " --visits " + data.visits +
                                " --config " + config_path + " --threads 1 --out " + out1,
                            out1);
  REQUIRE(first.exit_code == 0);
  CliResult second = run_cli("fit --subjects " + data.subjects + " --visits " + data.visits +
                                 " --config " + config_path + " --threads 3 --out " + out2,
                             out2);
  REQUIRE(second.exit_code == 0);

  ordered_json doc1 = ordered_json::parse(first.out_text);
  ordered_json doc2 = ordered_json::parse(second.out_text);
  CHECK(doc1.contains("generated_at"));
  doc1.erase("generated_at");
  doc2.erase("generated_at");
  CHECK(doc1 == doc2);

  // the library running the same request produces the identical document
  Cohort cohort = load_cohort(data.subjects, data.visits);
  ordered_json lib = run_analysis(cohort, library_config(), 1);
  CHECK(doc1 == lib);
}

TEST_CASE("cli bootstrap retains replicate draws") {
  REQUIRE(!g_cli.empty());
  CsvCohort data = make_csv_cohort(40);
  const std::string config_path = write_file("config.json", kConfigJson);
  const std::string out = (g_dir / "boot.json").string();

  CliResult run = run_cli("bootstrap --subjects " + data.subjects + " --visits " + data.visits +
                              " --config " + config_path + " --replicates 8 --out " + out,
                          out);
  REQUIRE(run.exit_code == 0);
  ordered_json doc = ordered_json::parse(run.out_text);
  const auto& boot = doc.at("result").at("bootstrap");
  CHECK(boot.at("B") == 8);
  CHECK(boot.at("replicates").size() == 8);
}

TEST_CASE("cli reports typed machine-readable errors") {
  REQUIRE(!g_cli.empty());
  CsvCohort data = make_csv_cohort(40);
  const std::string out = (g_dir / "error.json").string();

  // missing input file: data error, exit 2
  CliResult missing = run_cli("fit --subjects " + (g_dir / "nope.csv").string() + " --visits " +
                                  data.visits + " --out " + out,
                              out);
  CHECK(missing.exit_code == 2);
  CHECK(json::parse(missing.out_text).at("error").at("type") == "data");

  // config typo: config error, exit 2
  const std::string bad_config = write_file("bad.json", R"({"methid": "ppl"})");
  CliResult bad = run_cli("fit --subjects " + data.subjects + " --visits " + data.visits +
                              " --config " + bad_config + " --out " + out,
                          out);
  CHECK(bad.exit_code == 2);
  CHECK(json::parse(bad.out_text).at("error").at("type") == "config");

  // no events in the window: fit error, exit 1
  const std::string empty_subjects = write_file("empty_subjects.csv", "subject_id,censor_time\na,5\n");
  const std::string empty_visits =
      write_file("empty_visits.csv", "subject_id,time,kind,z\na,1,nonevent,0.5\n");
  CliResult unfittable = run_cli(
      "fit --subjects " + empty_subjects + " --visits " + empty_visits + " --method ppl --out " + out,
      out);
  CHECK(unfittable.exit_code == 1);
  CHECK(json::parse(unfittable.out_text).at("error").at("type") == "fit");
}

TEST_CASE("cli simulate writes the summary table") {
  REQUIRE(!g_cli.empty());
  const std::string out = (g_dir / "sim.csv").string();
  CliResult run = run_cli("simulate --scenario I --n 40 --reps 2 --methods ppl --seed 5 --out " + out,
                          out);
  REQUIRE(run.exit_code == 0);
  std::istringstream in(run.out_text);
  std::string header;
  std::getline(in, header);
  CHECK(header == "scenario,method,coefficient,bias,se,see,cp,failures");
  int rows = 0;
  for (std::string line; std::getline(in, line);)
    if (!line.empty()) ++rows;
  CHECK(rows == 3);

  CliResult unknown = run_cli("simulate --scenario nope --n 40 --reps 1 --out " + out, out);
  CHECK(unknown.exit_code == 2);
}

int main(int argc, char** argv) {
  std::vector<char*> forwarded;
  for (int i = 0; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg.rfind("--cli=", 0) == 0) {
      g_cli = arg.substr(6);
      continue;
    }
    forwarded.push_back(argv[i]);
  }
  g_dir = std::filesystem::temp_directory_path() /
          ("recur_cli_test_" + std::to_string(static_cast<long>(getpid())));
  std::filesystem::create_directories(g_dir);

  doctest::Context context;
  context.applyCommandLine(static_cast<int>(forwarded.size()), forwarded.data());
  const int rc = context.run();

  std::error_code ec;
  std::filesystem::remove_all(g_dir, ec);
  return rc;
}
