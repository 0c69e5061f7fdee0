#include "recur/csv.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <unordered_map>
#include <vector>

namespace recur {

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    std::size_t comma = line.find(',', start);
    std::string field = line.substr(start, comma == std::string::npos ? comma : comma - start);
    // trim spaces/tabs and a trailing CR from DOS line endings
    std::size_t b = field.find_first_not_of(" \t\r");
    std::size_t e = field.find_last_not_of(" \t\r");
    fields.push_back(b == std::string::npos ? std::string() : field.substr(b, e - b + 1));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return fields;
}

[[noreturn]] void fail(const std::string& file, std::size_t line, const std::string& what) {
  throw DataError(file + ":" + std::to_string(line) + ": " + what);
}

double parse_double(const std::string& field, const std::string& file, std::size_t line,
                    const std::string& column) {
  double value = 0.0;
  const char* first = field.data();
  const char* last = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last)
    fail(file, line, "cannot parse '" + field + "' in column '" + column + "' as a number");
  return value;
}

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;  // with source line numbers
  std::vector<std::size_t> lines;
};

Table read_table(std::istream& in, const std::string& file, std::size_t min_columns) {
  Table t;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto fields = split_line(line);
    if (t.header.empty()) {
      if (fields.size() < min_columns)
        fail(file, lineno, "header has " + std::to_string(fields.size()) +
                               " columns, expected at least " + std::to_string(min_columns));
      t.header = std::move(fields);
    } else {
      if (fields.size() != t.header.size())
        fail(file, lineno, "row has " + std::to_string(fields.size()) + " fields, header has " +
                               std::to_string(t.header.size()));
      t.rows.push_back(std::move(fields));
      t.lines.push_back(lineno);
    }
  }
  if (t.header.empty()) fail(file, lineno ? lineno : 1, "missing header");
  return t;
}

void require_column(const Table& t, std::size_t index, const std::string& name,
                    const std::string& file) {
  if (t.header[index] != name)
    fail(file, 1, "column " + std::to_string(index + 1) + " must be '" + name + "', found '" +
                      t.header[index] + "'");
}

}  // namespace

Cohort load_cohort(std::istream& subjects_in, std::istream& visits_in, std::optional<double> tau,
                   const std::string& subjects_name, const std::string& visits_name) {
  Table st = read_table(subjects_in, subjects_name, 2);
  require_column(st, 0, "subject_id", subjects_name);
  require_column(st, 1, "censor_time", subjects_name);
  std::vector<std::string> baseline_names(st.header.begin() + 2, st.header.end());

  Table vt = read_table(visits_in, visits_name, 3);
  require_column(vt, 0, "subject_id", visits_name);
  require_column(vt, 1, "time", visits_name);
  require_column(vt, 2, "kind", visits_name);
  std::vector<std::string> visit_names(vt.header.begin() + 3, vt.header.end());

  std::vector<Subject> subjects;
  subjects.reserve(st.rows.size());
  std::unordered_map<std::string, std::size_t> index_of;
  for (std::size_t r = 0; r < st.rows.size(); ++r) {
    const auto& row = st.rows[r];
    Subject s;
    s.id = row[0];
    if (s.id.empty()) fail(subjects_name, st.lines[r], "empty subject_id");
    s.censor_time = parse_double(row[1], subjects_name, st.lines[r], "censor_time");
    s.baseline.resize(static_cast<Eigen::Index>(baseline_names.size()));
    for (std::size_t j = 0; j < baseline_names.size(); ++j)
      s.baseline[static_cast<Eigen::Index>(j)] =
          parse_double(row[2 + j], subjects_name, st.lines[r], baseline_names[j]);
    if (!index_of.emplace(s.id, subjects.size()).second)
      fail(subjects_name, st.lines[r], "duplicate subject_id '" + s.id + "'");
    subjects.push_back(std::move(s));
  }

  for (std::size_t r = 0; r < vt.rows.size(); ++r) {
    const auto& row = vt.rows[r];
    auto it = index_of.find(row[0]);
    if (it == index_of.end())
      fail(visits_name, vt.lines[r], "visit for unknown subject_id '" + row[0] + "'");
    Visit v;
    v.time = parse_double(row[1], visits_name, vt.lines[r], "time");
    if (row[2] == "event")
      v.kind = VisitKind::event;
    else if (row[2] == "nonevent")
      v.kind = VisitKind::nonevent;
    else
      fail(visits_name, vt.lines[r], "kind must be 'event' or 'nonevent', found '" + row[2] + "'");
    v.covariates.resize(static_cast<Eigen::Index>(visit_names.size()));
    for (std::size_t j = 0; j < visit_names.size(); ++j)
      v.covariates[static_cast<Eigen::Index>(j)] =
          row[3 + j].empty() ? std::numeric_limits<double>::quiet_NaN()
                             : parse_double(row[3 + j], visits_name, vt.lines[r], visit_names[j]);
    subjects[it->second].visits.push_back(std::move(v));
  }

  try {
    return Cohort(std::move(subjects), std::move(baseline_names), std::move(visit_names), tau);
  } catch (const DataError& e) {
    throw DataError(subjects_name + "/" + visits_name + ": " + e.what());
  }
}

Cohort load_cohort(const std::string& subjects_path, const std::string& visits_path,
                   std::optional<double> tau) {
  std::ifstream subjects(subjects_path);
  if (!subjects) throw DataError("cannot open subjects file '" + subjects_path + "'");
  std::ifstream visits(visits_path);
  if (!visits) throw DataError("cannot open visits file '" + visits_path + "'");
  return load_cohort(subjects, visits, tau, subjects_path, visits_path);
}

std::string format_double(double value) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", value);
  return buf;
}

void save_cohort(const Cohort& cohort, std::ostream& subjects, std::ostream& visits) {
  subjects << "subject_id,censor_time";
  for (const auto& name : cohort.baseline_covariates()) subjects << ',' << name;
  subjects << '\n';
  visits << "subject_id,time,kind";
  for (const auto& name : cohort.visit_covariates()) visits << ',' << name;
  visits << '\n';

  for (const auto& s : cohort.subjects()) {
    subjects << s.id << ',' << format_double(s.censor_time);
    for (Eigen::Index j = 0; j < s.baseline.size(); ++j)
      subjects << ',' << format_double(s.baseline[j]);
    subjects << '\n';
    for (const auto& v : s.visits) {
      visits << s.id << ',' << format_double(v.time) << ',' << to_string(v.kind);
      for (Eigen::Index j = 0; j < v.covariates.size(); ++j) {
        visits << ',';
        if (!std::isnan(v.covariates[j])) visits << format_double(v.covariates[j]);
      }
      visits << '\n';
    }
  }
}

void save_cohort(const Cohort& cohort, const std::string& subjects_path,
                 const std::string& visits_path) {
  std::ofstream subjects(subjects_path);
  if (!subjects) throw DataError("cannot open subjects file '" + subjects_path + "' for writing");
  std::ofstream visits(visits_path);
  if (!visits) throw DataError("cannot open visits file '" + visits_path + "' for writing");
  save_cohort(cohort, subjects, visits);
}

}  // namespace recur
