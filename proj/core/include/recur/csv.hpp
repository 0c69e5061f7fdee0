#pragma once

#include <iosfwd>
#include <optional>
#include <string>

#include "recur/cohort.hpp"

namespace recur {

// Cohort CSV schema (headers required):
//   subjects: subject_id,censor_time,<baseline covariate columns...>
//   visits:   subject_id,time,kind,<visit covariate columns...>   kind: event|nonevent
// Empty visit-covariate cells load as NaN ("not measured"); subjects cells
// must all parse as finite numbers.  Errors carry file name and line number.
Cohort load_cohort(const std::string& subjects_path, const std::string& visits_path,
                   std::optional<double> tau = std::nullopt);
Cohort load_cohort(std::istream& subjects, std::istream& visits,
                   std::optional<double> tau = std::nullopt,
                   const std::string& subjects_name = "subjects",
                   const std::string& visits_name = "visits");

// Inverse of load_cohort; round-trips exactly (doubles written with %.17g).
void save_cohort(const Cohort& cohort, const std::string& subjects_path,
                 const std::string& visits_path);
void save_cohort(const Cohort& cohort, std::ostream& subjects, std::ostream& visits);

// %.17g formatting shared by every CSV writer (round-trip safe).
std::string format_double(double value);

}  // namespace recur
