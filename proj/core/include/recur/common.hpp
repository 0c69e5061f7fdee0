#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace recur {

inline constexpr const char* kVersion = "0.1.0";

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// Base class for everything thrown by this library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input data or violated data invariants (file + line context when parsing).
class DataError : public Error {
 public:
  using Error::Error;
};

// Invalid configuration: bandwidth rules, unknown names, bad flags.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Numerical failure during estimation: singular systems, non-convergence,
// empty risk sets / zero smoothed denominators under the `error` policy.
class FitError : public Error {
 public:
  using Error::Error;
};

}  // namespace recur
