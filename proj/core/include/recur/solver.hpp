#pragma once

#include <functional>

#include "recur/common.hpp"

namespace recur {

// Damped-Newton controls shared by every estimating-equation solver.
struct SolverConfig {
  double tolerance = 1e-8;     // sup-norm of the estimating function at the solution
  int max_iterations = 50;
  int max_step_halvings = 20;
  Vector initial;              // starting coefficients; empty = zeros

  void validate() const {
    if (!(tolerance > 0.0)) throw ConfigError("solver: tolerance must be positive");
    if (max_iterations < 1) throw ConfigError("solver: max_iterations must be at least 1");
    if (max_step_halvings < 0) throw ConfigError("solver: max_step_halvings must be nonnegative");
  }
};

double sup_norm(const Vector& v);

// One evaluation of an estimating function: value, Jacobian ∂u/∂x (possibly
// rectangular when x includes nuisance coordinates), and how many terms the
// drop_term policy removed.
struct ScoreFunctionEval {
  Vector u;
  Matrix jac;
  int dropped = 0;
};

struct ScoreRootResult {
  Vector x;
  double score_norm = 0.0;
  int iterations = 0;
  int dropped = 0;
};

// Newton with step-halving on the score sup-norm.  A singular analytic
// Jacobian triggers a central finite-difference retry (step 1e−5·(1+|x_j|))
// before failing.  Throws FitError when the norm cannot be reduced or the
// iteration budget runs out.
ScoreRootResult solve_estimating_equation(
    Eigen::Index p, const SolverConfig& solver,
    const std::function<ScoreFunctionEval(const Vector&)>& eval);

}  // namespace recur
