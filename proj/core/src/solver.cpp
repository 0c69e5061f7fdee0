#include "recur/solver.hpp"

#include <cmath>
#include <string>
#include <utility>

namespace recur {

double sup_norm(const Vector& v) { return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff(); }

ScoreRootResult solve_estimating_equation(
    Eigen::Index p, const SolverConfig& solver,
    const std::function<ScoreFunctionEval(const Vector&)>& eval) {
  solver.validate();
  Vector x = Vector::Zero(p);
  if (solver.initial.size() > 0) {
    if (solver.initial.size() != p)
      throw ConfigError("solver initial vector has length " + std::to_string(solver.initial.size()) +
                        ", expected " + std::to_string(p));
    x = solver.initial;
  }

  ScoreFunctionEval ev = eval(x);
  ScoreRootResult res;
  for (int iter = 0; iter < solver.max_iterations; ++iter) {
    const double norm = sup_norm(ev.u);
    if (norm < solver.tolerance) break;

    Eigen::FullPivLU<Matrix> lu(ev.jac);
    if (!lu.isInvertible()) {
      // finite-difference Jacobian retry
      Matrix fd(p, p);
      for (Eigen::Index j = 0; j < p; ++j) {
        const double step = 1e-5 * (1.0 + std::abs(x[j]));
        Vector hi = x, lo = x;
        hi[j] += step;
        lo[j] -= step;
        fd.col(j) = (eval(hi).u - eval(lo).u) / (2.0 * step);
      }
      lu.compute(fd);
      if (!lu.isInvertible())
        throw FitError("singular Jacobian at iteration " + std::to_string(iter));
    }
    Vector direction = lu.solve(-ev.u);

    bool accepted = false;
    Vector step = direction;
    for (int half = 0; half <= solver.max_step_halvings; ++half) {
      ScoreFunctionEval cand = eval(x + step);
      if (sup_norm(cand.u) < norm) {
        x += step;
        ev = std::move(cand);
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    ++res.iterations;
    if (!accepted)
      throw FitError("step halving failed to reduce the score norm at iteration " +
                     std::to_string(iter) + " (score norm " + std::to_string(norm) + ")");
  }

  if (!(sup_norm(ev.u) < solver.tolerance))
    throw FitError("did not converge within " + std::to_string(solver.max_iterations) +
                   " iterations (score norm " + std::to_string(sup_norm(ev.u)) + ")");
  res.x = x;
  res.score_norm = sup_norm(ev.u);
  res.dropped = ev.dropped;
  return res;
}

}  // namespace recur
