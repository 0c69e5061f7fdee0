#include "recur/disjoint.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "recur/smoothing.hpp"

namespace recur {

namespace {

// Pearson correlation between two columns of the pooled visit rows; 0 when
// either column is constant (flagged elsewhere as singular if it matters).
double column_correlation(const Matrix& rows, Eigen::Index a, Eigen::Index b) {
  const double n = static_cast<double>(rows.rows());
  if (n < 2) return 0.0;
  const double ma = rows.col(a).mean();
  const double mb = rows.col(b).mean();
  const double va = (rows.col(a).array() - ma).square().sum();
  const double vb = (rows.col(b).array() - mb).square().sum();
  if (!(va > 0.0) || !(vb > 0.0)) return 0.0;
  const double cab = ((rows.col(a).array() - ma) * (rows.col(b).array() - mb)).sum();
  return cab / std::sqrt(va * vb);
}

}  // namespace

DisjointFit fit_disjoint(const Cohort& cohort, const DisjointPartition& partition,
                         const KernelConfig& kernel, const SolverConfig& solver) {
  solver.validate();
  if (partition.z_names.empty() || partition.w_names.empty())
    throw ConfigError("disjoint fit: both covariate lists must be nonempty");
  for (const auto& z : partition.z_names)
    for (const auto& w : partition.w_names)
      if (z == w)
        throw ConfigError("disjoint fit: covariate '" + z + "' appears in both lists");

  const std::vector<int> z_cols = resolve_visit_columns(cohort, partition.z_names);
  const std::vector<int> w_cols = resolve_visit_columns(cohort, partition.w_names);
  std::vector<int> cols = z_cols;
  cols.insert(cols.end(), w_cols.begin(), w_cols.end());
  const Eigen::Index pz = static_cast<Eigen::Index>(z_cols.size());
  const Eigen::Index pw = static_cast<Eigen::Index>(w_cols.size());
  const Eigen::Index pc = pz + pw;

  ScoreTerms event_terms = build_score_terms(cohort, VisitKind::event, z_cols);
  ScoreTerms visit_terms = build_score_terms(cohort, VisitKind::nonevent, w_cols);
  if (event_terms.size() == 0) throw FitError("no event visits in (0, tau]");
  if (visit_terms.size() == 0) throw FitError("no non-event visits in (0, tau]");

  const double h = resolve_bandwidth(kernel, cohort.size());
  // both panels carry [Z | W] as values and exponent columns; the two scores
  // differ only in which visits smooth, which block is compared, and the sign
  // pattern of the exponent coefficients.
  PanelSmoother smoother_events(build_smoothing_panel(cohort, VisitKind::event, cols, cols), h);
  PanelSmoother smoother_visits(build_smoothing_panel(cohort, VisitKind::nonevent, cols, cols), h);
  const ZeroDenominatorPolicy policy = kernel.zero_denominator_policy;

  // events smoothed against non-event visits, weights exp{βᵀZ(V) − θᵀW(V)}
  auto eval_event_score = [&](const Vector& beta, const Vector& theta) {
    Vector coef(pc);
    coef.head(pz) = beta;
    coef.tail(pw) = -theta;
    return smoothed_score_block(smoother_visits, event_terms, policy, coef, 0);
  };
  // roles exchanged: non-event visits smoothed against event visits,
  // weights exp{θᵀW(V) − βᵀZ(V)}
  auto eval_visit_score = [&](const Vector& beta, const Vector& theta) {
    Vector coef(pc);
    coef.head(pz) = -beta;
    coef.tail(pw) = theta;
    return smoothed_score_block(smoother_events, visit_terms, policy, coef, pz);
  };

  Vector beta, theta;
  if (solver.initial.size() > 0) {
    if (solver.initial.size() != pc)
      throw ConfigError("disjoint fit: initial vector has length " +
                        std::to_string(solver.initial.size()) + ", expected " +
                        std::to_string(pc) + " (beta then theta)");
    beta = solver.initial.head(pz);
    theta = solver.initial.tail(pw);
  } else {
    // start each block at its single-model kernel fit (the other block at 0)
    SolverConfig init = solver;
    init.initial = Vector();
    init.tolerance = std::max(solver.tolerance, 1e-4);
    const Vector zero_w = Vector::Zero(pw);
    const Vector zero_z = Vector::Zero(pz);
    beta = solve_estimating_equation(pz, init, [&](const Vector& b) {
             ScoreFunctionEval ev = eval_event_score(b, zero_w);
             ev.jac = Matrix(ev.jac.leftCols(pz));
             return ev;
           }).x;
    theta = solve_estimating_equation(pw, init, [&](const Vector& th) {
              ScoreFunctionEval ev = eval_visit_score(zero_z, th);
              ev.jac = Matrix(ev.jac.rightCols(pw));
              return ev;
            }).x;
  }

  // one damped Newton step within a block; on a singular analytic Jacobian
  // retry with central finite differences of the block score.
  auto block_step = [&](Vector& x, const ScoreFunctionEval& ev, const Matrix& jac_block,
                        const std::function<ScoreFunctionEval(const Vector&)>& at,
                        const char* label) {
    Eigen::FullPivLU<Matrix> lu(jac_block);
    if (!lu.isInvertible()) {
      Matrix fd(x.size(), x.size());
      for (Eigen::Index j = 0; j < x.size(); ++j) {
        const double step = 1e-5 * (1.0 + std::abs(x[j]));
        Vector hi = x, lo = x;
        hi[j] += step;
        lo[j] -= step;
        fd.col(j) = (at(hi).u - at(lo).u) / (2.0 * step);
      }
      lu.compute(fd);
      if (!lu.isInvertible())
        throw FitError(std::string("disjoint fit: singular ") + label + " Jacobian block");
    }
    const double norm = sup_norm(ev.u);
    Vector step = lu.solve(-ev.u);
    for (int half = 0; half <= solver.max_step_halvings; ++half) {
      ScoreFunctionEval cand = at(x + step);
      if (sup_norm(cand.u) < norm) {
        x += step;
        return cand;
      }
      step *= 0.5;
    }
    throw FitError(std::string("disjoint fit: ") + label +
                   " step failed to reduce its score norm (" + std::to_string(norm) + ")");
  };

  DisjointFit fit;
  fit.z_names.reserve(z_cols.size());
  fit.w_names.reserve(w_cols.size());
  for (int j : z_cols) fit.z_names.push_back(cohort.visit_covariates()[j]);
  for (int j : w_cols) fit.w_names.push_back(cohort.visit_covariates()[j]);

  ScoreFunctionEval ev_z = eval_event_score(beta, theta);
  ScoreFunctionEval ev_w = eval_visit_score(beta, theta);
  bool converged = false;
  for (int iter = 0; iter < solver.max_iterations; ++iter) {
    if (std::max(sup_norm(ev_z.u), sup_norm(ev_w.u)) < solver.tolerance) {
      converged = true;
      break;
    }
    if (sup_norm(ev_z.u) >= solver.tolerance) {
      ev_z = block_step(beta, ev_z, ev_z.jac.leftCols(pz),
                        [&](const Vector& b) { return eval_event_score(b, theta); }, "beta");
      ev_w = eval_visit_score(beta, theta);
    }
    if (sup_norm(ev_w.u) >= solver.tolerance) {
      ev_w = block_step(theta, ev_w, ev_w.jac.rightCols(pw),
                        [&](const Vector& th) { return eval_visit_score(beta, th); }, "theta");
      ev_z = eval_event_score(beta, theta);
    }
    ++fit.iterations;
  }
  if (!converged)
    throw FitError("disjoint fit: did not converge within " +
                   std::to_string(solver.max_iterations) + " block iterations (score norms " +
                   std::to_string(sup_norm(ev_z.u)) + ", " + std::to_string(sup_norm(ev_w.u)) +
                   ")");

  fit.beta_hat = beta;
  fit.theta_hat = theta;
  fit.beta_score_norm = sup_norm(ev_z.u);
  fit.theta_score_norm = sup_norm(ev_w.u);
  fit.converged = true;
  fit.dropped_event_terms = ev_z.dropped;
  fit.dropped_visit_terms = ev_w.dropped;

  // near-collinearity between a Z and a W column inflates the variability of
  // the joint solution; flag it without failing the fit.
  {
    const Matrix& ev_rows = smoother_events.panel().values;
    const Matrix& nv_rows = smoother_visits.panel().values;
    Matrix pooled(ev_rows.rows() + nv_rows.rows(), pc);
    pooled.topRows(ev_rows.rows()) = ev_rows;
    pooled.bottomRows(nv_rows.rows()) = nv_rows;
    for (Eigen::Index a = 0; a < pz; ++a) {
      for (Eigen::Index b = 0; b < pw; ++b) {
        const double corr = column_correlation(pooled, a, pz + b);
        if (std::abs(corr) > 0.95) {
          fit.collinearity_warning = "covariates '" + fit.z_names[a] + "' and '" +
                                     fit.w_names[b] + "' are nearly collinear (corr=" +
                                     std::to_string(corr) + "); estimates may be unstable";
          break;
        }
      }
      if (!fit.collinearity_warning.empty()) break;
    }
  }
  return fit;
}

}  // namespace recur
