#include "recur/visit_model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace recur {

namespace {

// Start-stop rows: one per episode (prev visit, next visit] on which the
// history features are constant.  obs marks episodes ending at a non-event
// visit of the same subject (one dO jump each).
struct EpisodePanel {
  std::vector<double> start, stop;
  Matrix x;  // q columns
  std::vector<char> obs;
  std::vector<int> subject;
  int n = 0;
  Eigen::Index q = 0;

  std::vector<std::size_t> by_stop;   // row order, stop descending
  std::vector<std::size_t> by_start;  // row order, start descending
  std::vector<std::size_t> obs_rows;  // obs rows, stop descending
};

EpisodePanel build_episodes(const Cohort& cohort, const HistoryFeatureMap& features) {
  EpisodePanel panel;
  panel.n = static_cast<int>(cohort.size());
  panel.q = static_cast<Eigen::Index>(features.dimension());

  std::vector<Vector> xs;
  for (std::size_t i = 0; i < cohort.size(); ++i) {
    const Subject& s = cohort.subject(i);
    HistoryWalker walker(features, s);
    double episode_start = 0.0;
    std::size_t k = 0;
    while (k < s.visits.size()) {
      const double t = s.visits[k].time;
      bool has_nonevent = false;
      xs.push_back(walker.features());
      panel.start.push_back(episode_start);
      panel.stop.push_back(t);
      panel.subject.push_back(static_cast<int>(i));
      while (k < s.visits.size() && s.visits[k].time == t) {
        if (s.visits[k].kind == VisitKind::nonevent) has_nonevent = true;
        walker.apply(s.visits[k]);
        ++k;
      }
      panel.obs.push_back(has_nonevent ? 1 : 0);
      episode_start = t;
    }
    if (episode_start < s.censor_time) {  // trailing visit-free episode
      xs.push_back(walker.features());
      panel.start.push_back(episode_start);
      panel.stop.push_back(s.censor_time);
      panel.subject.push_back(static_cast<int>(i));
      panel.obs.push_back(0);
    }
  }

  panel.x.resize(static_cast<Eigen::Index>(xs.size()), panel.q);
  for (std::size_t r = 0; r < xs.size(); ++r) panel.x.row(static_cast<Eigen::Index>(r)) = xs[r];

  panel.by_stop.resize(xs.size());
  std::iota(panel.by_stop.begin(), panel.by_stop.end(), 0);
  std::sort(panel.by_stop.begin(), panel.by_stop.end(),
            [&](std::size_t a, std::size_t b) { return panel.stop[a] > panel.stop[b]; });
  panel.by_start.resize(xs.size());
  std::iota(panel.by_start.begin(), panel.by_start.end(), 0);
  std::sort(panel.by_start.begin(), panel.by_start.end(),
            [&](std::size_t a, std::size_t b) { return panel.start[a] > panel.start[b]; });
  for (std::size_t r : panel.by_stop)
    if (panel.obs[r]) panel.obs_rows.push_back(r);
  return panel;
}

struct SweepResult {
  Vector score;  // U₁(α)
  Matrix info;   // −∂U₁/∂α
  double logpl = 0.0;
  // raw risk denominators per obs row, ascending time order
  std::vector<std::pair<double, double>> denominators;
};

// One decreasing-time pass over the pooled risk sets: maintains
//   denom = Σ_active exp{αᵀx},  a = Σ w·x,  cm = Σ w·x·xᵀ
// (the s0/s1/s2 of the partial likelihood) and accumulates score,
// information and log pseudo-likelihood at non-event visit times ≤ τ.
SweepResult risk_sweep(const EpisodePanel& panel, const Vector& alpha, double tau,
                       bool want_denominators) {
  SweepResult res;
  res.score = Vector::Zero(panel.q);
  res.info = Matrix::Zero(panel.q, panel.q);

  Vector eta = panel.x * alpha;
  std::vector<double> w(static_cast<std::size_t>(eta.size()));
  for (std::size_t r = 0; r < w.size(); ++r) w[r] = std::exp(eta[static_cast<Eigen::Index>(r)]);

  double denom = 0.0;
  Vector a = Vector::Zero(panel.q);
  Matrix cm = Matrix::Zero(panel.q, panel.q);
  std::size_t i_add = 0, i_rem = 0;

  std::size_t e = 0;
  while (e < panel.obs_rows.size()) {
    const double u = panel.stop[panel.obs_rows[e]];
    while (i_add < panel.by_stop.size() && panel.stop[panel.by_stop[i_add]] >= u) {
      const std::size_t r = panel.by_stop[i_add++];
      denom += w[r];
      a += w[r] * panel.x.row(static_cast<Eigen::Index>(r)).transpose();
      cm += w[r] * panel.x.row(static_cast<Eigen::Index>(r)).transpose() *
            panel.x.row(static_cast<Eigen::Index>(r));
    }
    while (i_rem < panel.by_start.size() && panel.start[panel.by_start[i_rem]] >= u) {
      const std::size_t r = panel.by_start[i_rem++];
      denom -= w[r];
      a -= w[r] * panel.x.row(static_cast<Eigen::Index>(r)).transpose();
      cm -= w[r] * panel.x.row(static_cast<Eigen::Index>(r)).transpose() *
            panel.x.row(static_cast<Eigen::Index>(r));
    }
    // all tied obs rows at u share this risk set
    while (e < panel.obs_rows.size() && panel.stop[panel.obs_rows[e]] == u) {
      const std::size_t r = panel.obs_rows[e++];
      if (want_denominators) res.denominators.emplace_back(u, denom);
      if (u > tau) continue;
      const Vector xbar = a / denom;
      res.score += panel.x.row(static_cast<Eigen::Index>(r)).transpose() - xbar;
      res.info += cm / denom - xbar * xbar.transpose();
      res.logpl += eta[static_cast<Eigen::Index>(r)] - std::log(denom);
    }
  }

  res.score /= panel.n;
  res.info /= panel.n;
  if (want_denominators)
    std::reverse(res.denominators.begin(), res.denominators.end());  // ascending time
  return res;
}

}  // namespace

VisitModelFit fit_visit_model(const Cohort& cohort, const HistoryFeatureSpec& spec,
                              const SolverConfig& solver,
                              const std::optional<KernelConfig>& baseline_kernel,
                              int grid_points) {
  solver.validate();
  HistoryFeatureMap features(cohort, spec);
  const Eigen::Index q = static_cast<Eigen::Index>(features.dimension());

  if (cohort.count_visits(VisitKind::nonevent, cohort.tau()) == 0)
    throw FitError("no non-event visits in (0, tau]");

  EpisodePanel panel = build_episodes(cohort, features);

  VisitModelFit fit;
  fit.feature_labels = features.labels();
  Vector alpha = Vector::Zero(q);
  if (solver.initial.size() > 0) {
    if (solver.initial.size() != q)
      throw ConfigError("solver initial vector has wrong length for the visit model");
    alpha = solver.initial;
  }

  SweepResult res = risk_sweep(panel, alpha, cohort.tau(), false);
  for (int iter = 0; iter < solver.max_iterations; ++iter) {
    const double cur_norm = sup_norm(res.score);
    if (cur_norm < solver.tolerance) break;

    Eigen::FullPivLU<Matrix> lu(res.info);
    if (!lu.isInvertible())
      throw FitError("visit model: singular information matrix (collinear features on risk sets)");
    const Vector direction = lu.solve(res.score);

    // step-halve on the score sup-norm; near the optimum the log
    // pseudo-likelihood differences sink below rounding noise, so an
    // improvement test on it stalls spuriously
    bool accepted = false;
    Vector step = direction;
    for (int half = 0; half <= solver.max_step_halvings; ++half) {
      SweepResult cand = risk_sweep(panel, alpha + step, cohort.tau(), false);
      if (sup_norm(cand.score) < cur_norm) {  // NaN rejects
        alpha += step;
        res = std::move(cand);
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    ++fit.iterations;
    if (!accepted) break;  // stalled; report diagnostics below
  }

  fit.alpha_hat = alpha;
  fit.score_norm = sup_norm(res.score);
  fit.converged = fit.score_norm < solver.tolerance;
  fit.log_pseudo_likelihood = res.logpl;

  SweepResult final_res = risk_sweep(panel, alpha, cohort.tau(), true);
  fit.risk_points = std::move(final_res.denominators);

  if (baseline_kernel) {
    const double h = resolve_bandwidth(*baseline_kernel, cohort.size());
    if (grid_points < 2) throw ConfigError("baseline grid needs at least 2 points");
    fit.baseline_grid.reserve(grid_points);
    for (int g = 0; g < grid_points; ++g) {
      const double t = cohort.tau() * g / (grid_points - 1);
      fit.baseline_grid.emplace_back(t, baseline_visit_rate(fit.risk_points, h, t));
    }
  }
  return fit;
}

double baseline_visit_rate(const std::vector<std::pair<double, double>>& risk_points, double h,
                           double t) {
  if (!(h > 0.0)) throw ConfigError("bandwidth must be positive");
  const double tc = std::max(t, h);
  auto lo = std::upper_bound(risk_points.begin(), risk_points.end(), tc - h,
                             [](double v, const auto& p) { return v < p.first; });
  double rate = 0.0;
  for (auto it = lo; it != risk_points.end() && it->first < tc + h; ++it)
    rate += kernel_weight((tc - it->first) / h) / h / it->second;
  return rate;
}

double baseline_visit_rate(const Cohort& cohort, const HistoryFeatureSpec& spec,
                           const Vector& alpha_hat, double h, double t) {
  HistoryFeatureMap features(cohort, spec);
  if (static_cast<std::size_t>(alpha_hat.size()) != features.dimension())
    throw ConfigError("alpha length does not match the history spec dimension");
  EpisodePanel panel = build_episodes(cohort, features);
  SweepResult res = risk_sweep(panel, alpha_hat, cohort.tau(), true);
  return baseline_visit_rate(res.denominators, h, t);
}

}  // namespace recur
