#include "handitl/projected_bfgs.hpp"

#include <algorithm>
#include <cmath>

namespace handitl {

const char* to_string(SolverStatus s) {
  switch (s) {
    case SolverStatus::GradientTolerance: return "gradient_tolerance";
    case SolverStatus::StepTolerance: return "step_tolerance";
    case SolverStatus::IterationLimit: return "iteration_limit";
    case SolverStatus::LineSearchStalled: return "line_search_stalled";
  }
  return "unknown";
}

namespace {

Eigen::VectorXd project(const Eigen::VectorXd& x, const Eigen::VectorXd& lo,
                        const Eigen::VectorXd& hi) {
  return x.cwiseMax(lo).cwiseMin(hi);
}

double projected_gradient_norm(const Eigen::VectorXd& x, const Eigen::VectorXd& g,
                               const Eigen::VectorXd& lo, const Eigen::VectorXd& hi) {
  return (x - project(x - g, lo, hi)).norm();
}

}  // namespace

SolverResult minimize_projected_bfgs(const Objective& f, const Eigen::VectorXd& x0,
                                     const Eigen::VectorXd& lower, const Eigen::VectorXd& upper,
                                     const SolverConfig& cfg, SolverWorkspace& ws) {
  const Eigen::Index n = x0.size();
  if (lower.size() != n || upper.size() != n) {
    throw std::invalid_argument("minimize_projected_bfgs: bound dimensions differ from x0");
  }

  SolverResult res;
  res.x = project(x0, lower, upper);
  Eigen::VectorXd g(n);
  res.value = f(res.x, &g);
  if (!std::isfinite(res.value) || !g.allFinite()) {
    throw SolverError("objective is non-finite at the warm start");
  }
  ws.cost_trace.clear();
  if (ws.record_trace) ws.cost_trace.push_back(res.value);

  ws.inv_hessian.setIdentity(n, n);
  bool curvature_known = false;

  Eigen::VectorXd d(n), x_trial(n), g_trial(n), s(n), y(n), hy(n);
  std::vector<Eigen::Index> free_idx;
  free_idx.reserve(static_cast<std::size_t>(n));

  res.projected_gradient_norm = projected_gradient_norm(res.x, g, lower, upper);
  if (res.projected_gradient_norm < cfg.gradient_tolerance) {
    res.converged = true;
    res.status = SolverStatus::GradientTolerance;
    return res;
  }

  for (int it = 0; it < cfg.max_iterations; ++it) {
    // Variables held at a bound by an outward-pointing gradient are fixed.
    free_idx.clear();
    for (Eigen::Index i = 0; i < n; ++i) {
      const bool at_lo = res.x[i] <= lower[i] && g[i] > 0.0;
      const bool at_hi = res.x[i] >= upper[i] && g[i] < 0.0;
      if (!at_lo && !at_hi) free_idx.push_back(i);
    }

    auto reduced_direction = [&] {
      d.setZero();
      for (Eigen::Index a : free_idx) {
        double acc = 0.0;
        for (Eigen::Index b : free_idx) acc += ws.inv_hessian(a, b) * g[b];
        d[a] = -acc;
      }
    };
    reduced_direction();
    if (!(d.dot(g) < 0.0)) {
      ws.inv_hessian.setIdentity();
      curvature_known = false;
      reduced_direction();
    }

    double alpha = 1.0;
    if (!curvature_known) {
      const double dmax = d.cwiseAbs().maxCoeff();
      if (dmax > 0.0) alpha = std::min(1.0, cfg.initial_step / dmax);
    }

    bool accepted = false;
    double f_trial = res.value;
    for (int bt = 0; bt <= cfg.max_backtracks; ++bt) {
      x_trial = project(res.x + alpha * d, lower, upper);
      s = x_trial - res.x;
      if (s.squaredNorm() == 0.0) break;
      f_trial = f(x_trial, &g_trial);
      if (std::isfinite(f_trial) && g_trial.allFinite() &&
          f_trial <= res.value + cfg.armijo_c1 * g.dot(s)) {
        accepted = true;
        break;
      }
      alpha *= cfg.backtrack_factor;
    }

    if (!accepted) {
      if (curvature_known) {
        // Retry once from steepest descent before giving up.
        ws.inv_hessian.setIdentity();
        curvature_known = false;
        continue;
      }
      res.iterations = it;
      res.converged = true;
      res.status = SolverStatus::LineSearchStalled;
      return res;
    }

    y = g_trial - g;
    res.x = x_trial;
    res.value = f_trial;
    g = g_trial;
    res.iterations = it + 1;
    if (ws.record_trace) ws.cost_trace.push_back(res.value);

    res.projected_gradient_norm = projected_gradient_norm(res.x, g, lower, upper);
    if (res.projected_gradient_norm < cfg.gradient_tolerance) {
      res.converged = true;
      res.status = SolverStatus::GradientTolerance;
      return res;
    }
    if (s.norm() < cfg.step_tolerance) {
      res.converged = true;
      res.status = SolverStatus::StepTolerance;
      return res;
    }

    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      if (!curvature_known) {
        ws.inv_hessian *= sy / y.squaredNorm();
        curvature_known = true;
      }
      const double rho = 1.0 / sy;
      hy.noalias() = ws.inv_hessian * y;
      const double yhy = y.dot(hy);
      // H <- (I - rho s y^T) H (I - rho y s^T) + rho s s^T
      ws.inv_hessian.noalias() -= rho * (s * hy.transpose() + hy * s.transpose());
      ws.inv_hessian.noalias() += (rho * rho * yhy + rho) * (s * s.transpose());
    }
  }

  res.converged = false;
  res.status = SolverStatus::IterationLimit;
  return res;
}

}  // namespace handitl
