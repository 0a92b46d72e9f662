#pragma once

#include <Eigen/Core>

#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace handitl {

class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SolverConfig {
  int max_iterations = 50;
  double gradient_tolerance = 1e-8;  // on the projected gradient
  double step_tolerance = 1e-10;
  double armijo_c1 = 1e-4;
  double backtrack_factor = 0.5;
  int max_backtracks = 40;
  /// Upper bound on the first trial step (radians) before curvature is known.
  double initial_step = 0.1;
};

enum class SolverStatus { GradientTolerance, StepTolerance, IterationLimit, LineSearchStalled };

const char* to_string(SolverStatus s);

/// Caller-owned scratch memory. One workspace per concurrent solve.
struct SolverWorkspace {
  Eigen::MatrixXd inv_hessian;
  /// When set, the objective value of every accepted iterate is appended to
  /// `cost_trace` (starting with the warm start).
  bool record_trace = false;
  std::vector<double> cost_trace;
};

struct SolverResult {
  Eigen::VectorXd x;
  double value = 0.0;
  int iterations = 0;
  double projected_gradient_norm = 0.0;
  bool converged = false;
  SolverStatus status = SolverStatus::IterationLimit;
};

/// Objective callback: returns f(x) and, when `grad` is non-null, writes the
/// gradient into it (pre-sized to x.size()).
using Objective = std::function<double(const Eigen::VectorXd& x, Eigen::VectorXd* grad)>;

/// Box-constrained quasi-Newton descent. Inverse-Hessian BFGS restricted to the
/// free variables, projection onto [lower, upper] after every trial step, and
/// backtracking Armijo acceptance along the projected arc. Accepted iterates
/// never increase the objective.
///
/// Throws SolverError when the objective is non-finite at the start point.
SolverResult minimize_projected_bfgs(const Objective& f, const Eigen::VectorXd& x0,
                                     const Eigen::VectorXd& lower, const Eigen::VectorXd& upper,
                                     const SolverConfig& cfg, SolverWorkspace& ws);

}  // namespace handitl
