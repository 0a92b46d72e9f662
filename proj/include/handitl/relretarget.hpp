#pragma once

#include "handitl/hand_model.hpp"
#include "handitl/keyvec.hpp"
#include "handitl/projected_bfgs.hpp"

#include <vector>

namespace handitl {

/// Weights and gate parameters of the retargeting objective.
struct CostWeights {
  double huber_delta = 0.01;  // m
  // Shape gate: beta_min below d_lo, 1 above d_hi.
  double d_lo = 0.03;
  double d_hi = 0.08;
  double beta_min = 0.1;
  // Pinch gate: alpha 0 below d_on, 1 above d_off; omega = omega_max * (1 - alpha).
  double d_on = 0.02;
  double d_off = 0.05;
  double omega_max = 2.0;
  double gamma = 100.0;
  double d_safe = 0.01;  // m
  double lambda_reg = 0.05;
  std::vector<int> opposition_fingers = {1, 2, 3, 4};

  /// Throws std::invalid_argument when an invariant does not hold.
  void validate() const;
  /// Also checks the opposition set against the model's fingers.
  void validateFor(const HandModel& model) const;
};

/// Everything frozen at intervention onset.
struct AnchorState {
  JointConfig q_anchor;
  KeyVectors robot_kv_anchor;
  KeyVectors human_kv_anchor;

  static AnchorState capture(const HandModel& model, const JointConfig& q_now,
                             const KeyVectors& human_now);
};

struct CostBreakdown {
  double shape = 0.0;
  double grasp = 0.0;
  double safe = 0.0;
  double reg = 0.0;
  double total = 0.0;
};

struct SolveReport {
  JointConfig q_solution;
  double cost = 0.0;
  double warm_start_cost = 0.0;
  int iterations = 0;
  double gradient_norm = 0.0;
  bool converged = false;
  SolverStatus status = SolverStatus::IterationLimit;
};

double smoothstep(double x);
double gate_beta(double d, const CostWeights& w);
double gate_alpha(double d, const CostWeights& w);
double gate_omega(double d, const CostWeights& w);
double huber(double x, double delta);

/// Per-finger gate distances measured on the human key vectors. The thumb
/// takes the smallest distance to any other finger (infinity with no fingers).
std::vector<double> gate_distances(const KeyVectors& human_now);

/// Targets the objective tracks. Both the anchored (relative) and the absolute
/// retargeters reduce to this form.
struct TrackingTargets {
  std::vector<Vec3> shape;    // target wrist-to-tip per finger
  std::vector<Vec3> grasp;    // nominal opposition target per finger
  std::vector<double> beta;   // shape gate per finger
  std::vector<double> alpha;  // pinch activation per finger
  std::vector<double> omega;  // pinch weight per finger
};

/// Shape target v_rob(q0) + dv_hum; grasp target u_rob(q0) + du_hum.
TrackingTargets relative_targets(const AnchorState& anchor, const KeyVectors& human_now,
                                 const CostWeights& w);
/// Shape target v_hum(t); grasp target u_hum(t).
TrackingTargets absolute_targets(const KeyVectors& human_now, const CostWeights& w);

CostBreakdown tracking_cost(const HandModel& model, const JointConfig& q, const JointConfig& q_prev,
                            const TrackingTargets& targets, const CostWeights& w,
                            Eigen::VectorXd* gradient = nullptr);

SolveReport solve_tracking(const HandModel& model, const TrackingTargets& targets,
                           const JointConfig& q_prev, const CostWeights& w,
                           const SolverConfig& cfg, SolverWorkspace& ws);

// Anchored retargeting entry points.

CostBreakdown cost_terms(const HandModel& model, const JointConfig& q, const JointConfig& q_prev,
                         const AnchorState& anchor, const KeyVectors& human_now,
                         const CostWeights& w);

Eigen::VectorXd cost_gradient(const HandModel& model, const JointConfig& q,
                              const JointConfig& q_prev, const AnchorState& anchor,
                              const KeyVectors& human_now, const CostWeights& w);

/// One control step: warm-started at q_prev, result inside joint limits.
SolveReport solve_step(const HandModel& model, const AnchorState& anchor,
                       const KeyVectors& human_now, const JointConfig& q_prev,
                       const CostWeights& w, const SolverConfig& cfg, SolverWorkspace& ws);
SolveReport solve_step(const HandModel& model, const AnchorState& anchor,
                       const KeyVectors& human_now, const JointConfig& q_prev,
                       const CostWeights& w, const SolverConfig& cfg = {});

}  // namespace handitl
