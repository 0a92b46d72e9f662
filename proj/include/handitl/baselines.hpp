#pragma once

#include "handitl/hand_model.hpp"
#include "handitl/keyvec.hpp"
#include "handitl/relretarget.hpp"

#include <vector>

namespace handitl {

/// Absolute retargeting: same objective as the anchored solver, but the shape
/// and opposition terms track the current human key vectors directly.
SolveReport absolute_retarget_report(const HandModel& model, const KeyVectors& human_now,
                                     const JointConfig& q_prev, const CostWeights& w,
                                     const SolverConfig& cfg, SolverWorkspace& ws);

JointConfig absolute_retarget(const HandModel& model, const KeyVectors& human_now,
                              const JointConfig& q_prev, const CostWeights& w,
                              const SolverConfig& cfg = {});

CostBreakdown absolute_cost_terms(const HandModel& model, const JointConfig& q,
                                  const JointConfig& q_prev, const KeyVectors& human_now,
                                  const CostWeights& w);

/// Absolute teleoperation retargeter that runs continuously on the human
/// stream. Its only state is the warm start.
class TeleopBackend {
 public:
  TeleopBackend(const HandModel& model, CostWeights weights, SolverConfig cfg,
                JointConfig initial);

  const JointConfig& step(const KeyVectors& human_now);
  const JointConfig& current() const { return q_; }
  const SolveReport& lastReport() const { return report_; }
  void reset(const JointConfig& q) { q_ = q; }

 private:
  const HandModel* model_;
  CostWeights weights_;
  SolverConfig cfg_;
  SolverWorkspace ws_;
  JointConfig q_;
  SolveReport report_;
};

/// q_exec = q_robot_anchor + (q_tel_now - q_tel_anchor), clamped to the limits.
JointConfig delta_cmd_retarget(const HandModel& model, const JointConfig& q_robot_anchor,
                               const JointConfig& q_tel_now, const JointConfig& q_tel_anchor);

/// Unclamped closed form of delta_cmd_retarget.
JointConfig delta_cmd_raw(const JointConfig& q_robot_anchor, const JointConfig& q_tel_now,
                          const JointConfig& q_tel_anchor);

inline constexpr double kDefaultDlsDamping = 1e-3;  // m

/// Per-finger damped least squares: dq_chain = J^T (J J^T + lambda^2 I)^-1 dtip,
/// then q = project_limits(q_prev + dq). Only each finger's own chain moves.
JointConfig jacobian_retarget(const HandModel& model, const JointConfig& q_prev,
                              const std::vector<Vec3>& fingertip_displacements,
                              double damping = kDefaultDlsDamping);

}  // namespace handitl
