#include "handitl/baselines.hpp"

#include <Eigen/Cholesky>

#include <string>

namespace handitl {

SolveReport absolute_retarget_report(const HandModel& model, const KeyVectors& human_now,
                                     const JointConfig& q_prev, const CostWeights& w,
                                     const SolverConfig& cfg, SolverWorkspace& ws) {
  if (human_now.fingerCount() != model.fingerCount()) {
    throw DimensionError("absolute_retarget: human key vectors do not match the model");
  }
  return solve_tracking(model, absolute_targets(human_now, w), q_prev, w, cfg, ws);
}

JointConfig absolute_retarget(const HandModel& model, const KeyVectors& human_now,
                              const JointConfig& q_prev, const CostWeights& w,
                              const SolverConfig& cfg) {
  SolverWorkspace ws;
  return absolute_retarget_report(model, human_now, q_prev, w, cfg, ws).q_solution;
}

CostBreakdown absolute_cost_terms(const HandModel& model, const JointConfig& q,
                                  const JointConfig& q_prev, const KeyVectors& human_now,
                                  const CostWeights& w) {
  w.validateFor(model);
  return tracking_cost(model, q, q_prev, absolute_targets(human_now, w), w);
}

TeleopBackend::TeleopBackend(const HandModel& model, CostWeights weights, SolverConfig cfg,
                             JointConfig initial)
    : model_(&model), weights_(std::move(weights)), cfg_(cfg), q_(std::move(initial)) {
  model.checkConfig(q_);
  weights_.validateFor(model);
}

const JointConfig& TeleopBackend::step(const KeyVectors& human_now) {
  report_ = absolute_retarget_report(*model_, human_now, q_, weights_, cfg_, ws_);
  q_ = report_.q_solution;
  return q_;
}

JointConfig delta_cmd_raw(const JointConfig& q_robot_anchor, const JointConfig& q_tel_now,
                          const JointConfig& q_tel_anchor) {
  if (q_tel_now.size() != q_robot_anchor.size() || q_tel_anchor.size() != q_robot_anchor.size()) {
    throw DimensionError("delta_cmd_retarget: configurations have different dimensions");
  }
  return q_robot_anchor + (q_tel_now - q_tel_anchor);
}

JointConfig delta_cmd_retarget(const HandModel& model, const JointConfig& q_robot_anchor,
                               const JointConfig& q_tel_now, const JointConfig& q_tel_anchor) {
  return project_limits(model, delta_cmd_raw(q_robot_anchor, q_tel_now, q_tel_anchor));
}

JointConfig jacobian_retarget(const HandModel& model, const JointConfig& q_prev,
                              const std::vector<Vec3>& fingertip_displacements, double damping) {
  model.checkConfig(q_prev);
  if (static_cast<int>(fingertip_displacements.size()) != model.fingerCount()) {
    throw DimensionError("jacobian_retarget: expected " + std::to_string(model.fingerCount()) +
                         " fingertip displacements");
  }
  if (!(damping > 0.0)) throw std::invalid_argument("jacobian_retarget: damping must be positive");
  const HandKinematics kin = compute_kinematics(model, q_prev);
  JointConfig q = q_prev;
  for (int f = 0; f < model.fingerCount(); ++f) {
    const Vec3& dtip = fingertip_displacements[static_cast<std::size_t>(f)];
    if (dtip.isZero(0.0)) continue;
    const ChainState& st = kin.chains[static_cast<std::size_t>(f)];
    const int n = static_cast<int>(st.axes.size());
    Matrix3X jac(3, n);
    for (int j = 0; j < n; ++j) {
      const auto ju = static_cast<std::size_t>(j);
      jac.col(j) = st.axes[ju].cross(st.tip - st.origins[ju]);
    }
    const Mat3 jjt = jac * jac.transpose() + damping * damping * Mat3::Identity();
    const Eigen::VectorXd dq = jac.transpose() * jjt.llt().solve(dtip);
    q.segment(model.chainOffset(f), n) += dq;
  }
  return project_limits(model, q);
}

}  // namespace handitl
