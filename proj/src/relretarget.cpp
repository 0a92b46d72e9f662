#include "handitl/relretarget.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace handitl {

void CostWeights::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(std::string("CostWeights: ") + what);
  };
  require(huber_delta > 0.0, "huber_delta must be positive");
  require(0.0 < d_lo && d_lo < d_hi, "need 0 < d_lo < d_hi");
  require(0.0 < d_on && d_on < d_off, "need 0 < d_on < d_off");
  require(beta_min >= 0.0 && beta_min < 1.0, "beta_min must lie in [0, 1)");
  require(omega_max >= 0.0, "omega_max must be non-negative");
  require(gamma > 0.0, "gamma must be positive");
  require(d_safe > 0.0, "d_safe must be positive");
  require(lambda_reg > 0.0, "lambda_reg must be positive");
}

void CostWeights::validateFor(const HandModel& model) const {
  validate();
  for (int j : opposition_fingers) {
    if (j == HandModel::kThumb || j < 0 || j >= model.fingerCount()) {
      throw std::invalid_argument("CostWeights: opposition finger " + std::to_string(j) +
                                  " is not a non-thumb finger of model '" + model.name() + "'");
    }
  }
}

AnchorState AnchorState::capture(const HandModel& model, const JointConfig& q_now,
                                 const KeyVectors& human_now) {
  if (human_now.fingerCount() != model.fingerCount()) {
    throw DimensionError("AnchorState: human key vectors do not match the model's fingers");
  }
  return {q_now, robot_keyvectors(model, q_now), human_now};
}

double smoothstep(double x) {
  const double t = std::clamp(x, 0.0, 1.0);
  return t * t * (3.0 - 2.0 * t);
}

namespace {

void require_distance(double d) {
  if (!(d >= 0.0)) throw std::invalid_argument("gate distance must be non-negative");
}

}  // namespace

double gate_beta(double d, const CostWeights& w) {
  require_distance(d);
  return w.beta_min + (1.0 - w.beta_min) * smoothstep((d - w.d_lo) / (w.d_hi - w.d_lo));
}

double gate_alpha(double d, const CostWeights& w) {
  require_distance(d);
  return smoothstep((d - w.d_on) / (w.d_off - w.d_on));
}

double gate_omega(double d, const CostWeights& w) { return w.omega_max * (1.0 - gate_alpha(d, w)); }

double huber(double x, double delta) {
  return x <= delta ? 0.5 * x * x : delta * (x - 0.5 * delta);
}

std::vector<double> gate_distances(const KeyVectors& human_now) {
  const int n = human_now.fingerCount();
  std::vector<double> d(static_cast<std::size_t>(n), std::numeric_limits<double>::infinity());
  for (int i = 0; i < n; ++i) {
    if (i == HandModel::kThumb) continue;
    d[static_cast<std::size_t>(i)] = thumb_distance(human_now, i);
    d[HandModel::kThumb] = std::min(d[HandModel::kThumb], d[static_cast<std::size_t>(i)]);
  }
  return d;
}

namespace {

void fill_gates(TrackingTargets& t, const KeyVectors& human_now, const CostWeights& w) {
  const std::vector<double> d = gate_distances(human_now);
  t.beta.resize(d.size());
  t.alpha.resize(d.size());
  t.omega.resize(d.size());
  for (std::size_t i = 0; i < d.size(); ++i) {
    t.beta[i] = gate_beta(d[i], w);
    t.alpha[i] = gate_alpha(d[i], w);
    t.omega[i] = gate_omega(d[i], w);
  }
}

// Derivative of huber(||e||) with respect to e.
Vec3 huber_direction(const Vec3& e, double norm, double delta) {
  return norm <= delta ? e : Vec3(delta / norm * e);
}

Eigen::VectorXd huber_direction(const Eigen::VectorXd& e, double norm, double delta) {
  return norm <= delta ? e : Eigen::VectorXd(delta / norm * e);
}

// grad += J_point^T * weight for a point fixed after `joint` on `chain`.
void add_point_gradient(const HandModel& model, const ChainState& st, int chain, int joint,
                        const Vec3& point, const Vec3& weight, Eigen::VectorXd& grad) {
  const int base = model.chainOffset(chain);
  for (int j = 0; j <= joint; ++j) {
    const auto ju = static_cast<std::size_t>(j);
    grad[base + j] += weight.dot(st.axes[ju].cross(point - st.origins[ju]));
  }
}

}  // namespace

TrackingTargets relative_targets(const AnchorState& anchor, const KeyVectors& human_now,
                                 const CostWeights& w) {
  const RelativeDeltas delta = relative_deltas(human_now, anchor.human_kv_anchor);
  if (delta.fingerCount() != anchor.robot_kv_anchor.fingerCount()) {
    throw DimensionError("relative_targets: anchor and human finger counts differ");
  }
  TrackingTargets t;
  const std::size_t n = delta.wrist_to_tip.size();
  t.shape.resize(n);
  t.grasp.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    t.shape[i] = anchor.robot_kv_anchor.wrist_to_tip[i] + delta.wrist_to_tip[i];
    t.grasp[i] = anchor.robot_kv_anchor.opposition[i] + delta.opposition[i];
  }
  fill_gates(t, human_now, w);
  return t;
}

TrackingTargets absolute_targets(const KeyVectors& human_now, const CostWeights& w) {
  TrackingTargets t;
  t.shape = human_now.wrist_to_tip;
  t.grasp = human_now.opposition;
  fill_gates(t, human_now, w);
  return t;
}

CostBreakdown tracking_cost(const HandModel& model, const JointConfig& q, const JointConfig& q_prev,
                            const TrackingTargets& targets, const CostWeights& w,
                            Eigen::VectorXd* gradient) {
  model.checkConfig(q_prev);
  const auto nf = static_cast<std::size_t>(model.fingerCount());
  if (targets.shape.size() != nf || targets.grasp.size() != nf || targets.beta.size() != nf) {
    throw DimensionError("tracking_cost: targets do not match the model's fingers");
  }
  const HandKinematics kin = compute_kinematics(model, q);
  if (gradient) gradient->setZero(model.dof());
  const double delta = w.huber_delta;
  CostBreakdown c;

  auto tip_joint = [&](int chain) {
    return static_cast<int>(model.chains()[static_cast<std::size_t>(chain)].joints.size()) - 1;
  };

  for (std::size_t i = 0; i < nf; ++i) {
    const Vec3 r = kin.chains[i].tip - targets.shape[i];
    const double rn = r.norm();
    c.shape += targets.beta[i] * huber(rn, delta);
    if (gradient) {
      const int ci = static_cast<int>(i);
      add_point_gradient(model, kin.chains[i], ci, tip_joint(ci), kin.chains[i].tip,
                         targets.beta[i] * huber_direction(r, rn, delta), *gradient);
    }
  }

  const Vec3& thumb_tip = kin.chains[HandModel::kThumb].tip;
  for (int j : w.opposition_fingers) {
    const auto ju = static_cast<std::size_t>(j);
    const double omega = targets.omega[ju];
    if (omega == 0.0) continue;
    const Vec3 u = kin.chains[ju].tip - thumb_tip;
    const Vec3 e = u - targets.alpha[ju] * targets.grasp[ju];
    const double en = e.norm();
    c.grasp += omega * huber(en, delta);
    if (gradient) {
      const Vec3 wv = omega * huber_direction(e, en, delta);
      add_point_gradient(model, kin.chains[ju], j, tip_joint(j), kin.chains[ju].tip, wv, *gradient);
      add_point_gradient(model, kin.chains[HandModel::kThumb], HandModel::kThumb,
                         tip_joint(HandModel::kThumb), thumb_tip, -wv, *gradient);
    }
  }

  for (const auto& pair : model.pairs()) {
    const auto& sa = model.spheres()[static_cast<std::size_t>(pair.a)];
    const auto& sb = model.spheres()[static_cast<std::size_t>(pair.b)];
    const Vec3 ca = kin.pointOn(model, sa.chain, sa.joint, sa.center);
    const Vec3 cb = kin.pointOn(model, sb.chain, sb.joint, sb.center);
    const Vec3 diff = ca - cb;
    const double dist = diff.norm();
    const double hinge = w.d_safe - (dist - sa.radius - sb.radius);
    if (hinge <= 0.0) continue;
    c.safe += w.gamma * hinge * hinge;
    if (gradient && dist > 0.0) {
      // d/dq of gamma * hinge^2 = -2 gamma hinge * n^T (J_a - J_b)
      const Vec3 wv = (-2.0 * w.gamma * hinge / dist) * diff;
      add_point_gradient(model, kin.chains[static_cast<std::size_t>(sa.chain)], sa.chain, sa.joint,
                         ca, wv, *gradient);
      add_point_gradient(model, kin.chains[static_cast<std::size_t>(sb.chain)], sb.chain, sb.joint,
                         cb, -wv, *gradient);
    }
  }

  const Eigen::VectorXd dq = q - q_prev;
  const double dqn = dq.norm();
  c.reg = w.lambda_reg * huber(dqn, delta);
  if (gradient) *gradient += w.lambda_reg * huber_direction(dq, dqn, delta);

  c.total = c.shape + c.grasp + c.safe + c.reg;
  return c;
}

SolveReport solve_tracking(const HandModel& model, const TrackingTargets& targets,
                           const JointConfig& q_prev, const CostWeights& w,
                           const SolverConfig& cfg, SolverWorkspace& ws) {
  w.validateFor(model);
  model.checkConfig(q_prev);
  const JointConfig start = project_limits(model, q_prev);
  const Objective objective = [&](const Eigen::VectorXd& q, Eigen::VectorXd* grad) {
    return tracking_cost(model, q, q_prev, targets, w, grad).total;
  };
  SolveReport report;
  report.warm_start_cost = tracking_cost(model, start, q_prev, targets, w).total;
  const SolverResult r =
      minimize_projected_bfgs(objective, start, model.lower(), model.upper(), cfg, ws);
  report.q_solution = r.x;
  report.cost = r.value;
  report.iterations = r.iterations;
  report.gradient_norm = r.projected_gradient_norm;
  report.converged = r.converged;
  report.status = r.status;
  return report;
}

CostBreakdown cost_terms(const HandModel& model, const JointConfig& q, const JointConfig& q_prev,
                         const AnchorState& anchor, const KeyVectors& human_now,
                         const CostWeights& w) {
  w.validateFor(model);
  return tracking_cost(model, q, q_prev, relative_targets(anchor, human_now, w), w);
}

Eigen::VectorXd cost_gradient(const HandModel& model, const JointConfig& q,
                              const JointConfig& q_prev, const AnchorState& anchor,
                              const KeyVectors& human_now, const CostWeights& w) {
  w.validateFor(model);
  Eigen::VectorXd g;
  tracking_cost(model, q, q_prev, relative_targets(anchor, human_now, w), w, &g);
  return g;
}

SolveReport solve_step(const HandModel& model, const AnchorState& anchor,
                       const KeyVectors& human_now, const JointConfig& q_prev,
                       const CostWeights& w, const SolverConfig& cfg, SolverWorkspace& ws) {
  model.checkConfig(anchor.q_anchor);
  return solve_tracking(model, relative_targets(anchor, human_now, w), q_prev, w, cfg, ws);
}

SolveReport solve_step(const HandModel& model, const AnchorState& anchor,
                       const KeyVectors& human_now, const JointConfig& q_prev,
                       const CostWeights& w, const SolverConfig& cfg) {
  SolverWorkspace ws;
  return solve_step(model, anchor, human_now, q_prev, w, cfg, ws);
}

}  // namespace handitl
