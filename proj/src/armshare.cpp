#include "handitl/armshare.hpp"

#include "handitl/json_util.hpp"

#include <string>

namespace handitl {

void ArmShareConfig::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(std::string("ArmShareConfig: ") + what);
  };
  require(window_k >= 1, "window_k must be at least 1");
  require(tick_period > 0.0 && control_period > 0.0, "periods must be positive");
  require(ema_coefficient > 0.0 && ema_coefficient <= 1.0, "ema_coefficient must lie in (0, 1]");
  require(gain_pos >= 0.0 && gain_rot >= 0.0, "residual gains must be non-negative");
  require(kp_pos >= 0.0 && kp_rot >= 0.0 && kd_pos >= 0.0 && kd_rot >= 0.0,
          "PD gains must be non-negative");
  require(dropout_ticks >= 1, "dropout_ticks must be at least 1");
}

VrPoseWindow::VrPoseWindow(std::size_t capacity, std::string frame)
    : capacity_(capacity), frame_(std::move(frame)) {
  if (capacity_ < 2) throw std::invalid_argument("VrPoseWindow: capacity must be at least 2");
}

void VrPoseWindow::push(double timestamp, const Pose& pose) {
  if (!samples_.empty() && !(timestamp > samples_.back().timestamp)) {
    throw std::invalid_argument("VrPoseWindow: timestamps must increase");
  }
  samples_.push_back({timestamp, pose});
  while (samples_.size() > capacity_) samples_.pop_front();
}

const StampedPose& VrPoseWindow::back(std::size_t ticks_ago) const {
  if (ticks_ago >= samples_.size()) throw std::out_of_range("VrPoseWindow::back");
  return samples_[samples_.size() - 1 - ticks_ago];
}

std::optional<Twist> estimate_residual_twist(const VrPoseWindow& window, const ArmShareConfig& cfg,
                                             const Rotation& base_from_device, EmaFilter& ema_lin,
                                             EmaFilter& ema_ang, double now) {
  const auto k = static_cast<std::size_t>(cfg.window_k);
  if (window.size() < k + 1) return std::nullopt;

  const StampedPose& newest = window.back(0);
  if (now - newest.timestamp > cfg.dropout_ticks * cfg.tick_period) {
    ema_lin.reset();
    ema_ang.reset();
    return Twist{};
  }
  const StampedPose& oldest = window.back(k);
  const double dt = cfg.windowDuration();
  const Vec3 lin = (newest.pose.position - oldest.pose.position) / dt;
  const Vec3 ang = so3_log(oldest.pose.rotation.inverse() * newest.pose.rotation) / dt;
  const Vec3 lin_s = ema_lin.step(lin);
  const Vec3 ang_s = ema_ang.step(ang);
  return Twist{base_from_device * lin_s, base_from_device * ang_s};
}

Pose compose_target(const Pose& policy_pose, const Twist& residual, const ArmShareConfig& cfg) {
  const double dt = cfg.control_period;
  return {policy_pose.position + cfg.gain_pos * dt * residual.linear,
          policy_pose.rotation * so3_exp(cfg.gain_rot * dt * residual.angular)};
}

Twist pd_track(const Pose& current, const Twist& current_vel, const Pose& target,
               const Twist& feedforward, const ArmShareConfig& cfg) {
  const Vec3 rot_err_body = so3_log(current.rotation.inverse() * target.rotation);
  Twist out;
  out.linear = cfg.kp_pos * (target.position - current.position) - cfg.kd_pos * current_vel.linear +
               feedforward.linear;
  out.angular = cfg.kp_rot * (current.rotation * rot_err_body) - cfg.kd_rot * current_vel.angular +
                feedforward.angular;
  return out;
}

Pose ResidualComposer::apply(const Pose& policy_pose, const Twist& residual) {
  if (cfg_.mode == ResidualMode::Live) return compose_target(policy_pose, residual, cfg_);
  const Pose step = compose_target(Pose{}, residual, cfg_);
  offset_p_ += step.position;
  offset_r_ = offset_r_ * step.rotation;
  return {policy_pose.position + offset_p_, policy_pose.rotation * offset_r_};
}

void ResidualComposer::reset() {
  offset_p_.setZero();
  offset_r_ = Rotation();
}

Pose integrate_twist(const Pose& pose, const Twist& twist, double dt) {
  // Base-frame angular velocity: R <- exp(w dt) R.
  return {pose.position + dt * twist.linear, so3_exp(dt * twist.angular) * pose.rotation};
}

nlohmann::json arm_config_to_json(const ArmShareConfig& cfg) {
  return {{"window_k", cfg.window_k},
          {"tick_period", cfg.tick_period},
          {"gain_pos", cfg.gain_pos},
          {"gain_rot", cfg.gain_rot},
          {"control_period", cfg.control_period},
          {"ema_coefficient", cfg.ema_coefficient},
          {"kp_pos", cfg.kp_pos},
          {"kp_rot", cfg.kp_rot},
          {"kd_pos", cfg.kd_pos},
          {"kd_rot", cfg.kd_rot},
          {"dropout_ticks", cfg.dropout_ticks},
          {"residual_mode", cfg.mode == ResidualMode::Live ? "live" : "integrated"}};
}

ArmShareConfig arm_config_from_json(const nlohmann::json& j, ArmShareConfig cfg) {
  using jsonio::maybe;
  maybe(j, "window_k", cfg.window_k);
  maybe(j, "tick_period", cfg.tick_period);
  maybe(j, "gain_pos", cfg.gain_pos);
  maybe(j, "gain_rot", cfg.gain_rot);
  maybe(j, "control_period", cfg.control_period);
  maybe(j, "ema_coefficient", cfg.ema_coefficient);
  maybe(j, "kp_pos", cfg.kp_pos);
  maybe(j, "kp_rot", cfg.kp_rot);
  maybe(j, "kd_pos", cfg.kd_pos);
  maybe(j, "kd_rot", cfg.kd_rot);
  maybe(j, "dropout_ticks", cfg.dropout_ticks);
  if (auto it = j.find("residual_mode"); it != j.end()) {
    const auto mode = it->get<std::string>();
    if (mode == "live") {
      cfg.mode = ResidualMode::Live;
    } else if (mode == "integrated") {
      cfg.mode = ResidualMode::Integrated;
    } else {
      throw std::invalid_argument("residual_mode must be 'live' or 'integrated'");
    }
  }
  cfg.validate();
  return cfg;
}

}  // namespace handitl
