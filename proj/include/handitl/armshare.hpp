#pragma once

#include "handitl/spatial.hpp"

#include "json.hpp"

#include <deque>
#include <optional>
#include <string>

namespace handitl {

enum class ResidualMode {
  Live,        // residual applied to the live policy target each step
  Integrated,  // residual increments accumulate into a persistent offset
};

struct ArmShareConfig {
  int window_k = 2;              // ticks spanned by the finite difference
  double tick_period = 0.02;     // s, VR sample period
  double gain_pos = 1.0;         // g_p
  double gain_rot = 1.0;         // g_R
  double control_period = 0.02;  // s
  double ema_coefficient = EmaFilter::kDefaultCoefficient;
  double kp_pos = 5.0;  // 1/s
  double kp_rot = 5.0;  // 1/s
  double kd_pos = 0.0;
  double kd_rot = 0.0;
  int dropout_ticks = 3;  // newest sample older than this many ticks zeroes the residual
  ResidualMode mode = ResidualMode::Live;

  double windowDuration() const { return window_k * tick_period; }
  void validate() const;
};

struct StampedPose {
  double timestamp = 0.0;
  Pose pose;
};

/// Most recent VR poses, oldest first. Bounded; pushing beyond capacity drops
/// the oldest sample.
class VrPoseWindow {
 public:
  explicit VrPoseWindow(std::size_t capacity = 8, std::string frame = "device");

  /// Throws std::invalid_argument if `timestamp` does not increase.
  void push(double timestamp, const Pose& pose);
  void clear() { samples_.clear(); }

  std::size_t size() const { return samples_.size(); }
  std::size_t capacity() const { return capacity_; }
  const std::string& frame() const { return frame_; }
  /// `back(0)` is the newest sample, `back(k)` the one k ticks earlier.
  const StampedPose& back(std::size_t ticks_ago) const;

 private:
  std::size_t capacity_;
  std::string frame_;
  std::deque<StampedPose> samples_;
};

struct ArmCommand {
  Pose target;
  Twist commanded;
  Twist feedforward;
};

/// Finite-difference twist over k ticks, EMA-smoothed and re-expressed in the
/// robot base frame. Returns nullopt until the window holds k+1 samples. A
/// stale window (newest sample older than dropout_ticks ticks at `now`) resets
/// both filters and yields a zero twist.
std::optional<Twist> estimate_residual_twist(const VrPoseWindow& window, const ArmShareConfig& cfg,
                                             const Rotation& base_from_device, EmaFilter& ema_lin,
                                             EmaFilter& ema_ang, double now);

/// p = p_pi + g_p v dt;  R = R_pi exp(g_R w dt).
Pose compose_target(const Pose& policy_pose, const Twist& residual, const ArmShareConfig& cfg);

/// Task-space PD: linear = Kp (p* - p) - Kd v + ff, angular = Kp R log(R^T R*) - Kd w + ff.
Twist pd_track(const Pose& current, const Twist& current_vel, const Pose& target,
               const Twist& feedforward, const ArmShareConfig& cfg);

/// Applies residuals to policy targets in either residual mode.
class ResidualComposer {
 public:
  explicit ResidualComposer(ArmShareConfig cfg) : cfg_(std::move(cfg)) {}

  Pose apply(const Pose& policy_pose, const Twist& residual);
  void reset();

  const Vec3& offsetPosition() const { return offset_p_; }
  const Rotation& offsetRotation() const { return offset_r_; }

 private:
  ArmShareConfig cfg_;
  Vec3 offset_p_ = Vec3::Zero();
  Rotation offset_r_;
};

/// Kinematic integration of a commanded base-frame twist over dt.
Pose integrate_twist(const Pose& pose, const Twist& twist, double dt);

nlohmann::json arm_config_to_json(const ArmShareConfig& cfg);
ArmShareConfig arm_config_from_json(const nlohmann::json& j, ArmShareConfig base = {});

}  // namespace handitl
