#pragma once

#include "handitl/armshare.hpp"
#include "handitl/config.hpp"
#include "handitl/hand_model.hpp"
#include "handitl/intervene.hpp"
#include "handitl/keyvec.hpp"

#include "json.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace handitl {

/// Open/close motion of one human finger, added to its flexion joints:
/// amplitude * (1 - cos(2 pi f t + phase)) / 2.
struct FingerCurve {
  double amplitude = 0.15;  // rad
  double frequency = 0.4;   // Hz
  double phase = 0.0;       // rad
};

struct ToggleEvent {
  double time = 0.0;
  InterventionMode mode = InterventionMode::FullTakeover;
};

struct ScenarioSpec {
  std::string name = "scenario";
  std::uint64_t seed = 0;
  double duration = 4.0;  // s
  double control_period = 0.02;

  // Human hand stream.
  double misalignment = 0.5;    // rad, joint-space L2 at intervention onset
  double noise_sigma = 0.0005;  // m, per fingertip coordinate
  double human_scale = 1.15;    // operator hand size over robot hand size
  std::vector<FingerCurve> finger_curves;  // one per finger; empty = defaults

  // Operator wrist (VR) motion: a raised-cosine velocity burst after each
  // engage, then stillness.
  double wrist_peak_speed = 0.10;       // m/s
  double wrist_peak_rate = 0.30;        // rad/s about the device z axis
  double wrist_burst_duration = 0.40;   // s
  std::vector<std::pair<double, double>> vr_dropouts;  // [start, end) without VR samples

  // Scripted policy.
  double policy_hand_amplitude = 0.05;  // rad
  double policy_hand_frequency = 0.25;  // Hz
  double policy_arm_amplitude = 0.03;   // m
  double policy_arm_frequency = 0.2;    // Hz

  std::vector<ToggleEvent> toggles;

  /// Three engage/disengage pairs spread over `duration`.
  static std::vector<ToggleEvent> defaultToggles(double duration,
                                                 InterventionMode mode = InterventionMode::FullTakeover);
  void validate() const;
};

nlohmann::json scenario_to_json(const ScenarioSpec& spec);
ScenarioSpec scenario_from_json(const nlohmann::json& j);
ScenarioSpec load_scenario(const std::filesystem::path& path);

/// One chunk predicted by the mock policy at a control step.
struct PolicyChunk {
  int step = 0;
  std::vector<PolicyCommand> actions;  // horizon H
};

/// Scripted stand-in for the policy. Each call to predict() returns H actions
/// starting at the given step; counters record what was predicted.
class MockPolicyStream {
 public:
  MockPolicyStream(JointConfig base_hand, JointConfig hand_direction, double hand_amplitude,
                   double hand_frequency, Pose arm_origin, double arm_amplitude,
                   double arm_frequency, double control_period, int horizon);

  PolicyChunk predict(int step);
  /// Single action at `step` (no counters).
  PolicyCommand actionAt(int step) const;

  int horizon() const { return horizon_; }
  long chunksPredicted() const { return chunks_; }
  long actionsPredicted() const { return actions_; }

 private:
  JointConfig base_hand_;
  JointConfig hand_direction_;
  double hand_amplitude_;
  double hand_frequency_;
  Pose arm_origin_;
  double arm_amplitude_;
  double arm_frequency_;
  double dt_;
  int horizon_;
  long chunks_ = 0;
  long actions_ = 0;
};

/// Everything a rollout consumes, fully determined by (spec, model, config).
struct ScenarioStreams {
  ScenarioSpec spec;
  int steps = 0;
  std::vector<double> times;
  std::vector<HumanHandSample> human;
  std::vector<bool> vr_available;  // false inside dropouts
  std::vector<StampedPose> vr;
  MockPolicyStream policy;
  NormalizationMap normalization;
  HumanHandSample calibration;
  JointConfig robot_initial;
  JointConfig human_offset;         // human joints minus policy base joints
  double realized_misalignment = 0; // absolute-retarget landing distance at first engage
  std::vector<int> toggle_steps;    // step index of each toggle
};

/// Robot's grasp posture the scripted policy holds.
JointConfig default_policy_grasp(const HandModel& model);

/// Throws std::invalid_argument on invalid specs.
ScenarioStreams generate_scenario(const ScenarioSpec& spec, const HandModel& model,
                                  const SimConfig& cfg);

/// Writes human stream, VR stream and policy actions as JSON lines.
void write_streams(const ScenarioStreams& s, std::ostream& human, std::ostream& vr,
                   std::ostream& policy);

}  // namespace handitl
