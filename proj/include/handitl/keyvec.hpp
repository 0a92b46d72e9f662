#pragma once

#include "handitl/hand_model.hpp"
#include "handitl/spatial.hpp"

#include <filesystem>
#include <iosfwd>
#include <vector>

namespace handitl {

/// Hand shape descriptors in the robot wrist frame.
///
/// `opposition` has one entry per finger so that indices line up with
/// `wrist_to_tip`; entry j is the thumb-tip to fingertip-j vector and is always
/// computed as `wrist_to_tip[j] - wrist_to_tip[thumb]` (the thumb entry is zero).
struct KeyVectors {
  std::vector<Vec3> wrist_to_tip;
  std::vector<Vec3> opposition;

  int fingerCount() const { return static_cast<int>(wrist_to_tip.size()); }
  /// Builds the opposition family from wrist-to-tip vectors.
  static KeyVectors fromWristToTip(std::vector<Vec3> wrist_to_tip);
};

/// Changes of every key vector since the anchor. Same layout as KeyVectors.
using RelativeDeltas = KeyVectors;

/// One glove/tracker sample of the operator's hand, world frame.
struct HumanHandSample {
  double timestamp = 0.0;
  Pose wrist;
  std::vector<Vec3> tips;
};

/// Human-wrist to robot-wrist frame change plus per-finger length scale.
struct NormalizationMap {
  Rotation robot_from_human;
  std::vector<double> scale;
};

KeyVectors robot_keyvectors(const HandModel& model, const JointConfig& q);

/// v_i = s_i * R_map * R_wrist^T * (tip_i - wrist).
KeyVectors normalize_human(const HumanHandSample& sample, const NormalizationMap& map);

RelativeDeltas relative_deltas(const KeyVectors& current, const KeyVectors& anchor);

/// Length of the thumb-to-`finger` opposition vector. Throws for the thumb.
double thumb_distance(const KeyVectors& kv, int finger);

/// Per-finger scale from one calibration sample: robot wrist-to-tip length at
/// `robot_reference` over the human wrist-to-tip length in `calibration`.
NormalizationMap calibrate_normalization(const HandModel& model, const JointConfig& robot_reference,
                                         const HumanHandSample& calibration,
                                         const Rotation& robot_from_human = Rotation());

// Human stream: one JSON object per line,
// {"t": s, "wrist": {"position": [..], "quaternion": [w,x,y,z]}, "tips": [[x,y,z] x 5]}.
nlohmann::json human_sample_to_json(const HumanHandSample& s);
HumanHandSample human_sample_from_json(const nlohmann::json& j);
void write_human_stream(std::ostream& out, const std::vector<HumanHandSample>& samples);
/// Throws std::runtime_error on malformed lines or non-monotone timestamps.
std::vector<HumanHandSample> read_human_stream(std::istream& in);

}  // namespace handitl
