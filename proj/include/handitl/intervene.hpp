#pragma once

#include "handitl/armshare.hpp"
#include "handitl/hand_model.hpp"
#include "handitl/keyvec.hpp"
#include "handitl/relretarget.hpp"

#include "json.hpp"

#include <iosfwd>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace handitl {

enum class InterventionMode { Autonomous, FullTakeover, Copilot };

const char* to_string(InterventionMode m);
InterventionMode intervention_mode_from_string(const std::string& s);

/// Human authority weights. Autonomous is (0, 0) and full takeover (1, 1);
/// copilot uses the configured weights.
struct Authority {
  double arm = 0.0;
  double hand = 0.0;
};

struct CopilotWeights {
  double arm = 0.3;
  double hand = 0.3;
};

Authority authority(InterventionMode mode, const CopilotWeights& copilot = {});

/// What the policy asked for at one control step.
struct PolicyCommand {
  JointConfig hand;
  Pose arm_target;
  Twist feedforward;
};

struct FusedCommand {
  ArmCommand arm;
  JointConfig hand;
  InterventionMode mode = InterventionMode::Autonomous;
  double timestamp = 0.0;
};

struct AnchorRecord {
  double time = 0.0;
  AnchorState anchor;
};

struct InterventionState {
  InterventionMode mode = InterventionMode::Autonomous;
  std::optional<AnchorState> anchor;
  double engaged_at = 0.0;
  std::vector<AnchorRecord> history;
  EmaFilter ema_lin;
  EmaFilter ema_ang;
  std::vector<std::string> warnings;

  explicit InterventionState(double ema_coefficient = EmaFilter::kDefaultCoefficient)
      : ema_lin(ema_coefficient), ema_ang(ema_coefficient) {}

  bool engaged() const { return mode != InterventionMode::Autonomous; }
};

enum class ToggleOutcome { Engaged, Disengaged, Ignored };

/// Engaging captures the anchor (q_now, its robot key vectors, the current
/// normalized human key vectors) and resets the arm EMA filters. Requesting
/// Autonomous disengages and clears the anchor. Engaging while already engaged,
/// or disengaging while autonomous, changes nothing and records a warning.
ToggleOutcome toggle_intervention(InterventionState& state, InterventionMode mode,
                                  const HandModel& model, const JointConfig& q_now,
                                  const KeyVectors& human_now, double time);

ToggleOutcome toggle_intervention(InterventionState& state, InterventionMode mode,
                                  const HandModel& model, const JointConfig& q_now,
                                  const HumanHandSample& human_now, const NormalizationMap& map);

/// Joint-wise (1 - beta) * policy + beta * human, without clamping.
JointConfig blend_hand(const JointConfig& policy_hand, const JointConfig& human_hand, double beta);

/// blend_hand followed by projection onto the joint limits.
JointConfig fuse_hand(const HandModel& model, const JointConfig& policy_hand,
                      const JointConfig& human_hand, double beta);

/// Residual arm fusion: target = compose_target(policy target, beta * residual);
/// the policy's commanded and feedforward twists pass through.
ArmCommand fuse_arm(const ArmCommand& policy, const Twist& residual, double beta,
                    const ArmShareConfig& cfg);
ArmCommand fuse_arm(const ArmCommand& policy, const Twist& residual, double beta,
                    ResidualComposer& composer);

struct DiscontinuityReport {
  std::vector<double> jumps;  // rad, joint-space L2, one per toggle
  double mean = 0.0;
  double ci_low = 0.0;   // 95% interval on the mean
  double ci_high = 0.0;

  /// Mean with a Student-t interval below 30 samples, normal above.
  static DiscontinuityReport aggregate(std::vector<double> jumps);
};

/// Hand-command jump across each toggle time. The command at or after t0 is
/// t0+, the one before it t0-. Throws std::out_of_range if a toggle has no
/// command on either side.
DiscontinuityReport measure_discontinuity(const std::vector<FusedCommand>& log,
                                          const std::vector<double>& toggle_times);

// ---------------------------------------------------------------------------
// Correction log

struct HumanSummary {
  double timestamp = 0.0;
  Vec3 wrist_position = Vec3::Zero();
  std::vector<double> thumb_distances;  // fingers 1..n-1
};

struct CorrectionRecord {
  double timestamp = 0.0;
  std::string observation_id;
  FusedCommand executed;
  PolicyCommand policy;
  HumanSummary human;
  bool intervention = false;
};

class LogError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr const char* kCorrectionLogFormat = "handitl-correction-log";
inline constexpr int kCorrectionLogVersion = 1;

nlohmann::json fused_command_to_json(const FusedCommand& c);
FusedCommand fused_command_from_json(const nlohmann::json& j);
nlohmann::json correction_record_to_json(const CorrectionRecord& r);
CorrectionRecord correction_record_from_json(const nlohmann::json& j);

/// Append-only JSON-lines sink: a header line, then one record per control
/// step. Each record is flushed as it is written.
class CorrectionLog {
 public:
  /// Writes the header immediately. `meta` is stored verbatim in the header.
  CorrectionLog(std::ostream& out, nlohmann::json meta);

  const nlohmann::json& header() const { return header_; }
  std::size_t size() const { return count_; }

  friend void record_step(CorrectionLog& sink, const CorrectionRecord& record);
  /// Terminal line marking an aborted rollout.
  void markAborted(const std::string& reason);

 private:
  std::ostream* out_;
  nlohmann::json header_;
  std::size_t count_ = 0;
  double last_time_ = -std::numeric_limits<double>::infinity();
};

/// Throws LogError on ordering violations (timestamps must not decrease), on a
/// flag that disagrees with the executed mode, and on stream failures.
void record_step(CorrectionLog& sink, const CorrectionRecord& record);

struct LoadedLog {
  nlohmann::json header;
  std::vector<CorrectionRecord> records;
  std::vector<std::string> record_lines;  // raw JSON text per record
  bool aborted = false;
  std::string abort_reason;
};

LoadedLog read_correction_log(std::istream& in);

/// Copies the header and only records whose intervention flag is set.
/// Returns the number of records written.
std::size_t export_interventions(std::istream& in, std::ostream& out);

}  // namespace handitl
