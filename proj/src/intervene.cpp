#include "handitl/intervene.hpp"

#include "handitl/json_util.hpp"

#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>

namespace handitl {

const char* to_string(InterventionMode m) {
  switch (m) {
    case InterventionMode::Autonomous: return "autonomous";
    case InterventionMode::FullTakeover: return "full_takeover";
    case InterventionMode::Copilot: return "copilot";
  }
  return "unknown";
}

InterventionMode intervention_mode_from_string(const std::string& s) {
  if (s == "autonomous") return InterventionMode::Autonomous;
  if (s == "full_takeover") return InterventionMode::FullTakeover;
  if (s == "copilot") return InterventionMode::Copilot;
  throw std::invalid_argument("unknown intervention mode '" + s + "'");
}

Authority authority(InterventionMode mode, const CopilotWeights& copilot) {
  switch (mode) {
    case InterventionMode::Autonomous: return {0.0, 0.0};
    case InterventionMode::FullTakeover: return {1.0, 1.0};
    case InterventionMode::Copilot: return {copilot.arm, copilot.hand};
  }
  return {};
}

ToggleOutcome toggle_intervention(InterventionState& state, InterventionMode mode,
                                  const HandModel& model, const JointConfig& q_now,
                                  const KeyVectors& human_now, double time) {
  if (mode == InterventionMode::Autonomous) {
    if (!state.engaged()) {
      state.warnings.push_back("disengage at t=" + std::to_string(time) + " while autonomous");
      return ToggleOutcome::Ignored;
    }
    state.mode = InterventionMode::Autonomous;
    state.anchor.reset();
    return ToggleOutcome::Disengaged;
  }
  if (state.engaged()) {
    state.warnings.push_back("engage at t=" + std::to_string(time) + " while already engaged");
    return ToggleOutcome::Ignored;
  }
  state.anchor = AnchorState::capture(model, q_now, human_now);
  state.mode = mode;
  state.engaged_at = time;
  state.history.push_back({time, *state.anchor});
  state.ema_lin.reset();
  state.ema_ang.reset();
  return ToggleOutcome::Engaged;
}

ToggleOutcome toggle_intervention(InterventionState& state, InterventionMode mode,
                                  const HandModel& model, const JointConfig& q_now,
                                  const HumanHandSample& human_now, const NormalizationMap& map) {
  return toggle_intervention(state, mode, model, q_now, normalize_human(human_now, map),
                             human_now.timestamp);
}

JointConfig blend_hand(const JointConfig& policy_hand, const JointConfig& human_hand, double beta) {
  if (policy_hand.size() != human_hand.size()) {
    throw DimensionError("fuse_hand: policy and human commands have different dimensions");
  }
  if (beta == 0.0) return policy_hand;
  if (beta == 1.0) return human_hand;
  return (1.0 - beta) * policy_hand + beta * human_hand;
}

JointConfig fuse_hand(const HandModel& model, const JointConfig& policy_hand,
                      const JointConfig& human_hand, double beta) {
  return project_limits(model, blend_hand(policy_hand, human_hand, beta));
}

ArmCommand fuse_arm(const ArmCommand& policy, const Twist& residual, double beta,
                    const ArmShareConfig& cfg) {
  ArmCommand out = policy;
  if (beta != 0.0) out.target = compose_target(policy.target, residual * beta, cfg);
  return out;
}

ArmCommand fuse_arm(const ArmCommand& policy, const Twist& residual, double beta,
                    ResidualComposer& composer) {
  ArmCommand out = policy;
  out.target = composer.apply(policy.target, residual * beta);
  return out;
}

DiscontinuityReport DiscontinuityReport::aggregate(std::vector<double> jumps) {
  DiscontinuityReport r;
  r.jumps = std::move(jumps);
  const auto n = r.jumps.size();
  if (n == 0) return r;
  r.mean = std::accumulate(r.jumps.begin(), r.jumps.end(), 0.0) / static_cast<double>(n);
  if (n < 2) {
    r.ci_low = r.ci_high = r.mean;
    return r;
  }
  double ss = 0.0;
  for (double j : r.jumps) ss += (j - r.mean) * (j - r.mean);
  const double sd = std::sqrt(ss / static_cast<double>(n - 1));
  double crit = 1.959963984540054;
  if (n < 30) {
    const boost::math::students_t dist(static_cast<double>(n - 1));
    crit = boost::math::quantile(dist, 0.975);
  }
  const double half = crit * sd / std::sqrt(static_cast<double>(n));
  r.ci_low = r.mean - half;
  r.ci_high = r.mean + half;
  return r;
}

DiscontinuityReport measure_discontinuity(const std::vector<FusedCommand>& log,
                                          const std::vector<double>& toggle_times) {
  std::vector<double> jumps;
  jumps.reserve(toggle_times.size());
  for (double t0 : toggle_times) {
    auto it = std::find_if(log.begin(), log.end(),
                           [t0](const FusedCommand& c) { return c.timestamp >= t0; });
    if (it == log.end() || it == log.begin()) {
      throw std::out_of_range("measure_discontinuity: toggle at t=" + std::to_string(t0) +
                              " is outside the command log");
    }
    const FusedCommand& after = *it;
    const FusedCommand& before = *(it - 1);
    if (after.hand.size() != before.hand.size()) {
      throw DimensionError("measure_discontinuity: hand command dimensions differ");
    }
    jumps.push_back((after.hand - before.hand).norm());
  }
  return DiscontinuityReport::aggregate(std::move(jumps));
}

// ---------------------------------------------------------------------------
// Serialization

nlohmann::json fused_command_to_json(const FusedCommand& c) {
  using namespace jsonio;
  return json{{"t", c.timestamp},
              {"mode", to_string(c.mode)},
              {"hand", vector(c.hand)},
              {"arm",
               {{"target", pose(c.arm.target)},
                {"commanded", twist(c.arm.commanded)},
                {"feedforward", twist(c.arm.feedforward)}}}};
}

FusedCommand fused_command_from_json(const nlohmann::json& j) {
  using namespace jsonio;
  FusedCommand c;
  c.timestamp = j.at("t").get<double>();
  c.mode = intervention_mode_from_string(j.at("mode").get<std::string>());
  c.hand = vector(j.at("hand"));
  const auto& arm = j.at("arm");
  c.arm.target = pose(arm.at("target"));
  c.arm.commanded = twist(arm.at("commanded"));
  c.arm.feedforward = twist(arm.at("feedforward"));
  return c;
}

nlohmann::json correction_record_to_json(const CorrectionRecord& r) {
  using namespace jsonio;
  return json{{"t", r.timestamp},
              {"obs", r.observation_id},
              {"intervention", r.intervention},
              {"exec", fused_command_to_json(r.executed)},
              {"policy",
               {{"hand", vector(r.policy.hand)},
                {"arm_target", pose(r.policy.arm_target)},
                {"feedforward", twist(r.policy.feedforward)}}},
              {"human",
               {{"t", r.human.timestamp},
                {"wrist", vec3(r.human.wrist_position)},
                {"thumb_distance", r.human.thumb_distances}}}};
}

CorrectionRecord correction_record_from_json(const nlohmann::json& j) {
  using namespace jsonio;
  CorrectionRecord r;
  r.timestamp = j.at("t").get<double>();
  r.observation_id = j.at("obs").get<std::string>();
  r.intervention = j.at("intervention").get<bool>();
  r.executed = fused_command_from_json(j.at("exec"));
  const auto& p = j.at("policy");
  r.policy.hand = vector(p.at("hand"));
  r.policy.arm_target = pose(p.at("arm_target"));
  r.policy.feedforward = twist(p.at("feedforward"));
  const auto& h = j.at("human");
  r.human.timestamp = h.at("t").get<double>();
  r.human.wrist_position = vec3(h.at("wrist"));
  r.human.thumb_distances = h.at("thumb_distance").get<std::vector<double>>();
  return r;
}

CorrectionLog::CorrectionLog(std::ostream& out, nlohmann::json meta) : out_(&out) {
  header_ = {{"format", kCorrectionLogFormat},
             {"version", kCorrectionLogVersion},
             {"meta", std::move(meta)}};
  *out_ << header_.dump() << '\n';
  out_->flush();
  if (!*out_) throw LogError("correction log: failed to write header");
}

void record_step(CorrectionLog& sink, const CorrectionRecord& record) {
  if (record.timestamp < sink.last_time_) {
    throw LogError("correction log: record at t=" + std::to_string(record.timestamp) +
                   " is older than the previous record");
  }
  if (record.intervention != (record.executed.mode != InterventionMode::Autonomous)) {
    throw LogError("correction log: intervention flag disagrees with the executed mode");
  }
  *sink.out_ << correction_record_to_json(record).dump() << '\n';
  sink.out_->flush();
  if (!*sink.out_) throw LogError("correction log: write failed");
  sink.last_time_ = record.timestamp;
  ++sink.count_;
}

void CorrectionLog::markAborted(const std::string& reason) {
  *out_ << nlohmann::json{{"aborted", true}, {"reason", reason}}.dump() << '\n';
  out_->flush();
  if (!*out_) throw LogError("correction log: write failed");
}

namespace {

nlohmann::json parse_header(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw LogError("correction log: missing header");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw LogError(std::string("correction log: bad header: ") + e.what());
  }
  if (header.value("format", std::string{}) != kCorrectionLogFormat) {
    throw LogError("correction log: unexpected format tag");
  }
  if (header.value("version", 0) != kCorrectionLogVersion) {
    throw LogError("correction log: unsupported version");
  }
  return header;
}

}  // namespace

LoadedLog read_correction_log(std::istream& in) {
  LoadedLog log;
  log.header = parse_header(in);
  std::string line;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      if (j.contains("aborted")) {
        log.aborted = true;
        log.abort_reason = j.value("reason", std::string{});
        continue;
      }
      log.records.push_back(correction_record_from_json(j));
      log.record_lines.push_back(line);
    } catch (const std::exception& e) {
      throw LogError("correction log line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return log;
}

std::size_t export_interventions(std::istream& in, std::ostream& out) {
  const nlohmann::json header = parse_header(in);
  out << header.dump() << '\n';
  std::size_t written = 0;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto j = nlohmann::json::parse(line);
    if (j.value("intervention", false)) {
      out << line << '\n';
      ++written;
    }
  }
  if (!out) throw LogError("export: write failed");
  return written;
}

}  // namespace handitl
