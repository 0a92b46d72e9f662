#pragma once

#include "handitl/config.hpp"
#include "handitl/hand_model.hpp"
#include "handitl/intervene.hpp"
#include "handitl/metrics.hpp"
#include "handitl/scenario.hpp"

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace handitl {

/// Hand retargeter used for the human command while an intervention is engaged.
enum class Method { Relative, Jacobian, DeltaCmd, Teleop };

const char* to_string(Method m);
Method method_from_string(const std::string& s);
std::vector<Method> all_methods();

struct RolloutResult {
  std::vector<FusedCommand> commands;
  std::vector<CorrectionRecord> records;
  MetricsReport metrics;
  std::vector<AnchorRecord> anchors;
  std::vector<std::string> warnings;
  bool aborted = false;
};

/// Header metadata that makes a correction log replayable on its own:
/// scenario, method, config and the hand model.
nlohmann::json rollout_meta(const ScenarioSpec& spec, Method method, const HandModel& model,
                            const SimConfig& cfg);

/// Closed-loop kinematic replay. Each step executes the first action of a fresh
/// policy chunk, fuses it with the human command under the current mode, tracks
/// the fused arm target with the PD law and takes the executed hand command as
/// the next robot state. If `log` is given every record is appended to it as it
/// is produced. A solver failure stops the rollout and marks the log aborted.
RolloutResult run_rollout(const ScenarioStreams& streams, Method method, const HandModel& model,
                          const SimConfig& cfg, std::ostream* log = nullptr);

RolloutResult run_rollout(const ScenarioSpec& spec, Method method, const HandModel& model,
                          const SimConfig& cfg, std::ostream* log = nullptr);

struct ReplayResult {
  std::size_t compared = 0;
  bool identical = false;
  std::optional<std::size_t> first_mismatch;  // record index
  std::string detail;
};

/// Re-runs the rollout described by a correction log's header and compares
/// every recomputed FusedCommand bit-for-bit with the logged one (through its
/// exact serialized form).
ReplayResult replay_log(std::istream& log);

bool bitwise_equal(const FusedCommand& a, const FusedCommand& b);

/// One metrics report per (spec, method), ordered spec-major. Runs on up to
/// `threads` workers; each rollout is sequential. When `log_dir` is set, each
/// rollout's correction log is written there as <name>_s<seed>_<method>.jsonl.
std::vector<MetricsReport> run_sweep(const std::vector<ScenarioSpec>& specs,
                                     const std::vector<Method>& methods, const HandModel& model,
                                     const SimConfig& cfg, unsigned threads = 1,
                                     const std::optional<std::filesystem::path>& log_dir = {});

std::string rollout_basename(const ScenarioSpec& spec, Method method);

}  // namespace handitl
