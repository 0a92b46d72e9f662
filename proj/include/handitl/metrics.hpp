#pragma once

#include "handitl/intervene.hpp"

#include "json.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace handitl {

inline constexpr const char* kMetricsSchema = "handitl-metrics";
inline constexpr int kMetricsSchemaVersion = 1;

/// Fingertip tracking error while engaged: mean over fingers of the distance
/// between the executed fingertip and the anchored target v_rob(q0) + dv_hum.
struct TrackingSample {
  double t = 0.0;
  double error = 0.0;  // m
};

/// Arm residual and the offset it puts on the policy target.
struct DriftSample {
  double t = 0.0;
  double residual_linear = 0.0;   // m/s
  double residual_angular = 0.0;  // rad/s
  double offset_position = 0.0;   // m, fused target vs policy target
  double offset_rotation = 0.0;   // rad
};

struct RuntimeStats {
  std::size_t count = 0;
  double mean_ms = 0.0;
  double median_ms = 0.0;
  double p95_ms = 0.0;
  double max_ms = 0.0;

  static RuntimeStats from(std::vector<double> samples_ms);
};

struct MetricsReport {
  std::string scenario;
  std::uint64_t seed = 0;
  std::string method;
  int steps = 0;
  double misalignment = 0.0;           // requested
  double realized_misalignment = 0.0;  // absolute-retarget landing distance

  std::vector<double> engage_times;
  std::vector<double> release_times;
  DiscontinuityReport engage;   // jump at each engage
  DiscontinuityReport release;  // jump at each disengage

  std::vector<TrackingSample> tracking;
  double tracking_mean = 0.0;
  double tracking_max = 0.0;

  std::vector<DriftSample> drift;

  std::vector<double> solve_ms;  // per hand-command computation
  RuntimeStats runtime;
  long nonconverged_solves = 0;

  long policy_chunks = 0;
  long policy_actions = 0;
  long executed_actions = 0;

  bool aborted = false;
  std::string abort_reason;
};

enum class ReportFormat { Json, Csv };

ReportFormat report_format_from_string(const std::string& s);

nlohmann::json metrics_to_json(const MetricsReport& m);
/// Throws std::runtime_error on a schema or version mismatch.
MetricsReport metrics_from_json(const nlohmann::json& j);

/// Long-format CSV: header `metric,index,time,value`, one row per scalar or
/// series element. Numbers use round-trip precision.
void write_metrics_csv(std::ostream& out, const MetricsReport& m);
MetricsReport read_metrics_csv(std::istream& in);

void report(const MetricsReport& m, ReportFormat format, std::ostream& out);

/// Same document with wall-clock fields (solve times, runtime stats) removed.
nlohmann::json metrics_without_runtime(const MetricsReport& m);

/// Per-method aggregates over a sweep, plus per-scenario reduction of the
/// relative engage jump against teleop when both methods are present.
nlohmann::json summarize_sweep(const std::vector<MetricsReport>& runs);

}  // namespace handitl
