#include "handitl/metrics.hpp"
#include "handitl/rollout.hpp"

#include "doctest.h"

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace handitl;

namespace {

const std::filesystem::path kSource(HANDITL_SOURCE_DIR);

ScenarioSpec spec_with(std::uint64_t seed, double m) {
  ScenarioSpec s;
  s.name = "unit";
  s.seed = seed;
  s.misalignment = m;
  s.toggles = ScenarioSpec::defaultToggles(s.duration);
  return s;
}

std::string log_text(const ScenarioSpec& spec, Method method) {
  std::ostringstream out;
  run_rollout(spec, method, default_hand_model(), SimConfig{}, &out);
  return out.str();
}

// Structural equality with a relative tolerance on numbers.
void check_close(const nlohmann::json& a, const nlohmann::json& b, const std::string& path) {
  INFO(path);
  if (a.is_number() && b.is_number()) {
    const double x = a.get<double>(), y = b.get<double>();
    CHECK(std::abs(x - y) <= 1e-9 * std::max({1.0, std::abs(x), std::abs(y)}));
    return;
  }
  REQUIRE(a.type() == b.type());
  if (a.is_object()) {
    REQUIRE(a.size() == b.size());
    for (auto it = a.begin(); it != a.end(); ++it) {
      REQUIRE(b.contains(it.key()));
      check_close(it.value(), b.at(it.key()), path + "/" + it.key());
    }
  } else if (a.is_array()) {
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) check_close(a[i], b[i], path + "/" + std::to_string(i));
  } else {
    CHECK(a == b);
  }
}

double mean_tracking(const std::vector<MetricsReport>& runs, const std::string& method) {
  double sum = 0.0;
  int n = 0;
  for (const auto& r : runs) {
    if (r.method != method) continue;
    sum += r.tracking_mean;
    ++n;
  }
  return sum / n;
}

}  // namespace

TEST_CASE("method names") {
  for (Method m : all_methods()) CHECK(method_from_string(to_string(m)) == m);
  CHECK_THROWS(method_from_string("absolute"));
}

TEST_CASE("relative retargeting tracks the operator better than delta commands") {
  const HandModel model = default_hand_model();
  const SimConfig cfg;
  std::vector<ScenarioSpec> slow, fast;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    slow.push_back(spec_with(seed, 0.2 + 0.03 * static_cast<double>(seed)));
    ScenarioSpec f = spec_with(seed, 0.3);
    f.finger_curves = std::vector<FingerCurve>(5, FingerCurve{0.15, 1.0, 0.0});
    fast.push_back(f);
  }
  for (const auto* specs : {&slow, &fast}) {
    const auto runs = run_sweep(*specs, {Method::Relative, Method::DeltaCmd}, model, cfg);
    const double rel = mean_tracking(runs, "relative");
    const double dcmd = mean_tracking(runs, "deltacmd");
    CHECK(rel < dcmd);
    for (const auto& r : runs) CHECK(r.engage.mean <= 1e-6);
  }
}

TEST_CASE("relative engage jumps vanish while direct switching jumps") {
  const HandModel model = default_hand_model();
  const SimConfig cfg;
  const ScenarioStreams s = generate_scenario(spec_with(21, 0.6), model, cfg);
  const RolloutResult rel = run_rollout(s, Method::Relative, model, cfg);
  const RolloutResult tel = run_rollout(s, Method::Teleop, model, cfg);
  CHECK(rel.metrics.engage.mean <= 1e-6);
  CHECK(tel.metrics.engage.mean >= 1e-2);
  CHECK(rel.metrics.engage.mean <= 0.01 * tel.metrics.engage.mean);
}

TEST_CASE("identical seeds give byte-identical correction logs") {
  for (Method m : all_methods()) {
    const std::string a = log_text(spec_with(5, 0.4), m);
    CHECK(a == log_text(spec_with(5, 0.4), m));
    CHECK(a != log_text(spec_with(6, 0.4), m));
  }
}

TEST_CASE("replaying a log reproduces every command") {
  for (Method m : all_methods()) {
    std::istringstream in(log_text(spec_with(9, 0.5), m));
    const ReplayResult r = replay_log(in);
    CHECK(r.identical);
    CHECK(r.compared == 200);
    CHECK_FALSE(r.first_mismatch.has_value());
  }
}

TEST_CASE("replay detects a tampered record") {
  std::string text = log_text(spec_with(9, 0.5), Method::Relative);
  std::istringstream lines(text);
  std::string line, out;
  int n = 0;
  while (std::getline(lines, line)) {
    if (n == 50) {
      auto j = nlohmann::json::parse(line);
      j["exec"]["hand"][3] = j["exec"]["hand"][3].get<double>() + 1e-12;
      line = j.dump();
    }
    out += line + "\n";
    ++n;
  }
  std::istringstream in(out);
  const ReplayResult r = replay_log(in);
  CHECK_FALSE(r.identical);
  REQUIRE(r.first_mismatch.has_value());
  CHECK(*r.first_mismatch == 49);
}

TEST_CASE("correction log covers the whole rollout with consistent flags") {
  std::istringstream in(log_text(spec_with(10, 0.3), Method::Relative));
  const LoadedLog log = read_correction_log(in);
  REQUIRE(log.records.size() == 200);
  int transitions = 0;
  for (std::size_t i = 0; i < log.records.size(); ++i) {
    CHECK(log.records[i].intervention == (log.records[i].executed.mode != InterventionMode::Autonomous));
    if (i > 0 && log.records[i].intervention != log.records[i - 1].intervention) ++transitions;
  }
  CHECK(transitions == 6);
  CHECK(log.header.at("meta").at("method") == "relative");
}

TEST_CASE("metrics JSON and CSV roundtrip") {
  const RolloutResult r = run_rollout(spec_with(11, 0.4), Method::Relative, default_hand_model(), SimConfig{});
  const nlohmann::json j = metrics_to_json(r.metrics);
  CHECK(metrics_to_json(metrics_from_json(j)) == j);
  std::stringstream csv;
  write_metrics_csv(csv, r.metrics);
  CHECK(metrics_to_json(read_metrics_csv(csv)) == j);
}

TEST_CASE("empty metrics serialize to valid documents") {
  const MetricsReport empty;
  const nlohmann::json j = metrics_to_json(empty);
  CHECK(j.at("schema") == kMetricsSchema);
  CHECK(metrics_to_json(metrics_from_json(j)) == j);
  std::stringstream csv;
  write_metrics_csv(csv, empty);
  CHECK(metrics_to_json(read_metrics_csv(csv)) == j);
  std::stringstream out;
  report(empty, ReportFormat::Json, out);
  CHECK(nlohmann::json::parse(out.str()) == j);
  nlohmann::json wrong = j;
  wrong["version"] = 99;
  CHECK_THROWS(metrics_from_json(wrong));
}

TEST_CASE("fixture scenario metrics match the golden file") {
  const ScenarioSpec spec = load_scenario(kSource / "scenarios" / "fixture.json");
  const std::filesystem::path golden = kSource / "tests" / "golden" / "fixture_relative_metrics.json";
  const RolloutResult r = run_rollout(spec, Method::Relative, default_hand_model(), SimConfig{});
  const nlohmann::json got = metrics_without_runtime(r.metrics);
  if (std::getenv("HANDITL_UPDATE_GOLDEN")) {
    std::filesystem::create_directories(golden.parent_path());
    std::ofstream(golden) << got.dump(2) << '\n';
  }
  std::ifstream in(golden);
  REQUIRE(in.good());
  check_close(nlohmann::json::parse(in), got, "");
  CHECK_FALSE(got.contains("runtime"));
}

TEST_CASE("sweep summary pairs relative with teleop") {
  std::vector<ScenarioSpec> specs;
  for (std::uint64_t seed = 1; seed <= 4; ++seed) specs.push_back(spec_with(seed, 0.5));
  const auto runs = run_sweep(specs, {Method::Relative, Method::Teleop}, default_hand_model(), SimConfig{}, 2);
  REQUIRE(runs.size() == 8);
  CHECK(runs[0].method == "relative");
  CHECK(runs[1].method == "teleop");
  CHECK(runs[2].seed == 2);
  const nlohmann::json summary = summarize_sweep(runs);
  CHECK(summary.at("relative_vs_teleop").at("paired_scenarios") == 4);
  CHECK(summary.at("relative_vs_teleop").at("min_reduction").get<double>() >= 0.99);
  const auto serial = run_sweep(specs, {Method::Relative, Method::Teleop}, default_hand_model(), SimConfig{}, 1);
  for (std::size_t i = 0; i < runs.size(); ++i) {
    CHECK(metrics_without_runtime(runs[i]) == metrics_without_runtime(serial[i]));
  }
}

TEST_CASE("solver failure aborts with a flagged partial log") {
  const HandModel model = default_hand_model();
  const SimConfig cfg;
  ScenarioStreams s = generate_scenario(spec_with(12, 0.3), model, cfg);
  const int k_bad = s.toggle_steps.front() + 5;
  s.human[static_cast<std::size_t>(k_bad)].tips[2].x() = std::nan("");
  std::ostringstream out;
  const RolloutResult r = run_rollout(s, Method::Relative, model, cfg, &out);
  CHECK(r.aborted);
  CHECK(r.metrics.aborted);
  CHECK_FALSE(r.metrics.abort_reason.empty());
  std::istringstream in(out.str());
  const LoadedLog log = read_correction_log(in);
  CHECK(log.aborted);
  CHECK(log.records.size() == static_cast<std::size_t>(k_bad));
}
