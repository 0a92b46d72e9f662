#include "handitl/rollout.hpp"
#include "handitl/scenario.hpp"

#include "doctest.h"

#include <filesystem>
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

std::string dump_streams(const ScenarioStreams& s) {
  std::ostringstream h, v, p;
  write_streams(s, h, v, p);
  return h.str() + "|" + v.str() + "|" + p.str();
}

}  // namespace

TEST_CASE("same seed gives byte-identical streams") {
  const HandModel model = default_hand_model();
  const SimConfig cfg;
  const std::string a = dump_streams(generate_scenario(spec_with(3, 0.4), model, cfg));
  const std::string b = dump_streams(generate_scenario(spec_with(3, 0.4), model, cfg));
  CHECK(a == b);
  CHECK(a != dump_streams(generate_scenario(spec_with(4, 0.4), model, cfg)));
}

TEST_CASE("aligned scenario: absolute and relative commands agree at engage") {
  const HandModel model = default_hand_model();
  const SimConfig cfg;
  for (std::uint64_t seed : {1, 2, 3}) {
    const ScenarioStreams streams = generate_scenario(spec_with(seed, 0.0), model, cfg);
    const RolloutResult rel = run_rollout(streams, Method::Relative, model, cfg);
    const RolloutResult tel = run_rollout(streams, Method::Teleop, model, cfg);
    const int k0 = streams.toggle_steps.front();
    const auto k = static_cast<std::size_t>(k0);
    CHECK((rel.commands[k].hand - tel.commands[k].hand).norm() <= 5e-3);
    CHECK(tel.metrics.engage.jumps.front() <= 5e-3);
    CHECK(streams.realized_misalignment <= 5e-3);
  }
}

TEST_CASE("misalignment 0.5 gives a direct-switch jump in [0.4, 0.6]") {
  const HandModel model = default_hand_model();
  const SimConfig cfg;
  for (std::uint64_t seed : {1, 2, 3, 4, 5}) {
    const ScenarioStreams streams = generate_scenario(spec_with(seed, 0.5), model, cfg);
    const RolloutResult tel = run_rollout(streams, Method::Teleop, model, cfg);
    const double first = tel.metrics.engage.jumps.front();
    CHECK(first >= 0.4);
    CHECK(first <= 0.6);
  }
}

TEST_CASE("three toggles give three jump entries") {
  const HandModel model = default_hand_model();
  const SimConfig cfg;
  const ScenarioStreams streams = generate_scenario(spec_with(6, 0.3), model, cfg);
  CHECK(streams.toggle_steps.size() == 6);
  for (Method m : all_methods()) {
    const RolloutResult r = run_rollout(streams, m, model, cfg);
    CHECK(r.metrics.engage.jumps.size() == 3);
    CHECK(r.metrics.release.jumps.size() == 3);
    CHECK(r.anchors.size() == 3);
  }
}

TEST_CASE("only the first action of each chunk is executed") {
  const HandModel model = default_hand_model();
  SimConfig cfg;
  cfg.policy_horizon = 5;
  const ScenarioStreams streams = generate_scenario(spec_with(7, 0.3), model, cfg);
  const RolloutResult r = run_rollout(streams, Method::Relative, model, cfg);
  CHECK(r.metrics.steps == streams.steps);
  CHECK(r.metrics.policy_chunks == streams.steps);
  CHECK(r.metrics.executed_actions == streams.steps);
  CHECK(r.metrics.policy_actions == 5L * streams.steps);
}

TEST_CASE("mock policy is continuous and chunks start at the requested step") {
  const HandModel model = default_hand_model();
  const SimConfig cfg;
  ScenarioStreams streams = generate_scenario(spec_with(8, 0.3), model, cfg);
  const PolicyChunk chunk = streams.policy.predict(10);
  REQUIRE(chunk.actions.size() == static_cast<std::size_t>(cfg.policy_horizon));
  CHECK(chunk.actions[0].hand == streams.policy.actionAt(10).hand);
  CHECK(chunk.actions[3].hand == streams.policy.actionAt(13).hand);
  for (int k = 0; k < streams.steps; ++k) {
    const PolicyCommand a = streams.policy.actionAt(k), b = streams.policy.actionAt(k + 1);
    CHECK((a.hand - b.hand).norm() < 0.01);
    // Peak arm speed is A w sqrt(1 + 1 + 0.09).
    CHECK((a.arm_target.position - b.arm_target.position).norm() < 0.0015);
  }
}

TEST_CASE("streams cover the scenario and honour VR dropouts") {
  const HandModel model = default_hand_model();
  const SimConfig cfg;
  ScenarioSpec spec = spec_with(9, 0.3);
  spec.vr_dropouts = {{1.0, 1.2}};
  const ScenarioStreams s = generate_scenario(spec, model, cfg);
  CHECK(s.steps == 200);
  CHECK(s.human.size() == 200);
  for (int k = 0; k < s.steps; ++k) {
    const double t = s.times[static_cast<std::size_t>(k)];
    CHECK(s.vr_available[static_cast<std::size_t>(k)] == !(t >= 1.0 && t < 1.2));
  }
  for (std::size_t i = 1; i < s.human.size(); ++i) CHECK(s.human[i].timestamp > s.human[i - 1].timestamp);
}

TEST_CASE("invalid specs are rejected") {
  const HandModel model = default_hand_model();
  const SimConfig cfg;
  ScenarioSpec s = spec_with(1, -0.1);
  CHECK_THROWS_AS(generate_scenario(s, model, cfg), std::invalid_argument);
  s = spec_with(1, 0.3);
  s.toggles.push_back({99.0, InterventionMode::FullTakeover});
  CHECK_THROWS_AS(generate_scenario(s, model, cfg), std::invalid_argument);
  s = spec_with(1, 0.3);
  s.toggles = {{2.0, InterventionMode::FullTakeover}, {1.0, InterventionMode::Autonomous}};
  CHECK_THROWS_AS(generate_scenario(s, model, cfg), std::invalid_argument);
  s = spec_with(1, 0.3);
  s.duration = 0.0;
  CHECK_THROWS_AS(s.validate(), std::invalid_argument);
  s = spec_with(1, 0.3);
  s.finger_curves = {FingerCurve{}};
  CHECK_THROWS_AS(generate_scenario(s, model, cfg), std::invalid_argument);
  s = spec_with(1, 0.3);
  s.vr_dropouts = {{2.0, 1.0}};
  CHECK_THROWS_AS(s.validate(), std::invalid_argument);
}

TEST_CASE("scenario JSON roundtrip and shipped fixtures") {
  ScenarioSpec s = spec_with(12, 0.35);
  s.vr_dropouts = {{0.5, 0.6}};
  s.finger_curves = std::vector<FingerCurve>(5, FingerCurve{0.1, 0.5, 0.2});
  const ScenarioSpec back = scenario_from_json(scenario_to_json(s));
  CHECK(scenario_to_json(back) == scenario_to_json(s));
  for (const char* name : {"fixture.json", "pinch.json"}) {
    const ScenarioSpec f = load_scenario(kSource / "scenarios" / name);
    CHECK_NOTHROW(f.validate());
  }
  const ScenarioSpec no_toggles = scenario_from_json({{"name", "x"}, {"duration", 3.0}});
  CHECK(no_toggles.toggles.size() == 6);
}
