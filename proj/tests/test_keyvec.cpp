#include "handitl/keyvec.hpp"
#include "reference.hpp"

#include "checks.hpp"
#include "doctest.h"

#include <numbers>
#include <random>
#include <sstream>

using namespace handitl;

namespace {

HumanHandSample sample_at(const Pose& wrist, const std::vector<Vec3>& local_tips, double t = 0.0) {
  HumanHandSample s;
  s.timestamp = t;
  s.wrist = wrist;
  for (const Vec3& p : local_tips) s.tips.push_back(wrist.transformPoint(p));
  return s;
}

std::vector<Vec3> fixture_tips() {
  return {Vec3(0.02, -0.05, 0.06), Vec3(0.03, -0.02, 0.15), Vec3(0.03, 0.00, 0.16),
          Vec3(0.03, 0.02, 0.15), Vec3(0.03, 0.04, 0.13)};
}

NormalizationMap unit_map(std::size_t n) { return {Rotation(), std::vector<double>(n, 1.0)}; }

}  // namespace

TEST_CASE("opposition entries are tip differences and the thumb entry is zero") {
  const KeyVectors kv = KeyVectors::fromWristToTip(fixture_tips());
  CHECK(kv.opposition[0].isZero(0.0));
  for (std::size_t j = 1; j < 5; ++j) CHECK(kv.opposition[j] == kv.wrist_to_tip[j] - kv.wrist_to_tip[0]);
}

TEST_CASE("robot key vectors of the straight toy finger") {
  const KeyVectors kv = robot_keyvectors(toy_finger_model(), Eigen::Vector2d(0, 0));
  REQUIRE(kv.fingerCount() == 1);
  CHECK((kv.wrist_to_tip[0] - Vec3(0.07, 0, 0)).norm() < 1e-15);
}

TEST_CASE("robot key vectors of the default model match the FK oracle") {
  const HandModel model = default_hand_model();
  const JointConfig q = JointConfig::Zero(model.dof());
  const KeyVectors kv = robot_keyvectors(model, q);
  const auto tips = ref::fingertips(model, q);
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK((kv.wrist_to_tip[i] - tips[i]).norm() < 1e-12);
    CHECK((kv.opposition[i] - (tips[i] - tips[0])).norm() < 1e-12);
  }
}

TEST_CASE("identity map returns raw fingertip offsets") {
  const auto local = fixture_tips();
  const KeyVectors kv = normalize_human(sample_at(Pose{}, local), unit_map(5));
  for (std::size_t i = 0; i < 5; ++i) CHECK((kv.wrist_to_tip[i] - local[i]).norm() < 1e-15);
}

TEST_CASE("uniform human scaling cancels against inverse scale factors") {
  const auto local = fixture_tips();
  const double lambda = 1.3;
  std::vector<Vec3> scaled;
  for (const Vec3& p : local) scaled.push_back(lambda * p);
  const Pose wrist{Vec3(0.4, -0.1, 0.9), so3_exp(Vec3(0.2, 0.1, -0.5))};
  const NormalizationMap small{so3_exp(Vec3(0, 0, 0.3)), std::vector<double>(5, 0.8)};
  const NormalizationMap large{small.robot_from_human, std::vector<double>(5, 0.8 / lambda)};
  const KeyVectors a = normalize_human(sample_at(wrist, local), small);
  const KeyVectors b = normalize_human(sample_at(wrist, scaled), large);
  for (std::size_t i = 0; i < 5; ++i) CHECK((a.wrist_to_tip[i] - b.wrist_to_tip[i]).norm() < 1e-15);
}

TEST_CASE("normalization is invariant to the human wrist pose") {
  const auto local = fixture_tips();
  const NormalizationMap map{so3_exp(Vec3(0.1, -0.2, 0.3)), {1.1, 0.9, 1.0, 0.95, 1.05}};
  const KeyVectors a = normalize_human(sample_at(Pose{}, local), map);
  const KeyVectors b = normalize_human(sample_at(Pose{Vec3(1, 2, 3), so3_exp(Vec3(0.7, -0.4, 1.1))}, local), map);
  for (std::size_t i = 0; i < 5; ++i) CHECK((a.wrist_to_tip[i] - b.wrist_to_tip[i]).norm() < 1e-14);
}

TEST_CASE("golden normalization by hand arithmetic") {
  // Wrist at (1, 0, 0) turned a quarter about z; map turns a quarter back
  // about x; thumb scale 2.
  HumanHandSample s;
  s.wrist = Pose{Vec3(1, 0, 0), so3_exp(Vec3(0, 0, std::numbers::pi / 2))};
  // World tip (1, 0.1, 0): wrist-local (0.1, 0, 0). Map about x keeps x.
  // World tip (1, 0, 0.2): wrist-local (0, 0, 0.2). Map about x: (0, -0.2, 0).
  s.tips = {Vec3(1, 0.1, 0), Vec3(1, 0, 0.2)};
  const NormalizationMap map{so3_exp(Vec3(std::numbers::pi / 2, 0, 0)), {2.0, 1.0}};
  const KeyVectors kv = normalize_human(s, map);
  CHECK((kv.wrist_to_tip[0] - Vec3(0.2, 0, 0)).norm() < 1e-15);
  CHECK((kv.wrist_to_tip[1] - Vec3(0, -0.2, 0)).norm() < 1e-15);
  CHECK((kv.opposition[1] - Vec3(-0.2, -0.2, 0)).norm() < 1e-15);
}

TEST_CASE("normalization rejects mismatched scale count") {
  const HumanHandSample s = sample_at(Pose{}, fixture_tips());
  CHECK_THROWS(normalize_human(s, unit_map(4)));
}

TEST_CASE("relative deltas") {
  std::mt19937_64 rng(21);
  const KeyVectors a = KeyVectors::fromWristToTip(fixture_tips());
  const RelativeDeltas same = relative_deltas(a, a);
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK(same.wrist_to_tip[i].isZero(0.0));
    CHECK(same.opposition[i].isZero(0.0));
  }
  const KeyVectors zero = KeyVectors::fromWristToTip(std::vector<Vec3>(5, Vec3::Zero()));
  const RelativeDeltas d0 = relative_deltas(a, zero);
  for (std::size_t i = 0; i < 5; ++i) CHECK(d0.wrist_to_tip[i] == a.wrist_to_tip[i]);
  for (int n = 0; n < 100; ++n) {
    std::vector<Vec3> x, y;
    for (int i = 0; i < 5; ++i) {
      x.push_back(checks::random_vec(rng, 0.1));
      y.push_back(checks::random_vec(rng, 0.1));
    }
    const RelativeDeltas d = relative_deltas(KeyVectors::fromWristToTip(x), KeyVectors::fromWristToTip(y));
    for (std::size_t i = 0; i < 5; ++i) {
      CHECK(d.wrist_to_tip[i] == x[i] - y[i]);
      CHECK((d.opposition[i] - ((x[i] - x[0]) - (y[i] - y[0]))).norm() < 1e-15);
    }
  }
  CHECK_THROWS_AS(relative_deltas(a, KeyVectors::fromWristToTip({Vec3::Zero()})), DimensionError);
}

TEST_CASE("thumb distance") {
  const KeyVectors flat = KeyVectors::fromWristToTip(std::vector<Vec3>(5, Vec3(0.1, 0, 0)));
  CHECK(thumb_distance(flat, 2) == 0.0);
  const KeyVectors kv = KeyVectors::fromWristToTip(
      {Vec3::Zero(), Vec3(0.03, 0.04, 0), Vec3::Zero(), Vec3::Zero(), Vec3::Zero()});
  CHECK(thumb_distance(kv, 1) == doctest::Approx(0.05).epsilon(1e-15));
  CHECK_THROWS(thumb_distance(kv, HandModel::kThumb));
  CHECK_THROWS(thumb_distance(kv, 5));
}

TEST_CASE("calibration maps lengths of the reference pose") {
  const HandModel model = default_hand_model();
  const JointConfig q = JointConfig::Zero(model.dof());
  const auto robot = fk_fingertips(model, q);
  std::vector<Vec3> local;
  for (const Vec3& p : robot) local.push_back(1.25 * p);
  const Pose wrist{Vec3(0.3, 0.2, 1.0), so3_exp(Vec3(0.3, 0.2, 0.1))};
  const NormalizationMap map = calibrate_normalization(model, q, sample_at(wrist, local));
  for (double s : map.scale) CHECK(s == doctest::Approx(0.8).epsilon(1e-12));
  const KeyVectors kv = normalize_human(sample_at(wrist, local), map);
  for (std::size_t i = 0; i < 5; ++i) CHECK((kv.wrist_to_tip[i] - robot[i]).norm() < 1e-14);

  HumanHandSample degenerate = sample_at(wrist, local);
  degenerate.tips[2] = wrist.position;
  CHECK_THROWS(calibrate_normalization(model, q, degenerate));
  HumanHandSample short_sample = sample_at(wrist, local);
  short_sample.tips.pop_back();
  CHECK_THROWS_AS(calibrate_normalization(model, q, short_sample), DimensionError);
}

TEST_CASE("human stream roundtrip") {
  std::vector<HumanHandSample> samples;
  for (int k = 0; k < 5; ++k) {
    samples.push_back(sample_at(Pose{Vec3(0.1 * k, 0, 1), so3_exp(Vec3(0, 0.1 * k, 0))}, fixture_tips(), 0.02 * k));
  }
  std::stringstream io;
  write_human_stream(io, samples);
  const auto back = read_human_stream(io);
  REQUIRE(back.size() == samples.size());
  for (std::size_t k = 0; k < back.size(); ++k) {
    CHECK(back[k].timestamp == samples[k].timestamp);
    CHECK(back[k].wrist.position == samples[k].wrist.position);
    for (std::size_t i = 0; i < 5; ++i) CHECK(back[k].tips[i] == samples[k].tips[i]);
  }
}

TEST_CASE("human stream rejects non-monotone time and malformed lines") {
  std::vector<HumanHandSample> samples{sample_at(Pose{}, fixture_tips(), 0.1), sample_at(Pose{}, fixture_tips(), 0.05)};
  std::stringstream io;
  write_human_stream(io, samples);
  CHECK_THROWS_AS(read_human_stream(io), std::runtime_error);
  std::stringstream bad("{\"t\": 0.0, \"wrist\": 3}\n");
  CHECK_THROWS_AS(read_human_stream(bad), std::runtime_error);
  std::stringstream garbage("not json\n");
  CHECK_THROWS_AS(read_human_stream(garbage), std::runtime_error);
}
