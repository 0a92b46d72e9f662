#include "handitl/baselines.hpp"
#include "reference.hpp"

#include "checks.hpp"
#include "doctest.h"

#include <cstring>
#include <random>

using namespace handitl;

namespace {

std::vector<Vec3> zero_disp(const HandModel& model) { return std::vector<Vec3>(static_cast<std::size_t>(model.fingerCount()), Vec3::Zero()); }

JointConfig inner_config(const HandModel& model, std::mt19937_64& rng) {
  return 0.15 * (model.lower() + model.upper()) + 0.7 * checks::random_config(model, rng);
}

}  // namespace

TEST_CASE("absolute retargeting reaches a consistent target") {
  const HandModel model = default_hand_model();
  std::mt19937_64 rng(41);
  for (int n = 0; n < 10; ++n) {
    const JointConfig q_star = inner_config(model, rng);
    const KeyVectors human = robot_keyvectors(model, q_star);
    CostWeights w;
    // Pinch gates would shrink the opposition target; open them fully here.
    w.opposition_fingers.clear();
    const CostBreakdown at_star = absolute_cost_terms(model, q_star, q_star, human, w);
    const bool safe_inactive = at_star.safe == 0.0;
    const JointConfig q = absolute_retarget(model, human, q_star, w);
    const auto tips = fk_fingertips(model, q);
    if (safe_inactive) {
      CHECK(absolute_cost_terms(model, q, q_star, human, w).total <= 1e-14);
      for (std::size_t i = 0; i < tips.size(); ++i) CHECK((tips[i] - human.wrist_to_tip[i]).norm() < 1e-6);
    }
  }
}

TEST_CASE("absolute retargeting on a misaligned hand jumps far") {
  const HandModel model = default_hand_model();
  const JointConfig fist = project_limits(model, 0.9 * model.upper());
  const KeyVectors open_hand = robot_keyvectors(model, JointConfig::Zero(model.dof()));
  const JointConfig q = absolute_retarget(model, open_hand, fist, CostWeights{});
  CHECK((q - fist).norm() > 0.5);
}

TEST_CASE("absolute retargeting matches the grid minimum on the toy finger") {
  const HandModel toy = toy_finger_model();
  CostWeights w;
  w.opposition_fingers.clear();
  std::mt19937_64 rng(48);
  std::uniform_real_distribution<double> u(-0.15, 0.15);
  const JointConfig zero = JointConfig::Zero(2);
  const std::vector<Vec3> zero_tip{fk_fingertips(toy, zero)[0]};
  for (int n = 0; n < 4; ++n) {
    const JointConfig q_goal = inner_config(toy, rng);
    const KeyVectors human = KeyVectors::fromWristToTip({fk_fingertips(toy, q_goal)[0] + Vec3(0, 0, u(rng) * 0.02)});
    const JointConfig q_prev = project_limits(toy, q_goal + Eigen::Vector2d(u(rng), u(rng)));
    const JointConfig q = absolute_retarget(toy, human, q_prev, w);
    // An anchor at the zero configuration on both sides turns the relative
    // cost into the absolute one.
    const std::vector<Vec3> tip_now = ref::wrist_to_tip(human);
    const auto grid = ref::grid_minimum_2dof(toy, q_prev, zero, zero_tip, tip_now, w, 1e-3);
    const double c = ref::cost(toy, q, q_prev, zero, zero_tip, tip_now, w).total;
    CHECK(c <= grid.cost + 1e-5);
    CHECK(absolute_cost_terms(toy, q, q_prev, human, w).total == doctest::Approx(c).epsilon(1e-9));
  }
}

TEST_CASE("teleop backend warm-starts from its previous output") {
  const HandModel model = default_hand_model();
  const JointConfig q0 = JointConfig::Zero(model.dof());
  const KeyVectors target = robot_keyvectors(model, project_limits(model, 0.3 * model.upper()));
  TeleopBackend backend(model, CostWeights{}, SolverConfig{}, q0);
  CHECK(backend.current() == q0);
  const JointConfig first = backend.step(target);
  TeleopBackend fresh(model, CostWeights{}, SolverConfig{}, first);
  CHECK(backend.step(target) == fresh.step(target));
  backend.reset(q0);
  CHECK(backend.current() == q0);
}

TEST_CASE("delta command: zero delta returns the robot anchor") {
  const HandModel model = default_hand_model();
  std::mt19937_64 rng(42);
  const JointConfig anchor = checks::random_config(model, rng);
  const JointConfig tel = checks::random_config(model, rng);
  CHECK(delta_cmd_retarget(model, anchor, tel, tel) == anchor);
}

TEST_CASE("delta command: unit delta on joint 3") {
  const JointConfig anchor = JointConfig::Zero(21);
  JointConfig tel_now = JointConfig::Zero(21);
  tel_now[3] = 1.0;
  JointConfig expected = anchor;
  expected[3] = 1.0;
  CHECK(delta_cmd_raw(anchor, tel_now, JointConfig::Zero(21)) == expected);
  const HandModel model = default_hand_model();
  CHECK(delta_cmd_retarget(model, anchor, tel_now, JointConfig::Zero(21)) == project_limits(model, expected));
}

TEST_CASE("delta command is the bit-exact closed form") {
  const HandModel model = default_hand_model();
  std::mt19937_64 rng(43);
  for (int n = 0; n < 1000; ++n) {
    const JointConfig a = checks::random_config(model, rng);
    const JointConfig b = checks::random_config(model, rng);
    const JointConfig c = checks::random_config(model, rng);
    const JointConfig raw = delta_cmd_raw(a, b, c);
    for (int i = 0; i < model.dof(); ++i) {
      const double expected = a[i] + (b[i] - c[i]);
      CHECK(std::memcmp(&raw[i], &expected, sizeof(double)) == 0);
      const double clamped = std::min(std::max(expected, model.lower()[i]), model.upper()[i]);
      CHECK(delta_cmd_retarget(model, a, b, c)[i] == clamped);
    }
  }
}

TEST_CASE("delta command rejects mismatched dimensions") {
  const HandModel model = default_hand_model();
  CHECK_THROWS_AS(delta_cmd_raw(JointConfig::Zero(21), JointConfig::Zero(20), JointConfig::Zero(21)), DimensionError);
  CHECK_THROWS_AS(delta_cmd_retarget(model, JointConfig::Zero(2), JointConfig::Zero(2), JointConfig::Zero(2)), DimensionError);
}

TEST_CASE("jacobian retarget: zero displacement keeps the configuration") {
  const HandModel model = default_hand_model();
  std::mt19937_64 rng(44);
  const JointConfig q = checks::random_config(model, rng);
  CHECK(jacobian_retarget(model, q, zero_disp(model)) == q);
}

TEST_CASE("jacobian retarget: undamped step is first-order accurate") {
  const HandModel toy = toy_finger_model();
  std::mt19937_64 rng(45);
  for (int n = 0; n < 50; ++n) {
    const JointConfig q = inner_config(toy, rng);
    const Matrix3X jac = fingertip_jacobian(toy, q, 0);
    const Vec3 dir = (jac * Eigen::Vector2d::Random()).normalized();
    double prev_ratio = -1.0;
    for (double mag : {1e-3, 5e-4, 2.5e-4}) {
      const JointConfig qn = jacobian_retarget(toy, q, {mag * dir}, 1e-9);
      const double err = (fk_fingertips(toy, qn)[0] - fk_fingertips(toy, q)[0] - mag * dir).norm();
      const double ratio = err / (mag * mag);
      // Quadratic error: the ratio settles to a constant as the step shrinks.
      if (prev_ratio > 0.0) CHECK(ratio == doctest::Approx(prev_ratio).epsilon(0.1));
      prev_ratio = ratio;
    }
  }
}

TEST_CASE("jacobian retarget: damped step obeys the DLS norm bound") {
  const HandModel model = default_hand_model();
  std::mt19937_64 rng(46);
  for (int n = 0; n < 200; ++n) {
    const JointConfig q = checks::random_config(model, rng);
    const int f = n % model.fingerCount();
    auto disp = zero_disp(model);
    disp[static_cast<std::size_t>(f)] = checks::random_vec(rng, 0.005);
    const JointConfig unclamped_bound_q = jacobian_retarget(model, q, disp);
    // Clamping only shortens the step, so the bound holds after projection too.
    CHECK((unclamped_bound_q - q).norm() <= disp[static_cast<std::size_t>(f)].norm() / (2 * kDefaultDlsDamping) + 1e-12);
  }
  // Out-of-plane displacement of the planar toy finger is orthogonal to J.
  const HandModel toy = toy_finger_model();
  const JointConfig q = inner_config(toy, rng);
  CHECK((jacobian_retarget(toy, q, {Vec3(0, 0, 0.004)}) - q).norm() <= 0.004 / (2 * kDefaultDlsDamping));
  CHECK((jacobian_retarget(toy, q, {Vec3(0, 0, 0.004)}) - q).norm() < 1e-15);
}

TEST_CASE("jacobian retarget never moves another finger's joints") {
  const HandModel model = default_hand_model();
  std::mt19937_64 rng(47);
  for (int f = 0; f < model.fingerCount(); ++f) {
    const JointConfig q = inner_config(model, rng);
    auto disp = zero_disp(model);
    disp[static_cast<std::size_t>(f)] = Vec3(0.002, -0.001, 0.003);
    const JointConfig qn = jacobian_retarget(model, q, disp);
    const int lo = model.chainOffset(f);
    const int hi = lo + static_cast<int>(model.chains()[static_cast<std::size_t>(f)].joints.size());
    for (int i = 0; i < model.dof(); ++i) {
      if (i < lo || i >= hi) CHECK(qn[i] == q[i]);
    }
    CHECK((qn - q).norm() > 0.0);
  }
}

TEST_CASE("jacobian retarget validates shapes") {
  const HandModel model = default_hand_model();
  CHECK_THROWS(jacobian_retarget(model, JointConfig::Zero(21), std::vector<Vec3>(4, Vec3::Zero())));
  CHECK_THROWS(jacobian_retarget(model, JointConfig::Zero(20), zero_disp(model)));
}
