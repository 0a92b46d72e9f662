#include "handitl/scenario.hpp"

#include "handitl/baselines.hpp"
#include "handitl/json_util.hpp"

#include <Eigen/QR>

#include <cmath>
#include <fstream>
#include <numbers>
#include <ostream>
#include <random>

namespace handitl {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kGateMargin = 0.005;  // m above d_off at every engage
constexpr double kLandingTolerance = 0.05;  // relative, realized vs requested misalignment

// Integral over [0, tau] of a raised-cosine bump of unit peak on [0, T].
double bump_integral(double tau, double T) {
  if (tau <= 0.0) return 0.0;
  if (tau >= T) return 0.5 * T;
  return 0.5 * tau - T / (2.0 * kTwoPi) * std::sin(kTwoPi * tau / T);
}

bool is_engage(const ToggleEvent& e) { return e.mode != InterventionMode::Autonomous; }

// Flexion joints per chain: thumb MCP and IP, finger MCP/PIP/DIP. Other models
// flex every joint.
std::vector<int> flexion_joints(const HandModel& model, int chain) {
  const int n = static_cast<int>(model.chains()[static_cast<std::size_t>(chain)].joints.size());
  if (model.dof() == 21 && model.fingerCount() == 5) {
    if (chain == HandModel::kThumb) return {2, 4};
    return {1, 2, 3};
  }
  std::vector<int> all(static_cast<std::size_t>(n));
  for (int j = 0; j < n; ++j) all[static_cast<std::size_t>(j)] = j;
  return all;
}

}  // namespace

std::vector<ToggleEvent> ScenarioSpec::defaultToggles(double duration, InterventionMode mode) {
  std::vector<ToggleEvent> out;
  for (int i = 0; i < 3; ++i) {
    const double start = duration * (0.2 + 0.3 * i);
    out.push_back({start, mode});
    out.push_back({start + duration * 0.15, InterventionMode::Autonomous});
  }
  return out;
}

void ScenarioSpec::validate() const {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw std::invalid_argument("ScenarioSpec: " + what);
  };
  require(duration > 0.0, "duration must be positive");
  require(control_period > 0.0 && control_period < duration, "control_period must lie in (0, duration)");
  require(misalignment >= 0.0, "misalignment must be non-negative");
  require(noise_sigma >= 0.0, "noise_sigma must be non-negative");
  require(human_scale > 0.0, "human_scale must be positive");
  require(wrist_burst_duration > 0.0, "wrist_burst_duration must be positive");
  double prev = -1.0;
  for (const auto& t : toggles) {
    require(t.time >= 0.0 && t.time < duration, "toggle time outside the scenario duration");
    require(t.time > prev, "toggle times must increase");
    prev = t.time;
  }
  for (const auto& [a, b] : vr_dropouts) require(a < b, "dropout intervals need start < end");
}

nlohmann::json scenario_to_json(const ScenarioSpec& s) {
  using nlohmann::json;
  json curves = json::array();
  for (const auto& c : s.finger_curves) {
    curves.push_back({{"amplitude", c.amplitude}, {"frequency", c.frequency}, {"phase", c.phase}});
  }
  json toggles = json::array();
  for (const auto& t : s.toggles) toggles.push_back({{"time", t.time}, {"mode", to_string(t.mode)}});
  json dropouts = json::array();
  for (const auto& [a, b] : s.vr_dropouts) dropouts.push_back(json::array({a, b}));
  return {{"name", s.name},
          {"seed", s.seed},
          {"duration", s.duration},
          {"control_period", s.control_period},
          {"misalignment", s.misalignment},
          {"noise_sigma", s.noise_sigma},
          {"human_scale", s.human_scale},
          {"finger_curves", curves},
          {"wrist_peak_speed", s.wrist_peak_speed},
          {"wrist_peak_rate", s.wrist_peak_rate},
          {"wrist_burst_duration", s.wrist_burst_duration},
          {"vr_dropouts", dropouts},
          {"policy_hand_amplitude", s.policy_hand_amplitude},
          {"policy_hand_frequency", s.policy_hand_frequency},
          {"policy_arm_amplitude", s.policy_arm_amplitude},
          {"policy_arm_frequency", s.policy_arm_frequency},
          {"toggles", toggles}};
}

ScenarioSpec scenario_from_json(const nlohmann::json& j) {
  using jsonio::maybe;
  ScenarioSpec s;
  try {
    maybe(j, "name", s.name);
    maybe(j, "seed", s.seed);
    maybe(j, "duration", s.duration);
    maybe(j, "control_period", s.control_period);
    maybe(j, "misalignment", s.misalignment);
    maybe(j, "noise_sigma", s.noise_sigma);
    maybe(j, "human_scale", s.human_scale);
    if (j.contains("finger_curves")) {
      for (const auto& c : j.at("finger_curves")) {
        FingerCurve fc;
        maybe(c, "amplitude", fc.amplitude);
        maybe(c, "frequency", fc.frequency);
        maybe(c, "phase", fc.phase);
        s.finger_curves.push_back(fc);
      }
    }
    maybe(j, "wrist_peak_speed", s.wrist_peak_speed);
    maybe(j, "wrist_peak_rate", s.wrist_peak_rate);
    maybe(j, "wrist_burst_duration", s.wrist_burst_duration);
    if (j.contains("vr_dropouts")) {
      for (const auto& d : j.at("vr_dropouts")) {
        s.vr_dropouts.emplace_back(d.at(0).get<double>(), d.at(1).get<double>());
      }
    }
    maybe(j, "policy_hand_amplitude", s.policy_hand_amplitude);
    maybe(j, "policy_hand_frequency", s.policy_hand_frequency);
    maybe(j, "policy_arm_amplitude", s.policy_arm_amplitude);
    maybe(j, "policy_arm_frequency", s.policy_arm_frequency);
    if (j.contains("toggles")) {
      for (const auto& t : j.at("toggles")) {
        s.toggles.push_back(
            {t.at("time").get<double>(), intervention_mode_from_string(t.at("mode").get<std::string>())});
      }
    } else {
      s.toggles = ScenarioSpec::defaultToggles(s.duration);
    }
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("scenario: ") + e.what());
  }
  s.validate();
  return s;
}

ScenarioSpec load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open scenario file " + path.string());
  try {
    return scenario_from_json(nlohmann::json::parse(in, nullptr, true, true));
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("scenario " + path.string() + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------

MockPolicyStream::MockPolicyStream(JointConfig base_hand, JointConfig hand_direction,
                                   double hand_amplitude, double hand_frequency, Pose arm_origin,
                                   double arm_amplitude, double arm_frequency,
                                   double control_period, int horizon)
    : base_hand_(std::move(base_hand)),
      hand_direction_(std::move(hand_direction)),
      hand_amplitude_(hand_amplitude),
      hand_frequency_(hand_frequency),
      arm_origin_(arm_origin),
      arm_amplitude_(arm_amplitude),
      arm_frequency_(arm_frequency),
      dt_(control_period),
      horizon_(horizon) {
  if (horizon_ < 1) throw std::invalid_argument("MockPolicyStream: horizon must be >= 1");
}

PolicyCommand MockPolicyStream::actionAt(int step) const {
  const double t = step * dt_;
  const double wh = kTwoPi * hand_frequency_;
  const double wa = kTwoPi * arm_frequency_;
  PolicyCommand a;
  a.hand = base_hand_ + hand_amplitude_ * std::sin(wh * t) * hand_direction_;
  const double A = arm_amplitude_;
  a.arm_target.position =
      arm_origin_.position + A * Vec3(std::sin(wa * t), 0.5 * std::sin(2.0 * wa * t), 0.3 * std::sin(wa * t));
  const double yaw = 0.2 * std::sin(wa * t);
  a.arm_target.rotation = arm_origin_.rotation * so3_exp(Vec3(0.0, 0.0, yaw));
  a.feedforward.linear =
      A * wa * Vec3(std::cos(wa * t), std::cos(2.0 * wa * t), 0.3 * std::cos(wa * t));
  a.feedforward.angular = arm_origin_.rotation * Vec3(0.0, 0.0, 0.2 * wa * std::cos(wa * t));
  return a;
}

PolicyChunk MockPolicyStream::predict(int step) {
  PolicyChunk chunk;
  chunk.step = step;
  chunk.actions.reserve(static_cast<std::size_t>(horizon_));
  for (int h = 0; h < horizon_; ++h) chunk.actions.push_back(actionAt(step + h));
  ++chunks_;
  actions_ += horizon_;
  return chunk;
}

// ---------------------------------------------------------------------------

JointConfig default_policy_grasp(const HandModel& model) {
  if (model.dof() == 21 && model.fingerCount() == 5) {
    JointConfig q(21);
    q << -1.00, 0.20, 0.90, 0.00, 0.90,   // thumb
        0.05, 0.70, 0.80, 0.50,           // index
        0.00, 0.70, 0.80, 0.50,           // middle
        -0.05, 0.70, 0.80, 0.50,          // ring
        -0.10, 0.70, 0.80, 0.50;          // little
    return project_limits(model, q);
  }
  return project_limits(model, 0.5 * (model.lower() + model.upper()));
}

namespace {

// Operator hand in robot joint space. It mirrors the robot's previous
// executed posture (the policy hand while autonomous) plus the misalignment
// offset; while engaged each finger adds its open/close curve, which starts
// from zero at the engage step.
struct HumanMotion {
  const HandModel* model;
  const MockPolicyStream* policy;
  JointConfig offset;
  std::vector<FingerCurve> curves;
  std::vector<std::pair<int, int>> engaged;  // [engage step, release step)
  double dt;

  JointConfig at(int k) const {
    JointConfig q = project_limits(*model, policy->actionAt(std::max(k - 1, 0)).hand) + offset;
    for (const auto& [k_on, k_off] : engaged) {
      if (k < k_on || k >= k_off) continue;
      const double tau = (k - k_on) * dt;
      for (int c = 0; c < model->fingerCount(); ++c) {
        const FingerCurve& fc = curves[static_cast<std::size_t>(c)];
        const double flex =
            fc.amplitude * 0.5 * (std::cos(fc.phase) - std::cos(kTwoPi * fc.frequency * tau + fc.phase));
        for (int j : flexion_joints(*model, c)) q[model->chainOffset(c) + j] += flex;
      }
    }
    return q;
  }
};

// Distance from the robot's configuration just before `engage_step` to the
// absolute retargeting solution for the (noise-free) operator hand at that
// step, warm-started from the robot.
double absolute_landing(const HandModel& model, const HumanMotion& human, int engage_step,
                        const JointConfig& q_robot, const SimConfig& cfg) {
  const KeyVectors kv = robot_keyvectors(model, human.at(engage_step));
  return (absolute_retarget(model, kv, q_robot, cfg.weights, cfg.solver) - q_robot).norm();
}

Eigen::MatrixXd stacked_tip_jacobian(const HandModel& model, const JointConfig& q) {
  Eigen::MatrixXd out(3 * model.fingerCount(), model.dof());
  for (int f = 0; f < model.fingerCount(); ++f) out.middleRows(3 * f, 3) = fingertip_jacobian(model, q, f);
  return out;
}

}  // namespace

ScenarioStreams generate_scenario(const ScenarioSpec& spec_in, const HandModel& model,
                                  const SimConfig& cfg) {
  const ScenarioSpec& spec = spec_in;
  spec.validate();
  cfg.validate();
  std::vector<FingerCurve> curves = spec.finger_curves;
  if (curves.empty()) curves.assign(static_cast<std::size_t>(model.fingerCount()), FingerCurve{});
  if (static_cast<int>(curves.size()) != model.fingerCount()) {
    throw std::invalid_argument("ScenarioSpec: finger_curves must have one entry per finger");
  }

  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);

  // Per-seed finger phases: some fingers start an intervention by closing,
  // others by opening.
  for (auto& fc : curves) fc.phase += kTwoPi * uniform(rng);

  const int steps = static_cast<int>(std::floor(spec.duration / spec.control_period + 1e-9));
  const JointConfig q_base = default_policy_grasp(model);

  JointConfig hand_dir = JointConfig::Zero(model.dof());
  for (int c = 0; c < model.fingerCount(); ++c) {
    for (int j : flexion_joints(model, c)) hand_dir[model.chainOffset(c) + j] = 1.0;
  }
  const Pose arm_origin{Vec3(0.45, 0.0, 0.30), so3_exp(Vec3(0.0, 0.3, 0.0))};
  MockPolicyStream policy(q_base, hand_dir, spec.policy_hand_amplitude, spec.policy_hand_frequency,
                          arm_origin, spec.policy_arm_amplitude, spec.policy_arm_frequency,
                          spec.control_period, cfg.policy_horizon);

  std::vector<int> toggle_steps;
  for (const auto& t : spec.toggles) {
    toggle_steps.push_back(static_cast<int>(std::ceil(t.time / spec.control_period - 1e-9)));
  }
  for (std::size_t i = 0; i < toggle_steps.size(); ++i) {
    if (is_engage(spec.toggles[i]) && toggle_steps[i] < 1) {
      throw std::invalid_argument("ScenarioSpec: an engage needs at least one prior control step");
    }
    if (toggle_steps[i] >= steps) throw std::invalid_argument("ScenarioSpec: toggle beyond last step");
  }

  HumanMotion human{&model, &policy, JointConfig::Zero(model.dof()), curves, {}, spec.control_period};
  for (std::size_t i = 0; i < spec.toggles.size(); ++i) {
    if (!is_engage(spec.toggles[i])) continue;
    int k_off = steps;
    for (std::size_t j = i + 1; j < spec.toggles.size(); ++j) {
      if (!is_engage(spec.toggles[j])) {
        k_off = toggle_steps[j];
        break;
      }
    }
    // Copilot and takeover toggles may follow each other; a later engage is
    // ignored by the state machine, so only the first of a run counts.
    if (!human.engaged.empty() && human.engaged.back().second > toggle_steps[i]) continue;
    human.engaged.emplace_back(toggle_steps[i], k_off);
  }
  const int first_engage = human.engaged.empty() ? -1 : human.engaged.front().first;

  auto open_at_engages = [&](const HumanMotion& h) {
    for (const auto& span : h.engaged) {
      const auto d = gate_distances(robot_keyvectors(model, h.at(span.first)));
      for (double di : d) {
        if (di < cfg.weights.d_off + kGateMargin) return false;
      }
    }
    return true;
  };
  auto landing = [&](const HumanMotion& h) {
    const JointConfig q_robot = project_limits(model, policy.actionAt(first_engage - 1).hand);
    return absolute_landing(model, h, first_engage, q_robot, cfg);
  };

  // Misalignment: a joint offset in the row space of the stacked fingertip
  // Jacobian (so it is visible to key-vector retargeting), resampled until the
  // operator's hand is open at every engage.
  double realized = 0.0;
  if (spec.misalignment > 0.0) {
    const Eigen::MatrixXd jac = stacked_tip_jacobian(model, q_base);
    const Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(jac);
    const Eigen::MatrixXd row_proj = cod.pseudoInverse() * jac;
    bool found = false;
    for (int attempt = 0; attempt < 200 && !found; ++attempt) {
      JointConfig g(model.dof());
      for (Eigen::Index i = 0; i < g.size(); ++i) g[i] = normal(rng);
      JointConfig dir = row_proj * g;
      if (dir.norm() < 1e-9) continue;
      dir.normalize();
      human.offset = spec.misalignment * dir;
      if (!open_at_engages(human)) continue;
      if (first_engage < 0) {
        found = true;
        break;
      }
      // Rescale so absolute retargeting at the first engage lands
      // `misalignment` away from the robot.
      double scale = spec.misalignment;
      for (int it = 0;; ++it) {
        human.offset = scale * dir;
        realized = landing(human);
        if (it == 6 || !(realized > 1e-9) || std::abs(realized - spec.misalignment) <= 1e-3 * spec.misalignment) {
          break;
        }
        scale *= spec.misalignment / realized;
      }
      found = std::abs(realized - spec.misalignment) <= kLandingTolerance * spec.misalignment &&
              open_at_engages(human);
    }
    if (!found) {
      throw std::invalid_argument("ScenarioSpec: could not realize misalignment " +
                                  std::to_string(spec.misalignment) + " with an open human hand");
    }
  } else if (first_engage >= 0) {
    if (!open_at_engages(human)) {
      throw std::invalid_argument("ScenarioSpec: the human hand is not open at an engage");
    }
    realized = landing(human);
  }

  ScenarioStreams s{.spec = spec,
                    .steps = steps,
                    .times = {},
                    .human = {},
                    .vr_available = {},
                    .vr = {},
                    .policy = policy,
                    .normalization = {},
                    .calibration = {},
                    .robot_initial = project_limits(model, policy.actionAt(0).hand),
                    .human_offset = human.offset,
                    .realized_misalignment = realized,
                    .toggle_steps = toggle_steps};

  // Calibration: open flat hand (zero joints) with the wrist at the origin.
  const Rotation human_from_robot = cfg.robot_from_human.inverse();
  {
    const JointConfig q_open = project_limits(model, JointConfig::Zero(model.dof()));
    s.calibration.timestamp = 0.0;
    for (const Vec3& tip : fk_fingertips(model, q_open)) {
      s.calibration.tips.push_back(human_from_robot * (spec.human_scale * tip));
    }
    s.normalization = calibrate_normalization(model, q_open, s.calibration, cfg.robot_from_human);
  }

  // Operator wrist: a velocity burst after each engage.
  struct Burst {
    double start;
    Vec3 dir;
  };
  std::vector<Burst> bursts;
  for (std::size_t i = 0; i < spec.toggles.size(); ++i) {
    if (!is_engage(spec.toggles[i])) continue;
    Vec3 d(normal(rng), normal(rng), normal(rng));
    d.normalize();
    bursts.push_back({toggle_steps[i] * spec.control_period, d});
  }
  const Pose wrist_origin{Vec3(0.30, -0.20, 1.10), so3_exp(Vec3(0.1, -0.2, 0.4))};

  s.times.resize(static_cast<std::size_t>(steps));
  s.human.resize(static_cast<std::size_t>(steps));
  s.vr.resize(static_cast<std::size_t>(steps));
  s.vr_available.resize(static_cast<std::size_t>(steps));
  const double T = spec.wrist_burst_duration;
  for (int k = 0; k < steps; ++k) {
    const double t = k * spec.control_period;
    const auto ku = static_cast<std::size_t>(k);
    s.times[ku] = t;

    Vec3 p = wrist_origin.position;
    double yaw = 0.0;
    for (const auto& b : bursts) {
      const double integral = bump_integral(t - b.start, T);
      p += spec.wrist_peak_speed * integral * b.dir;
      yaw += spec.wrist_peak_rate * integral;
    }
    const Pose wrist{p, wrist_origin.rotation * so3_exp(Vec3(0.0, 0.0, yaw))};

    HumanHandSample h;
    h.timestamp = t;
    h.wrist = wrist;
    const JointConfig qh = human.at(k);
    for (const Vec3& tip : fk_fingertips(model, qh)) {
      Vec3 local = human_from_robot * (spec.human_scale * tip);
      Vec3 noise(normal(rng), normal(rng), normal(rng));
      h.tips.push_back(wrist.transformPoint(local) + spec.noise_sigma * noise);
    }
    s.human[ku] = std::move(h);

    bool available = true;
    for (const auto& [a, b] : spec.vr_dropouts) {
      if (t >= a && t < b) available = false;
    }
    s.vr_available[ku] = available;
    s.vr[ku] = {t, wrist};
  }
  return s;
}

void write_streams(const ScenarioStreams& s, std::ostream& human, std::ostream& vr,
                   std::ostream& policy) {
  write_human_stream(human, s.human);
  for (std::size_t k = 0; k < s.vr.size(); ++k) {
    if (!s.vr_available[k]) continue;
    vr << nlohmann::json{{"t", s.vr[k].timestamp}, {"pose", jsonio::pose(s.vr[k].pose)}}.dump() << '\n';
  }
  for (int k = 0; k < s.steps; ++k) {
    const PolicyCommand a = s.policy.actionAt(k);
    policy << nlohmann::json{{"step", k},
                             {"hand", jsonio::vector(a.hand)},
                             {"arm_target", jsonio::pose(a.arm_target)},
                             {"feedforward", jsonio::twist(a.feedforward)}}
                  .dump()
           << '\n';
  }
}

}  // namespace handitl
