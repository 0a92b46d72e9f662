#include "handitl/rollout.hpp"

#include "handitl/baselines.hpp"
#include "handitl/relretarget.hpp"

#include <atomic>
#include <chrono>
#include <cstring>
#include <fstream>
#include <istream>
#include <mutex>
#include <sstream>
#include <thread>

namespace handitl {

const char* to_string(Method m) {
  switch (m) {
    case Method::Relative: return "relative";
    case Method::Jacobian: return "jacobian";
    case Method::DeltaCmd: return "deltacmd";
    case Method::Teleop: return "teleop";
  }
  return "unknown";
}

Method method_from_string(const std::string& s) {
  if (s == "relative") return Method::Relative;
  if (s == "jacobian") return Method::Jacobian;
  if (s == "deltacmd") return Method::DeltaCmd;
  if (s == "teleop") return Method::Teleop;
  throw std::invalid_argument("unknown method '" + s + "' (relative|jacobian|deltacmd|teleop)");
}

std::vector<Method> all_methods() {
  return {Method::Relative, Method::Jacobian, Method::DeltaCmd, Method::Teleop};
}

nlohmann::json rollout_meta(const ScenarioSpec& spec, Method method, const HandModel& model,
                            const SimConfig& cfg) {
  return {{"scenario", scenario_to_json(spec)},
          {"method", to_string(method)},
          {"config", config_to_json(cfg)},
          {"model", hand_model_to_json(model)}};
}

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point since) {
  return std::chrono::duration<double, std::milli>(Clock::now() - since).count();
}

HumanSummary summarize_human(const HumanHandSample& sample, const KeyVectors& kv) {
  HumanSummary h;
  h.timestamp = sample.timestamp;
  h.wrist_position = sample.wrist.position;
  for (int f = 1; f < kv.fingerCount(); ++f) h.thumb_distances.push_back(thumb_distance(kv, f));
  return h;
}

double tracking_error(const HandModel& model, const JointConfig& q, const AnchorState& anchor,
                      const KeyVectors& human_now) {
  const auto tips = fk_fingertips(model, q);
  double sum = 0.0;
  for (int f = 0; f < model.fingerCount(); ++f) {
    const auto i = static_cast<std::size_t>(f);
    const Vec3 target = anchor.robot_kv_anchor.wrist_to_tip[i] +
                        (human_now.wrist_to_tip[i] - anchor.human_kv_anchor.wrist_to_tip[i]);
    sum += (tips[i] - target).norm();
  }
  return sum / model.fingerCount();
}

std::string observation_id(const ScenarioSpec& spec, int step) {
  std::ostringstream s;
  s << spec.name << "/s" << spec.seed << "/k" << step;
  return s.str();
}

}  // namespace

RolloutResult run_rollout(const ScenarioStreams& streams, Method method, const HandModel& model,
                          const SimConfig& cfg, std::ostream* log_out) {
  cfg.validate();
  cfg.weights.validateFor(model);
  if (streams.robot_initial.size() != model.dof()) {
    throw DimensionError("run_rollout: scenario was generated for a different hand model");
  }
  const ScenarioSpec& spec = streams.spec;
  const double dt = spec.control_period;
  ArmShareConfig arm_cfg = cfg.arm;
  arm_cfg.control_period = dt;

  RolloutResult out;
  MetricsReport& m = out.metrics;
  m.scenario = spec.name;
  m.seed = spec.seed;
  m.method = to_string(method);
  m.steps = streams.steps;
  m.misalignment = spec.misalignment;
  m.realized_misalignment = streams.realized_misalignment;

  std::optional<CorrectionLog> log;
  if (log_out) log.emplace(*log_out, rollout_meta(spec, method, model, cfg));

  MockPolicyStream policy = streams.policy;
  InterventionState state(arm_cfg.ema_coefficient);
  VrPoseWindow window(static_cast<std::size_t>(arm_cfg.window_k) + 2, "device");
  ResidualComposer composer(arm_cfg);
  SolverWorkspace relative_ws;

  // DeltaCmd differences a teleoperation backend that tracks the operator for
  // the whole rollout. Direct switching solves the absolute retargeting
  // problem only while engaged, warm-started from the robot's command.
  std::optional<TeleopBackend> teleop;
  if (method == Method::DeltaCmd) teleop.emplace(model, cfg.weights, cfg.solver, streams.robot_initial);
  SolverWorkspace absolute_ws;

  JointConfig q_robot = streams.robot_initial;
  JointConfig q_human_prev = q_robot;  // previous human command, the warm start while engaged
  JointConfig q_tel_anchor;
  JointConfig q_rob_anchor;
  KeyVectors prev_human_kv;

  Pose arm_pose = policy.actionAt(0).arm_target;
  Twist arm_vel;

  std::size_t next_toggle = 0;
  for (int k = 0; k < streams.steps; ++k) {
    const auto ku = static_cast<std::size_t>(k);
    const double t = streams.times[ku];

    const PolicyChunk chunk = policy.predict(k);
    const PolicyCommand& pa = chunk.actions.front();
    ++m.executed_actions;

    const HumanHandSample& sample = streams.human[ku];
    const KeyVectors human_kv = normalize_human(sample, streams.normalization);
    if (streams.vr_available[ku]) window.push(streams.vr[ku].timestamp, streams.vr[ku].pose);

    try {
      for (const Vec3& v : human_kv.wrist_to_tip) {
        if (!v.allFinite()) throw SolverError("non-finite operator key vectors");
      }
      if (teleop) {
        const auto start = Clock::now();
        teleop->step(human_kv);
        m.solve_ms.push_back(elapsed_ms(start));
        if (!teleop->lastReport().converged) ++m.nonconverged_solves;
      }

      while (next_toggle < streams.toggle_steps.size() && streams.toggle_steps[next_toggle] == k) {
        const InterventionMode requested = spec.toggles[next_toggle].mode;
        const ToggleOutcome outcome = toggle_intervention(state, requested, model, q_robot, human_kv, t);
        if (outcome == ToggleOutcome::Engaged) {
          m.engage_times.push_back(t);
          q_human_prev = q_robot;
          q_rob_anchor = q_robot;
          if (teleop) q_tel_anchor = teleop->current();
          prev_human_kv = human_kv;
          composer.reset();
        } else if (outcome == ToggleOutcome::Disengaged) {
          m.release_times.push_back(t);
        }
        ++next_toggle;
      }

      const Twist residual =
          estimate_residual_twist(window, arm_cfg, cfg.base_from_device, state.ema_lin, state.ema_ang, t)
              .value_or(Twist{});
      const Authority beta = authority(state.mode, cfg.copilot);

      FusedCommand fused;
      fused.timestamp = t;
      fused.mode = state.mode;
      const ArmCommand policy_arm{pa.arm_target, Twist{}, pa.feedforward};

      if (state.engaged()) {
        JointConfig q_human;
        switch (method) {
          case Method::Relative: {
            const auto start = Clock::now();
            const SolveReport r = solve_step(model, *state.anchor, human_kv, q_human_prev, cfg.weights,
                                             cfg.solver, relative_ws);
            m.solve_ms.push_back(elapsed_ms(start));
            if (!r.converged) ++m.nonconverged_solves;
            q_human = r.q_solution;
            break;
          }
          case Method::Teleop: {
            const auto start = Clock::now();
            const SolveReport r = absolute_retarget_report(model, human_kv, q_human_prev, cfg.weights,
                                                           cfg.solver, absolute_ws);
            m.solve_ms.push_back(elapsed_ms(start));
            if (!r.converged) ++m.nonconverged_solves;
            q_human = r.q_solution;
            break;
          }
          case Method::DeltaCmd:
            q_human = delta_cmd_retarget(model, q_rob_anchor, teleop->current(), q_tel_anchor);
            break;
          case Method::Jacobian: {
            std::vector<Vec3> disp(static_cast<std::size_t>(model.fingerCount()));
            for (std::size_t f = 0; f < disp.size(); ++f) {
              disp[f] = human_kv.wrist_to_tip[f] - prev_human_kv.wrist_to_tip[f];
            }
            const auto start = Clock::now();
            q_human = jacobian_retarget(model, q_human_prev, disp, cfg.dls_damping);
            m.solve_ms.push_back(elapsed_ms(start));
            break;
          }
        }
        q_human_prev = q_human;
        prev_human_kv = human_kv;
        fused.hand = fuse_hand(model, pa.hand, q_human, beta.hand);
        fused.arm = fuse_arm(policy_arm, residual, beta.arm, composer);
      } else {
        fused.hand = project_limits(model, pa.hand);
        fused.arm = policy_arm;
      }

      fused.arm.commanded = pd_track(arm_pose, arm_vel, fused.arm.target, fused.arm.feedforward, arm_cfg);
      arm_pose = integrate_twist(arm_pose, fused.arm.commanded, dt);
      arm_vel = fused.arm.commanded;

      CorrectionRecord rec;
      rec.timestamp = t;
      rec.observation_id = observation_id(spec, k);
      rec.executed = fused;
      rec.policy = pa;
      rec.human = summarize_human(sample, human_kv);
      rec.intervention = state.engaged();
      if (log) record_step(*log, rec);

      if (state.engaged()) {
        m.tracking.push_back({t, tracking_error(model, fused.hand, *state.anchor, human_kv)});
      }
      m.drift.push_back({t, residual.linear.norm(), residual.angular.norm(),
                         (fused.arm.target.position - pa.arm_target.position).norm(),
                         (pa.arm_target.rotation.inverse() * fused.arm.target.rotation).angle()});

      q_robot = fused.hand;
      out.commands.push_back(std::move(fused));
      out.records.push_back(std::move(rec));
    } catch (const SolverError& e) {
      out.aborted = true;
      m.aborted = true;
      m.abort_reason = "step " + std::to_string(k) + ": " + e.what();
      if (log) log->markAborted(m.abort_reason);
      break;
    }
  }

  m.policy_chunks = policy.chunksPredicted();
  m.policy_actions = policy.actionsPredicted();
  out.anchors = state.history;
  out.warnings = state.warnings;

  auto measure = [&](const std::vector<double>& times) {
    std::vector<double> inside;
    for (double t0 : times) {
      if (!out.commands.empty() && t0 > out.commands.front().timestamp &&
          t0 <= out.commands.back().timestamp) {
        inside.push_back(t0);
      }
    }
    return measure_discontinuity(out.commands, inside);
  };
  m.engage = measure(m.engage_times);
  m.release = measure(m.release_times);
  for (const auto& s : m.tracking) {
    m.tracking_mean += s.error;
    m.tracking_max = std::max(m.tracking_max, s.error);
  }
  if (!m.tracking.empty()) m.tracking_mean /= static_cast<double>(m.tracking.size());
  m.runtime = RuntimeStats::from(m.solve_ms);
  return out;
}

RolloutResult run_rollout(const ScenarioSpec& spec, Method method, const HandModel& model,
                          const SimConfig& cfg, std::ostream* log) {
  return run_rollout(generate_scenario(spec, model, cfg), method, model, cfg, log);
}

bool bitwise_equal(const FusedCommand& a, const FusedCommand& b) {
  auto same = [](double x, double y) { return std::memcmp(&x, &y, sizeof(double)) == 0; };
  auto vec = [&](const Vec3& x, const Vec3& y) {
    return same(x.x(), y.x()) && same(x.y(), y.y()) && same(x.z(), y.z());
  };
  auto twist = [&](const Twist& x, const Twist& y) { return vec(x.linear, y.linear) && vec(x.angular, y.angular); };
  if (!same(a.timestamp, b.timestamp) || a.mode != b.mode) return false;
  if (a.hand.size() != b.hand.size()) return false;
  for (Eigen::Index i = 0; i < a.hand.size(); ++i) {
    if (!same(a.hand[i], b.hand[i])) return false;
  }
  const auto qa = a.arm.target.rotation.quaternion().coeffs();
  const auto qb = b.arm.target.rotation.quaternion().coeffs();
  for (int i = 0; i < 4; ++i) {
    if (!same(qa[i], qb[i])) return false;
  }
  return vec(a.arm.target.position, b.arm.target.position) && twist(a.arm.commanded, b.arm.commanded) &&
         twist(a.arm.feedforward, b.arm.feedforward);
}

ReplayResult replay_log(std::istream& in) {
  const LoadedLog loaded = read_correction_log(in);
  const auto& meta = loaded.header.at("meta");
  const ScenarioSpec spec = scenario_from_json(meta.at("scenario"));
  const Method method = method_from_string(meta.at("method").get<std::string>());
  const SimConfig cfg = config_from_json(meta.at("config"));
  const HandModel model = hand_model_from_json(meta.at("model"));
  const RolloutResult rerun = run_rollout(spec, method, model, cfg);

  ReplayResult r;
  if (rerun.commands.size() != loaded.records.size()) {
    r.detail = "record count differs: log has " + std::to_string(loaded.records.size()) +
               ", replay produced " + std::to_string(rerun.commands.size());
  }
  const std::size_t n = std::min(rerun.commands.size(), loaded.records.size());
  for (std::size_t i = 0; i < n; ++i) {
    ++r.compared;
    // Doubles are written in shortest round-trip form, so equal text means
    // equal bits; parsing the logged rotation back would renormalize it.
    const std::string logged = nlohmann::json::parse(loaded.record_lines[i]).at("exec").dump();
    if (fused_command_to_json(rerun.commands[i]).dump() != logged) {
      r.first_mismatch = i;
      r.detail = "executed command differs at record " + std::to_string(i);
      return r;
    }
  }
  r.identical = r.detail.empty() && loaded.aborted == rerun.aborted;
  if (loaded.aborted != rerun.aborted) r.detail = "abort status differs";
  return r;
}

std::string rollout_basename(const ScenarioSpec& spec, Method method) {
  return spec.name + "_s" + std::to_string(spec.seed) + "_" + to_string(method);
}

std::vector<MetricsReport> run_sweep(const std::vector<ScenarioSpec>& specs,
                                     const std::vector<Method>& methods, const HandModel& model,
                                     const SimConfig& cfg, unsigned threads,
                                     const std::optional<std::filesystem::path>& log_dir) {
  const std::size_t total = specs.size() * methods.size();
  std::vector<MetricsReport> out(total);
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;

  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= specs.size()) return;
      try {
        const ScenarioStreams streams = generate_scenario(specs[i], model, cfg);
        for (std::size_t j = 0; j < methods.size(); ++j) {
          std::ofstream file;
          std::ostream* log = nullptr;
          if (log_dir) {
            file.open(*log_dir / (rollout_basename(specs[i], methods[j]) + ".jsonl"));
            if (!file) throw std::runtime_error("cannot write log in " + log_dir->string());
            log = &file;
          }
          out[i * methods.size() + j] = run_rollout(streams, methods[j], model, cfg, log).metrics;
        }
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = specs.size();
        return;
      }
    }
  };

  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(specs.size())));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < threads; ++w) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

}  // namespace handitl
