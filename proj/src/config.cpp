#include "handitl/config.hpp"

#include "handitl/json_util.hpp"

#include <fstream>
#include <set>

namespace handitl {

void SimConfig::validate() const {
  weights.validate();
  arm.validate();
  if (solver.max_iterations < 1) throw std::invalid_argument("solver.max_iterations must be >= 1");
  if (!(solver.gradient_tolerance > 0.0) || !(solver.step_tolerance > 0.0)) {
    throw std::invalid_argument("solver tolerances must be positive");
  }
  if (!(dls_damping > 0.0)) throw std::invalid_argument("dls_damping must be positive");
  if (policy_horizon < 1) throw std::invalid_argument("policy_horizon must be >= 1");
  for (double b : {copilot.arm, copilot.hand}) {
    if (!(b >= 0.0 && b <= 1.0)) throw std::invalid_argument("copilot weights must lie in [0, 1]");
  }
}

nlohmann::json weights_to_json(const CostWeights& w) {
  return {{"huber_delta", w.huber_delta}, {"d_lo", w.d_lo},       {"d_hi", w.d_hi},
          {"beta_min", w.beta_min},       {"d_on", w.d_on},       {"d_off", w.d_off},
          {"omega_max", w.omega_max},     {"gamma", w.gamma},     {"d_safe", w.d_safe},
          {"lambda_reg", w.lambda_reg},   {"opposition_fingers", w.opposition_fingers}};
}

CostWeights weights_from_json(const nlohmann::json& j, CostWeights w) {
  using jsonio::maybe;
  maybe(j, "huber_delta", w.huber_delta);
  maybe(j, "d_lo", w.d_lo);
  maybe(j, "d_hi", w.d_hi);
  maybe(j, "beta_min", w.beta_min);
  maybe(j, "d_on", w.d_on);
  maybe(j, "d_off", w.d_off);
  maybe(j, "omega_max", w.omega_max);
  maybe(j, "gamma", w.gamma);
  maybe(j, "d_safe", w.d_safe);
  maybe(j, "lambda_reg", w.lambda_reg);
  maybe(j, "opposition_fingers", w.opposition_fingers);
  w.validate();
  return w;
}

nlohmann::json config_to_json(const SimConfig& cfg) {
  using namespace jsonio;
  return {{"model", cfg.model_path},
          {"weights", weights_to_json(cfg.weights)},
          {"solver",
           {{"max_iterations", cfg.solver.max_iterations},
            {"gradient_tolerance", cfg.solver.gradient_tolerance},
            {"step_tolerance", cfg.solver.step_tolerance},
            {"armijo_c1", cfg.solver.armijo_c1},
            {"backtrack_factor", cfg.solver.backtrack_factor},
            {"max_backtracks", cfg.solver.max_backtracks},
            {"initial_step", cfg.solver.initial_step}}},
          {"arm", arm_config_to_json(cfg.arm)},
          {"intervention", {{"copilot_beta_arm", cfg.copilot.arm}, {"copilot_beta_hand", cfg.copilot.hand}}},
          {"baselines", {{"dls_damping", cfg.dls_damping}}},
          {"policy", {{"horizon", cfg.policy_horizon}}},
          {"frames",
           {{"base_from_device", rotation(cfg.base_from_device)},
            {"robot_from_human", rotation(cfg.robot_from_human)}}}};
}

SimConfig config_from_json(const nlohmann::json& j) {
  using jsonio::maybe;
  static const std::set<std::string> known = {"model",        "weights",   "solver", "arm",
                                              "intervention", "baselines", "policy", "frames"};
  if (!j.is_object()) throw std::invalid_argument("config must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (!known.count(key)) throw std::invalid_argument("unknown config section '" + key + "'");
  }
  SimConfig cfg;
  maybe(j, "model", cfg.model_path);
  if (j.contains("weights")) cfg.weights = weights_from_json(j.at("weights"));
  if (j.contains("solver")) {
    const auto& s = j.at("solver");
    maybe(s, "max_iterations", cfg.solver.max_iterations);
    maybe(s, "gradient_tolerance", cfg.solver.gradient_tolerance);
    maybe(s, "step_tolerance", cfg.solver.step_tolerance);
    maybe(s, "armijo_c1", cfg.solver.armijo_c1);
    maybe(s, "backtrack_factor", cfg.solver.backtrack_factor);
    maybe(s, "max_backtracks", cfg.solver.max_backtracks);
    maybe(s, "initial_step", cfg.solver.initial_step);
  }
  if (j.contains("arm")) cfg.arm = arm_config_from_json(j.at("arm"));
  if (j.contains("intervention")) {
    maybe(j.at("intervention"), "copilot_beta_arm", cfg.copilot.arm);
    maybe(j.at("intervention"), "copilot_beta_hand", cfg.copilot.hand);
  }
  if (j.contains("baselines")) maybe(j.at("baselines"), "dls_damping", cfg.dls_damping);
  if (j.contains("policy")) maybe(j.at("policy"), "horizon", cfg.policy_horizon);
  if (j.contains("frames")) {
    const auto& f = j.at("frames");
    if (f.contains("base_from_device")) cfg.base_from_device = jsonio::rotation(f.at("base_from_device"));
    if (f.contains("robot_from_human")) cfg.robot_from_human = jsonio::rotation(f.at("robot_from_human"));
  }
  cfg.validate();
  return cfg;
}

SimConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file " + path.string());
  try {
    return config_from_json(nlohmann::json::parse(in, nullptr, true, /*ignore_comments=*/true));
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("config " + path.string() + ": " + e.what());
  }
}

HandModel load_model_for(const SimConfig& cfg) {
  if (cfg.model_path.empty()) return default_hand_model();
  return load_hand_model(cfg.model_path);
}

}  // namespace handitl
