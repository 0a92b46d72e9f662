#pragma once

#include "handitl/armshare.hpp"
#include "handitl/hand_model.hpp"
#include "handitl/intervene.hpp"
#include "handitl/projected_bfgs.hpp"
#include "handitl/relretarget.hpp"

#include "json.hpp"

#include <filesystem>
#include <string>

namespace handitl {

/// Every tunable of the simulator in one place; mirrors the config file.
struct SimConfig {
  std::string model_path;  // empty selects the built-in 21-DoF hand
  CostWeights weights;
  SolverConfig solver;
  ArmShareConfig arm;
  CopilotWeights copilot;
  double dls_damping = 1e-3;  // m, Jacobian baseline
  int policy_horizon = 8;     // actions per mock policy chunk
  Rotation base_from_device;  // VR device frame -> robot base
  Rotation robot_from_human;  // human wrist frame -> robot wrist frame

  void validate() const;
};

nlohmann::json config_to_json(const SimConfig& cfg);
/// Missing keys keep their defaults. Unknown top-level sections are rejected.
SimConfig config_from_json(const nlohmann::json& j);
/// Accepts // and /* */ comments.
SimConfig load_config(const std::filesystem::path& path);

nlohmann::json weights_to_json(const CostWeights& w);
CostWeights weights_from_json(const nlohmann::json& j, CostWeights base = {});

HandModel load_model_for(const SimConfig& cfg);

}  // namespace handitl
