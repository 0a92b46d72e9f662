#pragma once

#include "handitl/spatial.hpp"

#include <Eigen/Core>
#include "json.hpp"

#include <cstddef>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace handitl {

/// Joint-angle vector in radians, one entry per model DoF.
using JointConfig = Eigen::VectorXd;
using Matrix3X = Eigen::Matrix<double, 3, Eigen::Dynamic>;

class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class ModelError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Revolute joint. `offset` is the translation from the parent frame to this
/// joint's origin, expressed in the parent frame; the joint then rotates its
/// frame about `axis` (unit, local).
struct Joint {
  std::string name;
  Vec3 axis = Vec3::UnitZ();
  Vec3 offset = Vec3::Zero();
  double lower = 0.0;
  double upper = 0.0;
};

struct Chain {
  std::string name;
  std::vector<Joint> joints;
  Vec3 tip_offset = Vec3::Zero();  // in the frame of the last joint
};

/// Sphere rigidly attached to the frame of `joint` on `chain`.
struct CollisionSphere {
  int chain = 0;
  int joint = 0;
  double radius = 0.0;
  Vec3 center = Vec3::Zero();
};

struct ProximityPair {
  int a = 0;
  int b = 0;
};

struct ProximityDistance {
  ProximityPair pair;
  double distance = 0.0;  // centre distance minus both radii, metres
};

/// Kinematic hand. Chain 0 is the thumb. Immutable after construction.
class HandModel {
 public:
  static constexpr int kThumb = 0;

  HandModel(std::string name, Pose palm, std::vector<Chain> chains,
            std::vector<CollisionSphere> spheres, std::vector<ProximityPair> pairs);

  const std::string& name() const { return name_; }
  const Pose& palm() const { return palm_; }
  const std::vector<Chain>& chains() const { return chains_; }
  const std::vector<CollisionSphere>& spheres() const { return spheres_; }
  const std::vector<ProximityPair>& pairs() const { return pairs_; }

  int fingerCount() const { return static_cast<int>(chains_.size()); }
  int dof() const { return dof_; }
  /// Index into the joint vector of the first joint of `chain`.
  int chainOffset(int chain) const { return chain_offsets_.at(static_cast<std::size_t>(chain)); }
  const JointConfig& lower() const { return lower_; }
  const JointConfig& upper() const { return upper_; }

  void checkConfig(const JointConfig& q) const;

 private:
  std::string name_;
  Pose palm_;
  std::vector<Chain> chains_;
  std::vector<CollisionSphere> spheres_;
  std::vector<ProximityPair> pairs_;
  std::vector<int> chain_offsets_;
  int dof_ = 0;
  JointConfig lower_;
  JointConfig upper_;
};

/// Per-joint world (wrist-frame) quantities for one configuration.
struct ChainState {
  std::vector<Vec3> origins;   // joint origins
  std::vector<Vec3> axes;      // joint axes, wrist frame
  std::vector<Mat3> rotations; // frame orientation after each joint
  Vec3 tip = Vec3::Zero();
};

struct HandKinematics {
  std::vector<ChainState> chains;

  Vec3 pointOn(const HandModel& model, int chain, int joint, const Vec3& local) const;
  /// d(point)/dq for a point rigidly attached after `joint` of `chain`.
  /// Writes into `jac` (3 x dof); off-chain columns are left untouched.
  void accumulatePointJacobian(const HandModel& model, int chain, int joint, const Vec3& point,
                               double scale, Matrix3X& jac) const;
};

HandKinematics compute_kinematics(const HandModel& model, const JointConfig& q);

std::vector<Vec3> fk_fingertips(const HandModel& model, const JointConfig& q);

/// 3 x dof matrix of d(tip of `finger`)/dq. Columns of other chains are zero.
Matrix3X fingertip_jacobian(const HandModel& model, const JointConfig& q, int finger);

std::vector<ProximityDistance> proximity_distances(const HandModel& model, const JointConfig& q);

JointConfig project_limits(const HandModel& model, const JointConfig& q);

// Model files.
HandModel hand_model_from_json(const nlohmann::json& doc);
nlohmann::json hand_model_to_json(const HandModel& model);
HandModel load_hand_model(const std::filesystem::path& path);
void save_hand_model(const HandModel& model, const std::filesystem::path& path);

/// 21-DoF five-chain hand: a 5-joint thumb and four 4-joint fingers.
HandModel default_hand_model();
/// Single planar finger, two joints about z, links 0.04 m and 0.03 m.
HandModel toy_finger_model();

}  // namespace handitl
