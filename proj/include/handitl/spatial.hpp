#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <stdexcept>

namespace handitl {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Raised by so3_log when the rotation angle is outside the principal branch.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Element of SO(3). Held as a unit quaternion; every construction and
/// composition re-normalizes, so matrices produced from it stay orthonormal.
class Rotation {
 public:
  Rotation() : q_(Eigen::Quaterniond::Identity()) {}
  explicit Rotation(const Eigen::Quaterniond& q);

  /// Builds from a 3x3 matrix. Throws std::invalid_argument if the matrix is
  /// not a proper rotation to within `tol`.
  static Rotation fromMatrix(const Mat3& m, double tol = 1e-6);
  static Rotation identity() { return {}; }

  Mat3 matrix() const { return q_.toRotationMatrix(); }
  const Eigen::Quaterniond& quaternion() const { return q_; }

  Rotation inverse() const { return Rotation(q_.conjugate()); }
  Rotation operator*(const Rotation& rhs) const { return Rotation(q_ * rhs.q_); }
  Vec3 operator*(const Vec3& v) const { return q_ * v; }

  /// Rotation angle in [0, pi].
  double angle() const;

 private:
  Eigen::Quaterniond q_;
};

struct Pose {
  Vec3 position = Vec3::Zero();
  Rotation rotation;

  Vec3 transformPoint(const Vec3& p) const { return position + rotation * p; }
  Pose operator*(const Pose& rhs) const {
    return {transformPoint(rhs.position), rotation * rhs.rotation};
  }
  Pose inverse() const {
    const Rotation rinv = rotation.inverse();
    return {-(rinv * position), rinv};
  }
};

struct Twist {
  Vec3 linear = Vec3::Zero();
  Vec3 angular = Vec3::Zero();

  bool isFinite() const { return linear.allFinite() && angular.allFinite(); }
  Twist operator*(double s) const { return {linear * s, angular * s}; }
  Twist operator+(const Twist& o) const { return {linear + o.linear, angular + o.angular}; }
};

Mat3 skew(const Vec3& v);

/// Rodrigues exponential. A zero vector maps to the identity.
Rotation so3_exp(const Vec3& axis_angle);

/// Principal logarithm. Throws DomainError when the angle is within
/// `kLogBranchMargin` of pi.
Vec3 so3_log(const Rotation& r);

inline constexpr double kLogBranchMargin = 1e-6;

/// First-order exponential moving average over 3-vectors:
/// y <- a * x + (1 - a) * y. The first sample seeds the state.
class EmaFilter {
 public:
  static constexpr double kDefaultCoefficient = 0.3;

  explicit EmaFilter(double coefficient = kDefaultCoefficient);

  Vec3 step(const Vec3& sample);
  void reset() {
    state_.setZero();
    initialized_ = false;
  }
  /// Sets the state directly, marking the filter initialized.
  void seed(const Vec3& state) {
    state_ = state;
    initialized_ = true;
  }

  double coefficient() const { return a_; }
  const Vec3& state() const { return state_; }
  bool initialized() const { return initialized_; }

 private:
  double a_;
  Vec3 state_ = Vec3::Zero();
  bool initialized_ = false;
};

}  // namespace handitl
