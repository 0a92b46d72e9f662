#include "handitl/spatial.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace handitl {

Rotation::Rotation(const Eigen::Quaterniond& q) : q_(q) {
  const double n = q_.norm();
  if (!(n > 0.0) || !std::isfinite(n)) {
    throw std::invalid_argument("Rotation: degenerate quaternion");
  }
  q_.coeffs() /= n;
  // Canonical hemisphere keeps the logarithm on the principal branch.
  if (q_.w() < 0.0) q_.coeffs() = -q_.coeffs();
}

Rotation Rotation::fromMatrix(const Mat3& m, double tol) {
  if (!m.allFinite()) throw std::invalid_argument("Rotation: non-finite matrix");
  const double ortho_err = (m.transpose() * m - Mat3::Identity()).cwiseAbs().maxCoeff();
  const double det_err = std::abs(m.determinant() - 1.0);
  if (ortho_err > tol || det_err > tol) {
    throw std::invalid_argument("Rotation: matrix is not a proper rotation (orthonormality error " +
                                std::to_string(ortho_err) + ")");
  }
  return Rotation(Eigen::Quaterniond(m));
}

double Rotation::angle() const {
  return 2.0 * std::atan2(q_.vec().norm(), std::abs(q_.w()));
}

Mat3 skew(const Vec3& v) {
  Mat3 s;
  s << 0.0, -v.z(), v.y(),
       v.z(), 0.0, -v.x(),
       -v.y(), v.x(), 0.0;
  return s;
}

Rotation so3_exp(const Vec3& axis_angle) {
  const double theta = axis_angle.norm();
  const double half = 0.5 * theta;
  double s;  // sin(theta/2) / theta
  if (theta < 1e-6) {
    s = 0.5 - theta * theta / 48.0;
  } else {
    s = std::sin(half) / theta;
  }
  Eigen::Quaterniond q;
  q.w() = std::cos(half);
  q.vec() = s * axis_angle;
  return Rotation(q);
}

Vec3 so3_log(const Rotation& r) {
  const Eigen::Quaterniond& q = r.quaternion();  // w >= 0 by construction
  const double n = q.vec().norm();
  const double w = q.w();
  const double theta = 2.0 * std::atan2(n, w);
  if (theta >= std::numbers::pi - kLogBranchMargin) {
    throw DomainError("so3_log: rotation angle " + std::to_string(theta) +
                      " is outside the principal branch");
  }
  if (n < 1e-8) {
    // theta / n = (2 / w) * (1 - n^2 / (3 w^2) + ...)
    return (2.0 / w) * (1.0 - n * n / (3.0 * w * w)) * q.vec();
  }
  return (theta / n) * q.vec();
}

EmaFilter::EmaFilter(double coefficient) : a_(coefficient) {
  if (!(coefficient > 0.0 && coefficient <= 1.0)) {
    throw std::invalid_argument("EmaFilter: coefficient must lie in (0, 1]");
  }
}

Vec3 EmaFilter::step(const Vec3& sample) {
  if (!initialized_) {
    state_ = sample;
    initialized_ = true;
  } else {
    state_ = a_ * sample + (1.0 - a_) * state_;
  }
  return state_;
}

}  // namespace handitl
