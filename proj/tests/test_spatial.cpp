#include "handitl/spatial.hpp"

#include "doctest.h"

#include <cmath>
#include <numbers>
#include <random>

using namespace handitl;

namespace {

constexpr double kPi = std::numbers::pi;

Vec3 random_axis_angle(std::mt19937_64& rng, double max_angle) {
  std::normal_distribution<double> n(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, max_angle);
  return Vec3(n(rng), n(rng), n(rng)).normalized() * u(rng);
}

double orthonormality_error(const Mat3& r) { return (r.transpose() * r - Mat3::Identity()).cwiseAbs().maxCoeff(); }

}  // namespace

TEST_CASE("exp of zero is the identity") {
  CHECK(so3_exp(Vec3::Zero()).matrix().isApprox(Mat3::Identity(), 0.0));
  CHECK(so3_log(Rotation()).norm() == 0.0);
}

TEST_CASE("quarter turn about z maps x to y") {
  const Rotation r = so3_exp(Vec3(0, 0, kPi / 2));
  CHECK((r * Vec3::UnitX() - Vec3::UnitY()).norm() < 1e-15);
  CHECK((so3_log(r) - Vec3(0, 0, kPi / 2)).norm() < 1e-15);
}

TEST_CASE("exp/log roundtrip on the principal branch") {
  std::mt19937_64 rng(1);
  double worst = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const Vec3 v = random_axis_angle(rng, kPi - 1e-3);
    worst = std::max(worst, (so3_log(so3_exp(v)) - v).norm());
  }
  CHECK(worst <= 1e-9);
  // Small and tiny angles exercise the series branches.
  for (double s : {1e-3, 1e-6, 1e-9, 1e-12}) {
    const Vec3 v = s * Vec3(0.3, -0.5, 0.8);
    CHECK((so3_log(so3_exp(v)) - v).norm() <= 1e-9 * s + 1e-300);
  }
}

TEST_CASE("log near pi is a domain error") {
  CHECK_THROWS_AS(so3_log(so3_exp(Vec3(kPi, 0, 0))), DomainError);
  CHECK_THROWS_AS(so3_log(so3_exp(Vec3(0, kPi - 1e-8, 0))), DomainError);
  CHECK_NOTHROW(so3_log(so3_exp(Vec3(0, 0, kPi - 1e-3))));
}

TEST_CASE("exp agrees with Eigen's angle-axis") {
  std::mt19937_64 rng(2);
  for (int i = 0; i < 100; ++i) {
    const Vec3 v = random_axis_angle(rng, kPi);
    const Mat3 expected = Eigen::AngleAxisd(v.norm(), v.normalized()).toRotationMatrix();
    CHECK((so3_exp(v).matrix() - expected).cwiseAbs().maxCoeff() < 1e-14);
  }
}

TEST_CASE("a million compositions stay orthonormal") {
  std::mt19937_64 rng(3);
  Rotation r;
  std::vector<Rotation> steps;
  for (int i = 0; i < 64; ++i) steps.push_back(so3_exp(random_axis_angle(rng, 0.1)));
  for (int i = 0; i < 1000000; ++i) r = r * steps[static_cast<std::size_t>(i) & 63];
  const Mat3 m = r.matrix();
  CHECK(orthonormality_error(m) <= 1e-9);
  CHECK(std::abs(m.determinant() - 1.0) <= 1e-9);
}

TEST_CASE("rotation from matrix validates its input") {
  const Mat3 m = so3_exp(Vec3(0.1, 0.2, 0.3)).matrix();
  CHECK(Rotation::fromMatrix(m).matrix().isApprox(m, 1e-12));
  Mat3 reflect = Mat3::Identity();
  reflect(2, 2) = -1.0;
  CHECK_THROWS_AS(Rotation::fromMatrix(reflect), std::invalid_argument);
  CHECK_THROWS_AS(Rotation::fromMatrix(2.0 * Mat3::Identity()), std::invalid_argument);
}

TEST_CASE("rotation angle and inverse") {
  const Rotation r = so3_exp(Vec3(0.0, 0.4, 0.0));
  CHECK(r.angle() == doctest::Approx(0.4).epsilon(1e-14));
  CHECK((r * r.inverse()).angle() < 1e-15);
  CHECK(r.quaternion().w() >= 0.0);
}

TEST_CASE("pose composition and inverse") {
  const Pose a{Vec3(1, 2, 3), so3_exp(Vec3(0.1, -0.2, 0.3))};
  const Pose b{Vec3(-0.5, 0.2, 0.0), so3_exp(Vec3(0.0, 0.5, 0.0))};
  const Vec3 p(0.3, 0.1, -0.7);
  CHECK(((a * b).transformPoint(p) - a.transformPoint(b.transformPoint(p))).norm() < 1e-14);
  const Pose id = a * a.inverse();
  CHECK(id.position.norm() < 1e-14);
  CHECK(id.rotation.angle() < 1e-7);
}

TEST_CASE("twist arithmetic and finiteness") {
  const Twist t{Vec3(1, 2, 3), Vec3(4, 5, 6)};
  const Twist s = t * 2.0 + t;
  CHECK(s.linear == Vec3(3, 6, 9));
  CHECK(s.angular == Vec3(12, 15, 18));
  CHECK(t.isFinite());
  CHECK_FALSE(Twist{Vec3(NAN, 0, 0), Vec3::Zero()}.isFinite());
}

TEST_CASE("skew matrix reproduces the cross product") {
  const Vec3 a(0.3, -1.2, 2.0), b(-0.7, 0.4, 0.9);
  CHECK((skew(a) * b - a.cross(b)).norm() < 1e-15);
}

TEST_CASE("EMA: first sample seeds the state") {
  EmaFilter f(0.3);
  CHECK_FALSE(f.initialized());
  CHECK(f.step(Vec3(1, 2, 3)) == Vec3(1, 2, 3));
  CHECK(f.initialized());
  CHECK((f.step(Vec3::Zero()) - 0.7 * Vec3(1, 2, 3)).norm() < 1e-15);
}

TEST_CASE("EMA: constant stream converges within the geometric bound") {
  EmaFilter f(0.3);
  f.seed(Vec3::Zero());
  const Vec3 c(2.0, -1.0, 0.5);
  Vec3 y;
  for (int k = 0; k < 20; ++k) y = f.step(c);
  CHECK((y - c).norm() <= std::pow(0.7, 19) * c.norm());
}

TEST_CASE("EMA: zero stream decays geometrically and monotonically") {
  EmaFilter f(0.3);
  const Vec3 y0(0.4, -0.2, 0.1);
  f.seed(y0);
  double prev = y0.norm();
  for (int k = 1; k <= 40; ++k) {
    const Vec3 y = f.step(Vec3::Zero());
    CHECK((y - std::pow(0.7, k) * y0).norm() <= 1e-15);
    CHECK(y.norm() < prev);
    prev = y.norm();
  }
}

TEST_CASE("EMA: alternating +-1 with a = 0.5 oscillates with amplitude 1/3") {
  EmaFilter f(0.5);
  double last = 0.0;
  for (int k = 0; k < 200; ++k) last = f.step(Vec3((k % 2 == 0) ? 1.0 : -1.0, 0, 0)).x();
  // Step 199 fed -1, so the state sits at the negative extreme.
  CHECK(last == doctest::Approx(-1.0 / 3.0).epsilon(1e-12));
  CHECK(f.step(Vec3(1, 0, 0)).x() == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("EMA: default coefficient decays below 1e-4 within 26 steps") {
  EmaFilter f;
  CHECK(f.coefficient() == 0.3);
  f.seed(Vec3(1, 0, 0));
  Vec3 y;
  for (int k = 0; k < 26; ++k) y = f.step(Vec3::Zero());
  CHECK(y.norm() < 1e-4);
}

TEST_CASE("EMA: coefficient must lie in (0, 1]") {
  CHECK_THROWS_AS(EmaFilter(0.0), std::invalid_argument);
  CHECK_THROWS_AS(EmaFilter(1.5), std::invalid_argument);
  CHECK_THROWS_AS(EmaFilter(NAN), std::invalid_argument);
  CHECK_NOTHROW(EmaFilter(1.0));
}

TEST_CASE("EMA reset forgets the state") {
  EmaFilter f;
  f.step(Vec3(1, 1, 1));
  f.reset();
  CHECK_FALSE(f.initialized());
  CHECK(f.step(Vec3(5, 0, 0)) == Vec3(5, 0, 0));
}
