#include <doctest.h>

#include <cmath>
#include <random>

#include "axisforge/camera.hpp"
#include "axisforge/error.hpp"

using namespace axisforge;

namespace {

CameraIntrinsics simple_camera() {
  CameraIntrinsics K;
  K.fx = K.fy = 100.0;
  K.cx = K.cy = 64.0;
  K.gamma = 0.0;
  return K;
}

double deg(double d) { return d * M_PI / 180.0; }

// Hand-expanded pinhole projection used as an oracle.
Vec2 oracle_project(const CameraIntrinsics& K, const Pose& p, const Vec3& X) {
  const Vec3 c = p.R * X + p.T;
  const double u = K.fx * c.x() / c.z() + K.gamma * c.y() / c.z() + K.cx;
  const double v = K.fy * c.y() / c.z() + K.cy;
  return {u, v};
}

}  // namespace

TEST_CASE("project_point on the principal ray and along x") {
  const auto K = simple_camera();
  Pose p;
  p.T = Vec3(0, 0, 5);
  const Vec2 o = project_point(K, p, Vec3::Zero());
  CHECK(o.x() == doctest::Approx(64.0));
  CHECK(o.y() == doctest::Approx(64.0));
  const Vec2 a = project_point(K, p, Vec3(1, 0, 0));
  CHECK(a.x() == doctest::Approx(84.0));
  CHECK(a.y() == doctest::Approx(64.0));
}

TEST_CASE("project_point behind the camera") {
  const auto K = simple_camera();
  Pose p;
  p.T = Vec3(0, 0, -5);
  try {
    project_point(K, p, Vec3::Zero());
    FAIL("expected NonPositiveDepth");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NonPositiveDepth);
  }
}

TEST_CASE("project_point is invariant to scaling the camera-frame point") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1.0, 1.0), s(0.1, 10.0);
  CameraIntrinsics K = simple_camera();
  K.gamma = 0.7;
  for (int i = 0; i < 100; ++i) {
    const Vec3 X(u(rng), u(rng), 3.0 + u(rng));
    const Vec2 a = project_camera_point(K, X);
    const Vec2 b = project_camera_point(K, s(rng) * X);
    CHECK((a - b).norm() < 1e-9);
  }
}

TEST_CASE("compute_omega matches hand-computed values") {
  const Omega w = compute_omega(simple_camera());
  Mat3 expected;
  expected << 1e-4, 0, -6.4e-3,
              0, 1e-4, -6.4e-3,
              -6.4e-3, -6.4e-3, 1.8192;
  CHECK((w.m - expected).cwiseAbs().maxCoeff() < 1e-12);

  CameraIntrinsics unit;
  unit.fx = unit.fy = 1.0;
  unit.cx = unit.cy = 0.0;
  CHECK((compute_omega(unit).m - Mat3::Identity()).norm() < 1e-15);
}

TEST_CASE("compute_omega is symmetric positive definite and measures ray angles") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  CameraIntrinsics K;
  K.fx = 120.0;
  K.fy = 95.0;
  K.gamma = 1.5;
  K.cx = 60.0;
  K.cy = 70.0;
  const Omega w = compute_omega(K);
  CHECK((w.m - w.m.transpose()).norm() < 1e-12);
  const Mat3 Ki = K.inverse();
  CHECK((Ki * K.matrix() - Mat3::Identity()).norm() < 1e-12);
  for (int i = 0; i < 100; ++i) {
    Vec3 x(u(rng), u(rng), u(rng));
    if (x.norm() < 1e-6) continue;
    CHECK(x.dot(w.m * x) > 0.0);
    const Vec3 a(100 * u(rng), 100 * u(rng), 1.0);
    const Vec3 b(100 * u(rng), 100 * u(rng), 1.0);
    const double lhs = a.dot(w.m * b);
    const double rhs = (Ki * a).dot(Ki * b);
    CHECK(std::abs(lhs - rhs) <= 1e-10 * std::max(1.0, std::abs(rhs)));
  }
}

TEST_CASE("project_axes flags the axis along the optical ray") {
  Pose p;
  p.T = Vec3(0, 0, 5);
  try {
    project_axes(simple_camera(), p);
    FAIL("expected DegenerateAxis");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::DegenerateAxis);
    CHECK(e.index() == 2);
  }
}

TEST_CASE("project_axes agrees with projecting the four points") {
  const auto K = simple_camera();
  Pose p;
  p.R = rot_x(deg(20)) * rot_y(deg(30));
  p.T = Vec3(0.2, -0.1, 5);
  const AxisLines lines = project_axes(K, p);
  const Vec2 o = oracle_project(K, p, Vec3::Zero());
  CHECK((lines.origin_px - o).norm() < 1e-12);
  for (int i = 0; i < 3; ++i) {
    const Vec2 d = (oracle_project(K, p, Vec3::Unit(i)) - o).normalized();
    CHECK((lines.dir[i] - d).norm() < 1e-12);
    CHECK(std::abs(lines.dir[i].norm() - 1.0) < 1e-9);
    if (std::abs(d.x()) > 1e-12) CHECK(lines.slope[i] == doctest::Approx(d.y() / d.x()));
  }
}

TEST_CASE("projected direction does not depend on axis length") {
  std::mt19937_64 rng(5);
  const auto K = simple_camera();
  for (int i = 0; i < 50; ++i) {
    Pose p;
    p.R = random_rotation(rng);
    p.T = Vec3(0.1, 0.2, 6.0);
    AxisLines a, b;
    try {
      a = project_axes(K, p, 1.0);
      b = project_axes(K, p, 0.25);
    } catch (const Error&) {
      continue;
    }
    for (int k = 0; k < 3; ++k) CHECK((a.dir[k] - b.dir[k]).norm() < 1e-9);
  }
}

TEST_CASE("rescaled intrinsics keep the field of view") {
  const auto K = CameraIntrinsics::reference();
  const auto S = K.rescaled(32, 32);
  Pose p;
  p.R = rot_x(0.3) * rot_z(0.5);
  p.T = Vec3(0.2, -0.1, 4.0);
  const Vec2 big = project_point(K, p, Vec3(0.3, 0.4, -0.2));
  const Vec2 small = project_point(S, p, Vec3(0.3, 0.4, -0.2));
  CHECK(small.x() == doctest::Approx((big.x() + 0.5) * 0.25 - 0.5));
  CHECK(small.y() == doctest::Approx((big.y() + 0.5) * 0.25 - 0.5));
}

TEST_CASE("rotation helpers") {
  std::mt19937_64 rng(9);
  for (int i = 0; i < 20; ++i) {
    const Mat3 R = random_rotation(rng);
    CHECK(is_rotation(R));
    CHECK(rotation_angle_between(R, R) < 1e-12);
    CHECK(rotation_angle_between(R, R * rot_z(deg(30))) == doctest::Approx(deg(30)));
    Mat3 flip = Mat3::Identity();
    flip(1, 1) = flip(2, 2) = -1.0;
    CHECK(rotation_angle_between(R, R * flip) == doctest::Approx(M_PI));
    // Perturbed rotation projects back onto SO(3).
    Mat3 M = R;
    M(0, 1) += 1e-3;
    CHECK(is_rotation(nearest_rotation(M)));
    CHECK(rotation_angle_between(nearest_rotation(M), R) < 1e-3);
  }
}

TEST_CASE("invalid intrinsics are rejected") {
  CameraIntrinsics K;
  K.fx = 0.0;
  CHECK_THROWS_AS(K.validate(), Error);
  K = CameraIntrinsics{};
  K.width = 0;
  CHECK_THROWS_AS(K.validate(), Error);
  CHECK_NOTHROW(CameraIntrinsics{}.validate());
}
