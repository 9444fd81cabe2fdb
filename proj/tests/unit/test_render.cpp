#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "axisforge/error.hpp"
#include "axisforge/extraction.hpp"
#include "axisforge/pose_sampler.hpp"
#include "axisforge/render.hpp"

using namespace axisforge;

namespace {

double angle_deg(const Vec2& a, const Vec2& b) {
  return std::acos(std::clamp(a.dot(b), -1.0, 1.0)) * 180.0 / M_PI;
}

Pose tilted_pose() {
  Pose p;
  p.R = rot_x(20 * M_PI / 180) * rot_y(30 * M_PI / 180);
  p.T = Vec3(0.2, -0.1, 5);
  return p;
}

CameraIntrinsics centered_camera() {
  CameraIntrinsics K = CameraIntrinsics::reference();
  K.cx = K.cy = 63.5;
  return K;
}

}  // namespace

TEST_CASE("render_triaxis draws one segment per channel") {
  const auto K = CameraIntrinsics::reference();
  const double thickness = 2.0;
  const auto img = render_triaxis(K, tilted_pose(), 1.0, thickness);
  CHECK(img.width == 128);
  CHECK(img.height == 128);
  CHECK(img.data.minCoeff() >= 0.0);
  CHECK(img.data.maxCoeff() <= 1.0);
  for (int c = 0; c < 3; ++c) {
    int nonzero = 0;
    for (Eigen::Index p = 0; p < img.pixel_count(); ++p)
      if (img.data[p * 3 + c] > 0.0) ++nonzero;
    CHECK(nonzero > thickness * 5);
  }
  // The projected origin is covered by every channel.
  const AxisLines lines = project_axes(K, tilted_pose());
  const int r = static_cast<int>(std::lround(lines.origin_px.y()));
  const int col = static_cast<int>(std::lround(lines.origin_px.x()));
  for (int c = 0; c < 3; ++c) CHECK(img.at(r, col, c) == 1.0);
}

TEST_CASE("render_triaxis is deterministic") {
  const auto K = CameraIntrinsics::reference();
  const auto a = render_triaxis(K, tilted_pose(), 1.0, 2.0);
  const auto b = render_triaxis(K, tilted_pose(), 1.0, 2.0);
  CHECK(a == b);
}

TEST_CASE("render_triaxis propagates degenerate axes") {
  Pose p;
  p.T = Vec3(0, 0, 5);
  CHECK_THROWS_AS(render_triaxis(CameraIntrinsics::reference(), p, 1.0, 2.0), Error);
}

TEST_CASE("hard extraction of a clean render recovers the projected axes") {
  const auto K = CameraIntrinsics::reference();
  const auto truth = project_axes(K, tilted_pose());
  const auto obs = extract_axes_hard(render_triaxis(K, tilted_pose(), 1.0, 2.0));
  for (int i = 0; i < 3; ++i) CHECK(angle_deg(obs.dir[i], truth.dir[i]) < 1.0);
  CHECK((obs.origin_px - truth.origin_px).norm() < 1.0);
}

TEST_CASE("clean-render extraction over random poses") {
  const auto K = CameraIntrinsics::reference();
  std::mt19937_64 rng(2024);
  std::vector<double> errs;
  for (int n = 0; n < 500; ++n) {
    const Pose p = sample_pose(rng, K, PoseSamplerConfig{});
    const auto truth = project_axes(K, p);
    try {
      const auto obs = extract_axes_hard(render_triaxis(K, p, 1.0, 2.0));
      for (int i = 0; i < 3; ++i) errs.push_back(angle_deg(obs.dir[i], truth.dir[i]));
    } catch (const Error&) {
      for (int i = 0; i < 3; ++i) errs.push_back(180.0);
    }
  }
  std::nth_element(errs.begin(), errs.begin() + errs.size() / 2, errs.end());
  CHECK(errs[errs.size() / 2] < 2.0);
}

TEST_CASE("render_query of a fronto-parallel cube is a centered square") {
  const auto K = centered_camera();
  Pose p;
  p.T = Vec3(0, 0, 5);
  const auto img = render_query(K, p);
  CHECK(img.data.minCoeff() >= 0.0);
  CHECK(img.data.maxCoeff() <= 1.0);
  int r0 = 1000, r1 = -1, c0 = 1000, c1 = -1;
  for (int r = 0; r < img.height; ++r)
    for (int c = 0; c < img.width; ++c)
      if (img.at(r, c) > 0.0) {
        r0 = std::min(r0, r); r1 = std::max(r1, r);
        c0 = std::min(c0, c); c1 = std::max(c1, c);
      }
  CHECK(r1 - r0 == c1 - c0);
  CHECK(r0 + r1 == 127);
  CHECK(c0 + c1 == 127);
  // Front face at depth 4 spans f / 4 = 25 px either side of center.
  CHECK(c1 - c0 + 1 == doctest::Approx(50).epsilon(0.05));
}

TEST_CASE("render_query is deterministic") {
  const auto K = CameraIntrinsics::reference();
  CHECK(render_query(K, tilted_pose()) == render_query(K, tilted_pose()));
}

TEST_CASE("render_query rejects cubes crossing the camera plane") {
  Pose p;
  p.T = Vec3(0, 0, 0.5);
  CHECK_THROWS_AS(render_query(CameraIntrinsics::reference(), p), Error);
}

TEST_CASE("rotating the scene about the optical axis rotates the query image") {
  const auto K = centered_camera();
  QueryOptions opts;
  opts.light = Vec3(0, 0, -1);  // invariant under rotation about the optical axis
  std::mt19937_64 rng(8);
  for (int n = 0; n < 10; ++n) {
    const Pose p = sample_pose(rng, K, PoseSamplerConfig{});
    Pose q;
    q.R = rot_z(M_PI / 2) * p.R;
    q.T = rot_z(M_PI / 2) * p.T;
    const auto a = render_query(K, p, opts);
    const auto b = render_query(K, q, opts);
    // (u, v) -> (2c - v, u) with c = 63.5.
    double diff = 0.0;
    for (int r = 0; r < 128; ++r)
      for (int c = 0; c < 128; ++c) diff += std::abs(b.at(r, c) - a.at(127 - c, r));
    CHECK(diff / (128.0 * 128.0) < 0.02);
  }
}

TEST_CASE("apply_degradation") {
  QueryImage ones(64, 48);
  ones.data.setOnes();

  SUBCASE("identity spec") {
    const auto img = render_query(CameraIntrinsics::reference(), tilted_pose());
    CHECK(apply_degradation(img, DegradationSpec{}) == img);
  }
  SUBCASE("occlusion covers the requested area") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const auto out = apply_degradation(ones, DegradationSpec{0.25, 0.0, 0.0, seed});
      const auto zeros = (out.data.array() == 0.0).count();
      CHECK(std::abs(zeros - 0.25 * 64 * 48) <= 0.1 * 0.25 * 64 * 48);
    }
  }
  SUBCASE("seeded and shape preserving") {
    const DegradationSpec spec{0.1, 0.2, 1.0, 42};
    const auto a = apply_degradation(ones, spec);
    const auto b = apply_degradation(ones, spec);
    CHECK(a == b);
    CHECK(a.width == 64);
    CHECK(a.height == 48);
    CHECK(a.data.minCoeff() >= 0.0);
    CHECK(a.data.maxCoeff() <= 1.0);
    const auto tri = apply_degradation(render_triaxis(CameraIntrinsics::reference(), tilted_pose(), 1.0, 2.0), spec);
    CHECK(tri.size() == 128 * 128 * 3);
  }
  SUBCASE("invalid spec") {
    CHECK_THROWS_AS(apply_degradation(ones, DegradationSpec{1.0, 0.0, 0.0, 0}), Error);
    CHECK_THROWS_AS(apply_degradation(ones, DegradationSpec{0.0, -1.0, 0.0, 0}), Error);
  }
}
