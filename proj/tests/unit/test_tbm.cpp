#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "axisforge/error.hpp"
#include "axisforge/pose_sampler.hpp"
#include "axisforge/tbm.hpp"

using namespace axisforge;

namespace {

CameraIntrinsics camera() { return CameraIntrinsics::reference(); }

AxisObservation noiseless_observation(const CameraIntrinsics& K, const Pose& p) {
  return observation_from_lines(project_axes(K, p), Vec2::Zero());
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return v[v.size() / 2];
}

// Corner image and true depth ratios obtained by projecting a camera-frame
// orthogonal triad with the pinhole model directly.
struct ForwardCorner {
  CornerImage corner;
  std::array<double, 3> lambda;
};

ForwardCorner forward_corner(const CameraIntrinsics& K, const Mat3& R, const Vec3& T, double leg) {
  const Mat3 Km = K.matrix();
  ForwardCorner f;
  const Vec3 hO = Km * T;
  f.corner.x_O = hO / hO.z();
  for (int i = 0; i < 3; ++i) {
    const Vec3 X = T + leg * R.col(i);
    const Vec3 h = Km * X;
    f.corner.x[i] = h / h.z();
    f.lambda[i] = X.z() / T.z();
  }
  return f;
}

}  // namespace

TEST_CASE("corner_from_observation places probe points on the directed lines") {
  AxisObservation obs;
  obs.origin_px = Vec2(64, 64);
  obs.dir = {Vec2(1, 0), Vec2(0, 1), Vec2(-0.6, 0.8)};
  const CornerImage k = corner_from_observation(obs, 10.0);
  CHECK((k.x[0] - Vec3(74, 64, 1)).norm() < 1e-12);
  for (int i = 0; i < 3; ++i) {
    CHECK((k.x[i] - k.x_O).norm() == doctest::Approx(10.0));
    CHECK(k.x[i].z() == 1.0);
  }
}

TEST_CASE("solve_depth_scales reproduces forward-projected depth ratios") {
  std::mt19937_64 rng(21);
  const auto K = camera();
  int checked = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const Mat3 R = random_rotation(rng);
    const auto f = forward_corner(K, R, Vec3(0.2, -0.1, 5), 0.5);
    if (std::any_of(f.lambda.begin(), f.lambda.end(), [](double l) { return l <= 0.05; })) continue;
    // Ground truth satisfies every row.
    const auto gt_rows = orthogonality_rows(f.corner, compute_omega(K), f.lambda);
    for (double r : gt_rows) CHECK(std::abs(r) < 1e-12);

    const auto sols = solve_depth_scales(f.corner, K);
    bool match = false;
    for (const auto& s : sols) {
      CHECK(s.residual < 1e-9);
      double rel = 0.0;
      for (int i = 0; i < 3; ++i) rel = std::max(rel, std::abs(s.lambda[i] - f.lambda[i]) / f.lambda[i]);
      if (rel < 1e-9) {
        match = true;
        for (int i = 0; i < 3; ++i)
          for (int j = i + 1; j < 3; ++j)
            CHECK(std::abs(s.legs[i].dot(s.legs[j])) / (s.legs[i].norm() * s.legs[j].norm()) < 1e-6);
      }
    }
    CHECK(match);
    ++checked;
  }
  CHECK(checked > 150);
}

TEST_CASE("coincident image lines are rejected") {
  CornerImage k;
  k.x_O = Vec3(64, 64, 1);
  k.x = {Vec3(74, 64, 1), Vec3(74, 64, 1), Vec3(74, 64, 1)};
  try {
    solve_depth_scales(k, camera());
    FAIL("expected a solver error");
  } catch (const Error& e) {
    CHECK((e.code() == ErrorCode::IllConditioned || e.code() == ErrorCode::NoValidSolution));
  }
}

TEST_CASE("recover_pose round trip over random nondegenerate poses") {
  std::mt19937_64 rng(1234);
  const auto K = camera();
  PoseSamplerConfig cfg;
  double worst_rot = 0.0, worst_t = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const Pose truth = sample_pose(rng, K, cfg);
    const Pose p = recover_pose(noiseless_observation(K, truth), K, LegRatios{}, truth.T.z());
    CHECK(is_rotation(p.R, 1e-9));
    worst_rot = std::max(worst_rot, rotation_angle_between(p.R, truth.R));
    worst_t = std::max(worst_t, (p.T - truth.T).norm() / truth.T.norm());
  }
  CHECK(worst_rot < 1e-6);
  CHECK(worst_t < 1e-6);
}

TEST_CASE("translation scales linearly with scale_lambda_O") {
  std::mt19937_64 rng(77);
  const auto K = camera();
  const Pose truth = sample_pose(rng, K, PoseSamplerConfig{});
  const auto obs = noiseless_observation(K, truth);
  const Pose a = recover_pose(obs, K, LegRatios{}, 2.0);
  const Pose b = recover_pose(obs, K, LegRatios{}, 6.0);
  CHECK((b.T - 3.0 * a.T).norm() < 1e-12);
  CHECK(rotation_angle_between(a.R, b.R) < 1e-12);
}

TEST_CASE("recovered rotation does not depend on the probe distance") {
  std::mt19937_64 rng(99);
  const auto K = camera();
  PoseSamplerConfig cfg;
  int used = 0;
  for (int i = 0; i < 200 && used < 100; ++i) {
    const Pose truth = sample_pose(rng, K, cfg);
    const auto obs = noiseless_observation(K, truth);
    // Probe points beyond an axis's vanishing point back-project behind the
    // camera; only poses where all probes stay on the visible half-line count.
    bool ok = true;
    std::vector<Mat3> Rs;
    for (double probe : {5.0, 10.0, 50.0}) {
      try {
        Rs.push_back(recover_pose(obs, K, LegRatios{}, truth.T.z(), RecoverOptions{probe}).R);
      } catch (const Error&) {
        ok = false;
      }
    }
    if (!ok) continue;
    ++used;
    CHECK(rotation_angle_between(Rs[0], Rs[1]) < 1e-9);
    CHECK(rotation_angle_between(Rs[0], Rs[2]) < 1e-9);
  }
  CHECK(used >= 50);
}

TEST_CASE("median rotation error grows with injected direction noise") {
  const auto K = camera();
  std::vector<double> medians;
  for (double noise_deg : {0.0, 0.5, 2.0}) {
    std::mt19937_64 rng(555), noise_rng(556);
    std::normal_distribution<double> n(0.0, noise_deg * M_PI / 180.0);
    std::vector<double> errs;
    for (int i = 0; i < 200; ++i) {
      const Pose truth = sample_pose(rng, K, PoseSamplerConfig{});
      auto obs = noiseless_observation(K, truth);
      for (auto& d : obs.dir) {
        const double a = std::atan2(d.y(), d.x()) + n(noise_rng);
        d = Vec2(std::cos(a), std::sin(a));
      }
      try {
        errs.push_back(rotation_angle_between(recover_pose(obs, K, LegRatios{}, truth.T.z()).R, truth.R));
      } catch (const Error&) {
        errs.push_back(M_PI);
      }
    }
    medians.push_back(median(errs));
  }
  CHECK(medians[0] <= medians[1]);
  CHECK(medians[1] <= medians[2]);
}

TEST_CASE("invalid recover_pose inputs") {
  AxisObservation obs;
  obs.origin_px = Vec2(64, 64);
  obs.dir = {Vec2(1, 0), Vec2(0, 1), Vec2(-0.7071, -0.7071)};
  CHECK_THROWS_AS(recover_pose(obs, camera(), LegRatios{}, 0.0), Error);
  CHECK_THROWS_AS(recover_pose(obs, camera(), LegRatios{0.0, 1.0}, 1.0), Error);
}

TEST_CASE("corner_vertices honours leg ratios") {
  Pose p;
  p.T = Vec3(0, 0, 4);
  const auto v = corner_vertices(p, LegRatios{2.0, 0.5}, 1.0);
  CHECK((v[1] - v[0]).norm() == doctest::Approx(1.0));
  CHECK((v[2] - v[0]).norm() == doctest::Approx(2.0));
  CHECK((v[3] - v[0]).norm() == doctest::Approx(0.5));
}
