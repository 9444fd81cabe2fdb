#pragma once

#include <array>
#include <vector>

#include "axisforge/camera.hpp"
#include "axisforge/extraction.hpp"

namespace axisforge {

// Homogeneous image points of a cube corner: the corner itself and one sample
// point on each directed leg line (third component 1).
struct CornerImage {
  Vec3 x_O = Vec3::UnitZ();
  std::array<Vec3, kNumAxes> x{};  // x_A, x_B, x_C
};

// Depth scales with lambda_O = 1. legs are camera-frame leg vectors and are
// only filled by the overload that knows K.
struct CornerSolution {
  std::array<double, kNumAxes> lambda{};
  std::array<Vec3, kNumAxes> legs{};
  double residual = 0.0;
};

struct LegRatios {
  double r_B = 1.0;
  double r_C = 1.0;

  void validate() const;
};

inline constexpr double kDefaultProbePx = 2.0;

CornerImage corner_from_observation(const AxisObservation& obs, double probe_px = kDefaultProbePx);

// The three leg-orthogonality expressions (A,B), (B,C), (C,A) evaluated at lambda.
std::array<double, kNumAxes> orthogonality_rows(const CornerImage& corner, const Omega& omega,
                                                const std::array<double, kNumAxes>& lambda);

// All real, finite, strictly positive solutions of the orthogonality system.
// Throws NoValidSolution, or IllConditioned if the only candidates hit a
// vanishing elimination denominator.
std::vector<CornerSolution> solve_depth_scales(const CornerImage& corner, const Omega& omega);
std::vector<CornerSolution> solve_depth_scales(const CornerImage& corner, const CameraIntrinsics& K);

// Corner vertices O, A, B, C in the camera frame for a recovered pose, with
// leg lengths 1 : r_B : r_C scaled by leg_length.
std::array<Vec3, 4> corner_vertices(const Pose& pose, const LegRatios& ratios, double leg_length = 1.0);

struct RecoverOptions {
  double probe_px = kDefaultProbePx;
};

// Full pose from a tri-axis observation. T = scale_lambda_O * K^-1 x_O, so
// passing the true depth T_z reproduces the true translation.
Pose recover_pose(const AxisObservation& obs, const CameraIntrinsics& K, const LegRatios& ratios,
                  double scale_lambda_O, const RecoverOptions& opts = {});

// Sum over axes of the angle between the pose's projected axes and obs.dir.
double axis_reprojection_residual(const AxisObservation& obs, const CameraIntrinsics& K, const Pose& pose);

}  // namespace axisforge
