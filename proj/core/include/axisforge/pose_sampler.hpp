#pragma once

#include <random>

#include "axisforge/camera.hpp"

namespace axisforge {

// Random object poses for synthetic scenes: rotation uniform on SO(3),
// depth uniform in [depth_min, depth_max], lateral offset uniform in a square
// scaled by depth. A pose is rejected when any projected axis is shorter than
// min_axis_px, when two projected axis lines are within min_line_separation_deg
// of collinear (an object axis nearly parallel to the image plane, where the
// corner back-projection is ill-conditioned), or when the unit cube is not
// fully in front of the camera.
struct PoseSamplerConfig {
  double depth_min = 3.5;
  double depth_max = 4.5;
  double lateral = 0.08;  // |T_x|, |T_y| <= lateral * T_z
  double axis_len = 1.0;
  double min_axis_px = 8.0;
  double min_line_separation_deg = 10.0;
  int max_rejections = 1000;

  void validate() const;
};

// Throws DegenerateSamplingExhausted after max_rejections consecutive rejections.
Pose sample_pose(std::mt19937_64& rng, const CameraIntrinsics& K, const PoseSamplerConfig& cfg);

// Smallest angle between two projected axis lines, ignoring direction (degrees).
double min_line_separation_deg(const AxisLines& lines);

bool pose_is_admissible(const CameraIntrinsics& K, const Pose& pose, const PoseSamplerConfig& cfg);

}  // namespace axisforge
