#pragma once

#include <array>
#include <random>

#include <Eigen/Core>

namespace axisforge {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;

inline constexpr int kNumAxes = 3;

// Pixel centers sit at integer coordinates: column j, row i is the point (j, i).
struct CameraIntrinsics {
  double fx = 100.0;
  double fy = 100.0;
  double gamma = 0.0;
  double cx = 64.0;
  double cy = 64.0;
  int width = 128;
  int height = 128;

  Mat3 matrix() const;
  Mat3 inverse() const;

  // Throws InvalidArgument when focal lengths or image size are not positive.
  void validate() const;

  // Same camera sampled on a width x height grid covering the same field of view.
  CameraIntrinsics rescaled(int new_width, int new_height) const;

  // The 128x128, f = 100 configuration that metric thresholds are quoted at.
  static CameraIntrinsics reference();
};

struct Pose {
  Mat3 R = Mat3::Identity();
  Vec3 T = Vec3(0.0, 0.0, 5.0);
};

// Image of the absolute conic, K^-T K^-1.
struct Omega {
  Mat3 m = Mat3::Identity();
};

// Image of the object's tri-axis: the projected origin and one directed unit
// vector per object axis, pointing from the origin toward the axis endpoint.
struct AxisLines {
  Vec2 origin_px = Vec2::Zero();
  std::array<Vec2, kNumAxes> dir{};
  std::array<double, kNumAxes> slope{};
};

Vec2 project_point(const CameraIntrinsics& K, const Pose& pose, const Vec3& X_obj);

// Projection of a camera-frame point.
Vec2 project_camera_point(const CameraIntrinsics& K, const Vec3& X_cam);

Omega compute_omega(const CameraIntrinsics& K);

AxisLines project_axes(const CameraIntrinsics& K, const Pose& pose, double axis_len = 1.0);

// Pixel length of each projected axis segment (origin to endpoint).
std::array<double, kNumAxes> projected_axis_lengths(const CameraIntrinsics& K, const Pose& pose,
                                                    double axis_len = 1.0);

double slope_of(const Vec2& dir);

// Rotation helpers.
Mat3 rot_x(double radians);
Mat3 rot_y(double radians);
Mat3 rot_z(double radians);
Mat3 random_rotation(std::mt19937_64& rng);

// Nearest rotation in Frobenius norm via the polar decomposition. Input must
// have positive determinant.
Mat3 nearest_rotation(const Mat3& M);

double rotation_angle_between(const Mat3& R1, const Mat3& R2);  // radians

bool is_rotation(const Mat3& R, double tol = 1e-9);

}  // namespace axisforge
