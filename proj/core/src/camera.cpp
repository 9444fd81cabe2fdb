#include "axisforge/camera.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <Eigen/Dense>
#include <Eigen/SVD>

#include "axisforge/error.hpp"

namespace axisforge {

namespace {
constexpr double kMinDepth = 1e-9;
constexpr double kDegenerateAxisPx = 1e-6;
}  // namespace

Mat3 CameraIntrinsics::matrix() const {
  Mat3 K;
  K << fx, gamma, cx,
       0.0, fy, cy,
       0.0, 0.0, 1.0;
  return K;
}

Mat3 CameraIntrinsics::inverse() const {
  // Closed form for an upper-triangular K.
  Mat3 Ki;
  Ki << 1.0 / fx, -gamma / (fx * fy), (gamma * cy - cx * fy) / (fx * fy),
        0.0, 1.0 / fy, -cy / fy,
        0.0, 0.0, 1.0;
  return Ki;
}

void CameraIntrinsics::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0))
    throw Error(ErrorCode::InvalidArgument, "focal lengths must be positive");
  if (width <= 0 || height <= 0)
    throw Error(ErrorCode::InvalidArgument, "image size must be positive");
  if (!std::isfinite(gamma) || !std::isfinite(cx) || !std::isfinite(cy))
    throw Error(ErrorCode::InvalidArgument, "intrinsics must be finite");
}

CameraIntrinsics CameraIntrinsics::rescaled(int new_width, int new_height) const {
  const double sx = static_cast<double>(new_width) / width;
  const double sy = static_cast<double>(new_height) / height;
  CameraIntrinsics out = *this;
  out.fx = fx * sx;
  out.fy = fy * sy;
  out.gamma = gamma * sx;
  // Pixel centers at integers: continuous coordinate u maps to sx * (u + 0.5) - 0.5.
  out.cx = sx * (cx + 0.5) - 0.5;
  out.cy = sy * (cy + 0.5) - 0.5;
  out.width = new_width;
  out.height = new_height;
  return out;
}

CameraIntrinsics CameraIntrinsics::reference() { return CameraIntrinsics{}; }

Vec2 project_camera_point(const CameraIntrinsics& K, const Vec3& X_cam) {
  const double z = X_cam.z();
  if (!(z > kMinDepth))
    throw Error(ErrorCode::NonPositiveDepth, "depth " + std::to_string(z));
  const double x = X_cam.x() / z;
  const double y = X_cam.y() / z;
  return {K.fx * x + K.gamma * y + K.cx, K.fy * y + K.cy};
}

Vec2 project_point(const CameraIntrinsics& K, const Pose& pose, const Vec3& X_obj) {
  return project_camera_point(K, pose.R * X_obj + pose.T);
}

Omega compute_omega(const CameraIntrinsics& K) {
  const Mat3 Ki = K.inverse();
  Omega w;
  w.m = Ki.transpose() * Ki;
  w.m = 0.5 * (w.m + w.m.transpose()).eval();
  return w;
}

double slope_of(const Vec2& dir) {
  if (std::abs(dir.x()) > 1e-12) return dir.y() / dir.x();
  return dir.y() >= 0.0 ? std::numeric_limits<double>::infinity()
                        : -std::numeric_limits<double>::infinity();
}

std::array<double, kNumAxes> projected_axis_lengths(const CameraIntrinsics& K, const Pose& pose,
                                                    double axis_len) {
  const Vec2 o = project_point(K, pose, Vec3::Zero());
  std::array<double, kNumAxes> out{};
  for (int i = 0; i < kNumAxes; ++i)
    out[i] = (project_point(K, pose, axis_len * Vec3::Unit(i)) - o).norm();
  return out;
}

AxisLines project_axes(const CameraIntrinsics& K, const Pose& pose, double axis_len) {
  if (!(axis_len > 0.0)) throw Error(ErrorCode::InvalidArgument, "axis_len must be positive");
  AxisLines lines;
  lines.origin_px = project_point(K, pose, Vec3::Zero());
  for (int i = 0; i < kNumAxes; ++i) {
    const Vec2 d = project_point(K, pose, axis_len * Vec3::Unit(i)) - lines.origin_px;
    const double n = d.norm();
    if (n < kDegenerateAxisPx)
      throw Error(ErrorCode::DegenerateAxis, "axis projects to a point", i);
    lines.dir[i] = d / n;
    lines.slope[i] = slope_of(lines.dir[i]);
  }
  return lines;
}

Mat3 rot_x(double a) {
  Mat3 R;
  R << 1, 0, 0,
       0, std::cos(a), -std::sin(a),
       0, std::sin(a), std::cos(a);
  return R;
}

Mat3 rot_y(double a) {
  Mat3 R;
  R << std::cos(a), 0, std::sin(a),
       0, 1, 0,
       -std::sin(a), 0, std::cos(a);
  return R;
}

Mat3 rot_z(double a) {
  Mat3 R;
  R << std::cos(a), -std::sin(a), 0,
       std::sin(a), std::cos(a), 0,
       0, 0, 1;
  return R;
}

Mat3 random_rotation(std::mt19937_64& rng) {
  // Uniform on SO(3): normalized 4D Gaussian as a unit quaternion.
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::Quaterniond q;
  do {
    q = Eigen::Quaterniond(n(rng), n(rng), n(rng), n(rng));
  } while (q.norm() < 1e-12);
  q.normalize();
  return q.toRotationMatrix();
}

Mat3 nearest_rotation(const Mat3& M) {
  Eigen::JacobiSVD<Mat3> svd(M, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 R = svd.matrixU() * svd.matrixV().transpose();
  if (R.determinant() < 0.0) {
    Mat3 D = Mat3::Identity();
    D(2, 2) = -1.0;
    R = svd.matrixU() * D * svd.matrixV().transpose();
  }
  return R;
}

double rotation_angle_between(const Mat3& R1, const Mat3& R2) {
  // atan2 form keeps precision near 0 and pi, where acos of the trace does not.
  const Mat3 Q = R1.transpose() * R2;
  const Vec3 s(Q(2, 1) - Q(1, 2), Q(0, 2) - Q(2, 0), Q(1, 0) - Q(0, 1));
  const double c = (Q.trace() - 1.0) / 2.0;
  return std::atan2(0.5 * s.norm(), c);
}

bool is_rotation(const Mat3& R, double tol) {
  return (R.transpose() * R - Mat3::Identity()).norm() < tol && std::abs(R.determinant() - 1.0) < tol;
}

}  // namespace axisforge
