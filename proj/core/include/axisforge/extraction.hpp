#pragma once

#include <array>

#include <Eigen/Core>

#include "axisforge/camera.hpp"
#include "axisforge/image.hpp"

namespace axisforge {

// Tri-axis measurement read off an image: the axes' intersection, one
// directed unit vector per axis and the intensity centroid over all channels.
struct AxisObservation {
  static constexpr int kSize = 10;
  using Vector = Eigen::Matrix<double, kSize, 1>;

  Vec2 origin_px = Vec2::Zero();
  std::array<Vec2, kNumAxes> dir{Vec2::UnitX(), Vec2::UnitX(), Vec2::UnitX()};
  Vec2 centroid = Vec2::Zero();

  // Layout: origin, dir X, dir Y, dir Z, centroid.
  Vector flatten() const;
  static AxisObservation unflatten(const Vector& v);
};

// Observation that a perfect extractor would report for the ground truth:
// projected axes plus the centroid of the rendered tri-axis image.
AxisObservation observation_from_lines(const AxisLines& lines, const Vec2& centroid);

Vec2 intensity_centroid(const TriAxisImage& img);

// Threshold at 0.5, intensity-weighted line fit per channel, least-squares
// intersection of the three lines, directions oriented away from it.
AxisObservation extract_axes_hard(const TriAxisImage& img);

inline constexpr double kDefaultSharpness = 50.0;
// Minimum eigenvalue ratio of a channel's second moments for it to count as a line.
inline constexpr double kLineRatio = 4.0;

// Same pipeline with weights p * sigmoid(sharpness * (p - 0.5)); smooth in
// every pixel. This is the measurement operator used by guidance.
AxisObservation extract_axes_soft(const TriAxisImage& img, double sharpness = kDefaultSharpness,
                                  double line_ratio = kLineRatio);

// Gradient of <cotangent, extract_axes_soft(img)> with respect to img.
Eigen::VectorXd soft_extract_vjp(const TriAxisImage& img, double sharpness,
                                 const AxisObservation::Vector& cotangent, double line_ratio = kLineRatio);

// Forward pass plus everything needed for repeated adjoint evaluation.
class SoftExtraction {
 public:
  SoftExtraction(const TriAxisImage& img, double sharpness, double line_ratio = kLineRatio);

  const AxisObservation& observation() const { return obs_; }
  Eigen::VectorXd vjp(const AxisObservation::Vector& cotangent) const;

 private:
  static constexpr int kMoments = 6 * kNumAxes;

  int width_;
  int height_;
  AxisObservation obs_;
  Eigen::Matrix<double, AxisObservation::kSize, kMoments> jacobian_;
  Eigen::VectorXd weight_slope_;  // dw/dp per pixel and channel
};

}  // namespace axisforge
