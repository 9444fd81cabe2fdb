#include "axisforge/extraction.hpp"

#include <cmath>

#include <unsupported/Eigen/AutoDiff>

#include "axisforge/error.hpp"

namespace axisforge {

namespace {

constexpr int kPixelFloor = 8;
constexpr double kMassFloor = 1e-6;
constexpr double kMinIntersectionDet = 1e-10;

// Per channel: S0, Sx, Sy, Sxx, Sxy, Syy over coordinates centered on the image.
template <typename Scalar>
using Moments = std::array<std::array<Scalar, 6>, kNumAxes>;

template <typename Scalar>
struct ObservationT {
  std::array<Scalar, 2> origin;
  std::array<std::array<Scalar, 2>, kNumAxes> dir;
  std::array<Scalar, 2> centroid;
};

double value_of(double x) { return x; }
template <typename D>
double value_of(const Eigen::AutoDiffScalar<D>& x) { return x.value(); }

// Shared tail of both extractors. Branch decisions use values only, so the
// autodiff instantiation differentiates the branch actually taken.
template <typename Scalar>
ObservationT<Scalar> observation_from_moments(const Moments<Scalar>& mom, double line_ratio = kLineRatio) {
  using std::atan2;
  using std::cos;
  using std::sin;
  std::array<std::array<Scalar, 2>, kNumAxes> mean;
  std::array<std::array<Scalar, 2>, kNumAxes> e;
  for (int k = 0; k < kNumAxes; ++k) {
    const auto& m = mom[k];
    const Scalar mx = m[1] / m[0];
    const Scalar my = m[2] / m[0];
    const Scalar a = m[3] / m[0] - mx * mx;
    const Scalar b = m[4] / m[0] - mx * my;
    const Scalar c = m[5] / m[0] - my * my;
    const double av = value_of(a), bv = value_of(b), cv = value_of(c);
    const double half_tr = 0.5 * (av + cv);
    const double rad = std::sqrt(0.25 * (av - cv) * (av - cv) + bv * bv);
    const double l1 = half_tr + rad, l2 = half_tr - rad;
    if (!(l1 > 0.0) || !(l1 > l2) || l1 < line_ratio * l2)
      throw Error(ErrorCode::DegenerateChannel, "second moments are not line-like", k);
    const Scalar theta = 0.5 * atan2(Scalar(2.0) * b, a - c);
    mean[k] = {mx, my};
    e[k] = {cos(theta), sin(theta)};
  }

  // Least-squares intersection: sum_i n_i n_i^T p = sum_i n_i n_i^T m_i.
  Scalar A00(0.0), A01(0.0), A11(0.0), r0(0.0), r1(0.0);
  for (int k = 0; k < kNumAxes; ++k) {
    const Scalar nx = -e[k][1];
    const Scalar ny = e[k][0];
    const Scalar proj = nx * mean[k][0] + ny * mean[k][1];
    A00 += nx * nx;
    A01 += nx * ny;
    A11 += ny * ny;
    r0 += nx * proj;
    r1 += ny * proj;
  }
  const Scalar det = A00 * A11 - A01 * A01;
  if (!(value_of(det) > kMinIntersectionDet))
    throw Error(ErrorCode::NoIntersection, "axis lines are (nearly) parallel");
  const Scalar px = (A11 * r0 - A01 * r1) / det;
  const Scalar py = (A00 * r1 - A01 * r0) / det;

  ObservationT<Scalar> out;
  out.origin = {px, py};
  for (int k = 0; k < kNumAxes; ++k) {
    const double along = value_of(e[k][0]) * (value_of(mean[k][0]) - value_of(px)) +
                         value_of(e[k][1]) * (value_of(mean[k][1]) - value_of(py));
    if (along < 0.0)
      out.dir[k] = {-e[k][0], -e[k][1]};
    else
      out.dir[k] = e[k];
  }
  Scalar s0(0.0), sx(0.0), sy(0.0);
  for (int k = 0; k < kNumAxes; ++k) {
    s0 += mom[k][0];
    sx += mom[k][1];
    sy += mom[k][2];
  }
  out.centroid = {sx / s0, sy / s0};
  return out;
}

Vec2 image_center(int width, int height) { return {0.5 * (width - 1), 0.5 * (height - 1)}; }

AxisObservation to_observation(const ObservationT<double>& o, const Vec2& offset) {
  AxisObservation obs;
  obs.origin_px = Vec2(o.origin[0], o.origin[1]) + offset;
  for (int k = 0; k < kNumAxes; ++k) obs.dir[k] = Vec2(o.dir[k][0], o.dir[k][1]);
  obs.centroid = Vec2(o.centroid[0], o.centroid[1]) + offset;
  return obs;
}

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double ez = std::exp(z);
  return ez / (1.0 + ez);
}

template <typename WeightFn>
Moments<double> accumulate(const TriAxisImage& img, WeightFn&& weight) {
  Moments<double> mom{};
  const Vec2 off = image_center(img.width, img.height);
  for (int r = 0; r < img.height; ++r) {
    const double y = r - off.y();
    for (int c = 0; c < img.width; ++c) {
      const double x = c - off.x();
      for (int k = 0; k < kNumAxes; ++k) {
        const double w = weight(img.at(r, c, k));
        if (w == 0.0) continue;
        auto& m = mom[k];
        m[0] += w;
        m[1] += w * x;
        m[2] += w * y;
        m[3] += w * x * x;
        m[4] += w * x * y;
        m[5] += w * y * y;
      }
    }
  }
  return mom;
}

void check_soft_mass(const TriAxisImage& img, double sharpness) {
  if (!(sharpness > 0.0)) throw Error(ErrorCode::InvalidArgument, "sharpness must be positive");
  std::array<double, kNumAxes> mass{};
  for (Eigen::Index p = 0; p < img.pixel_count(); ++p)
    for (int k = 0; k < kNumAxes; ++k) mass[k] += sigmoid(sharpness * (img.data[p * 3 + k] - 0.5));
  for (int k = 0; k < kNumAxes; ++k)
    if (!(mass[k] > kMassFloor)) throw Error(ErrorCode::VanishingMass, "soft mass below floor", k);
}

void check_line_ratio(double line_ratio) {
  if (!(line_ratio >= 1.0)) throw Error(ErrorCode::InvalidArgument, "line ratio must be at least 1");
}

}  // namespace

AxisObservation::Vector AxisObservation::flatten() const {
  Vector v;
  v << origin_px, dir[0], dir[1], dir[2], centroid;
  return v;
}

AxisObservation AxisObservation::unflatten(const Vector& v) {
  AxisObservation o;
  o.origin_px = v.segment<2>(0);
  for (int k = 0; k < kNumAxes; ++k) o.dir[k] = v.segment<2>(2 + 2 * k);
  o.centroid = v.segment<2>(8);
  return o;
}

AxisObservation observation_from_lines(const AxisLines& lines, const Vec2& centroid) {
  AxisObservation o;
  o.origin_px = lines.origin_px;
  o.dir = lines.dir;
  o.centroid = centroid;
  return o;
}

Vec2 intensity_centroid(const TriAxisImage& img) {
  double s = 0.0, sx = 0.0, sy = 0.0;
  for (int r = 0; r < img.height; ++r)
    for (int c = 0; c < img.width; ++c)
      for (int k = 0; k < kNumAxes; ++k) {
        const double v = img.at(r, c, k);
        s += v;
        sx += v * c;
        sy += v * r;
      }
  if (!(s > 0.0)) throw Error(ErrorCode::EmptyChannel, "image has no mass");
  return {sx / s, sy / s};
}

AxisObservation extract_axes_hard(const TriAxisImage& img) {
  std::array<int, kNumAxes> count{};
  for (Eigen::Index p = 0; p < img.pixel_count(); ++p)
    for (int k = 0; k < kNumAxes; ++k)
      if (img.data[p * 3 + k] > 0.5) ++count[k];
  for (int k = 0; k < kNumAxes; ++k)
    if (count[k] < kPixelFloor)
      throw Error(ErrorCode::EmptyChannel, std::to_string(count[k]) + " pixels above 0.5", k);

  const auto mom = accumulate(img, [](double p) { return p > 0.5 ? p : 0.0; });
  return to_observation(observation_from_moments<double>(mom), image_center(img.width, img.height));
}

AxisObservation extract_axes_soft(const TriAxisImage& img, double sharpness, double line_ratio) {
  check_soft_mass(img, sharpness);
  check_line_ratio(line_ratio);
  const auto mom = accumulate(img, [sharpness](double p) { return p * sigmoid(sharpness * (p - 0.5)); });
  return to_observation(observation_from_moments<double>(mom, line_ratio), image_center(img.width, img.height));
}

SoftExtraction::SoftExtraction(const TriAxisImage& img, double sharpness, double line_ratio)
    : width_(img.width), height_(img.height) {
  check_soft_mass(img, sharpness);
  check_line_ratio(line_ratio);
  weight_slope_.resize(img.size());
  for (Eigen::Index i = 0; i < img.size(); ++i) {
    const double p = img.data[i];
    const double s = sigmoid(sharpness * (p - 0.5));
    weight_slope_[i] = s + p * sharpness * s * (1.0 - s);
  }
  const auto mom = accumulate(img, [sharpness](double p) { return p * sigmoid(sharpness * (p - 0.5)); });

  using Deriv = Eigen::Matrix<double, kMoments, 1>;
  using AD = Eigen::AutoDiffScalar<Deriv>;
  Moments<AD> ad{};
  for (int k = 0; k < kNumAxes; ++k)
    for (int j = 0; j < 6; ++j) ad[k][j] = AD(mom[k][j], kMoments, 6 * k + j);

  const ObservationT<AD> out = observation_from_moments<AD>(ad, line_ratio);
  ObservationT<double> val;
  auto take = [this](int row, const AD& x) {
    jacobian_.row(row) = x.derivatives().transpose();
    return x.value();
  };
  val.origin = {take(0, out.origin[0]), take(1, out.origin[1])};
  for (int k = 0; k < kNumAxes; ++k)
    val.dir[k] = {take(2 + 2 * k, out.dir[k][0]), take(3 + 2 * k, out.dir[k][1])};
  val.centroid = {take(8, out.centroid[0]), take(9, out.centroid[1])};
  obs_ = to_observation(val, image_center(width_, height_));
}

Eigen::VectorXd SoftExtraction::vjp(const AxisObservation::Vector& cotangent) const {
  const Eigen::Matrix<double, kMoments, 1> g = jacobian_.transpose() * cotangent;
  Eigen::VectorXd grad(weight_slope_.size());
  const Vec2 off = image_center(width_, height_);
  for (int r = 0; r < height_; ++r) {
    const double y = r - off.y();
    for (int c = 0; c < width_; ++c) {
      const double x = c - off.x();
      const Eigen::Index base = (static_cast<Eigen::Index>(r) * width_ + c) * 3;
      for (int k = 0; k < kNumAxes; ++k) {
        const auto gk = g.segment<6>(6 * k);
        const double dmom = gk[0] + gk[1] * x + gk[2] * y + gk[3] * x * x + gk[4] * x * y + gk[5] * y * y;
        grad[base + k] = weight_slope_[base + k] * dmom;
      }
    }
  }
  return grad;
}

Eigen::VectorXd soft_extract_vjp(const TriAxisImage& img, double sharpness,
                                 const AxisObservation::Vector& cotangent, double line_ratio) {
  return SoftExtraction(img, sharpness, line_ratio).vjp(cotangent);
}

}  // namespace axisforge
