#include "axisforge/render.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <random>
#include <vector>

#include "axisforge/error.hpp"

namespace axisforge {

namespace {

double distance_to_segment(const Vec2& p, const Vec2& a, const Vec2& b) {
  const Vec2 ab = b - a;
  const double len2 = ab.squaredNorm();
  double s = len2 > 0.0 ? (p - a).dot(ab) / len2 : 0.0;
  s = std::clamp(s, 0.0, 1.0);
  return (p - (a + s * ab)).norm();
}

struct Face {
  std::array<Vec2, 4> px;
  double depth = 0.0;
  double shade = 0.0;
};

// Unit cube faces as (normal axis, sign); corners listed counter-clockwise
// seen from outside.
std::array<Vec3, 4> face_corners(int axis, double sign) {
  const int u = (axis + 1) % 3;
  const int v = (axis + 2) % 3;
  std::array<Vec3, 4> c;
  const double su[4] = {-1, 1, 1, -1};
  const double sv[4] = {-1, -1, 1, 1};
  for (int k = 0; k < 4; ++k) {
    Vec3 p = Vec3::Zero();
    p[axis] = sign;
    p[u] = su[k];
    p[v] = sign > 0 ? sv[k] : -sv[k];
    c[k] = p;
  }
  return c;
}

bool inside_convex(const std::array<Vec2, 4>& q, const Vec2& p) {
  bool pos = false, neg = false;
  for (int k = 0; k < 4; ++k) {
    const Vec2 a = q[k];
    const Vec2 b = q[(k + 1) % 4];
    const double cross = (b.x() - a.x()) * (p.y() - a.y()) - (b.y() - a.y()) * (p.x() - a.x());
    if (cross > 0) pos = true;
    if (cross < 0) neg = true;
    if (pos && neg) return false;
  }
  return true;
}

}  // namespace

TriAxisImage render_triaxis(const CameraIntrinsics& K, const Pose& pose, double axis_len,
                            double thickness_px) {
  if (!(thickness_px > 0.0)) throw Error(ErrorCode::InvalidArgument, "thickness must be positive");
  const AxisLines lines = project_axes(K, pose, axis_len);
  TriAxisImage img(K.width, K.height);
  const double half = 0.5 * thickness_px;
  const double reach = half + 1.0;
  const Vec2 o = lines.origin_px;
  for (int c = 0; c < kNumAxes; ++c) {
    const Vec2 e = project_point(K, pose, axis_len * Vec3::Unit(c));
    const int c0 = std::max(0, static_cast<int>(std::floor(std::min(o.x(), e.x()) - reach)));
    const int c1 = std::min(K.width - 1, static_cast<int>(std::ceil(std::max(o.x(), e.x()) + reach)));
    const int r0 = std::max(0, static_cast<int>(std::floor(std::min(o.y(), e.y()) - reach)));
    const int r1 = std::min(K.height - 1, static_cast<int>(std::ceil(std::max(o.y(), e.y()) + reach)));
    for (int r = r0; r <= r1; ++r) {
      for (int col = c0; col <= c1; ++col) {
        const double d = distance_to_segment(Vec2(col, r), o, e);
        const double v = std::clamp(1.0 - (d - half), 0.0, 1.0);
        if (v > 0.0) img.at(r, col, c) = v;
      }
    }
  }
  return img;
}

QueryImage render_query(const CameraIntrinsics& K, const Pose& pose, const QueryOptions& opts) {
  if (opts.supersample < 1) throw Error(ErrorCode::InvalidArgument, "supersample must be >= 1");
  const Vec3 light = opts.light.normalized();

  std::vector<Face> faces;
  for (int axis = 0; axis < 3; ++axis) {
    for (double sign : {-1.0, 1.0}) {
      const auto corners = face_corners(axis, sign);
      Face f;
      Vec3 center = Vec3::Zero();
      for (int k = 0; k < 4; ++k) {
        const Vec3 pc = pose.R * corners[k] + pose.T;
        f.px[k] = project_camera_point(K, pc);  // throws NonPositiveDepth
        center += pc / 4.0;
      }
      const Vec3 n = pose.R * (sign * Vec3::Unit(axis));
      if (n.dot(center) >= 0.0) continue;  // back face
      f.depth = center.z();
      f.shade = opts.ambient + (1.0 - opts.ambient) * std::max(0.0, n.dot(light));
      faces.push_back(f);
    }
  }
  // Painter's order: far to near, nearer faces overwrite.
  std::stable_sort(faces.begin(), faces.end(), [](const Face& a, const Face& b) { return a.depth > b.depth; });

  QueryImage img(K.width, K.height);
  const int ss = opts.supersample;
  const double inv = 1.0 / (ss * ss);
  for (const Face& f : faces) {
    double x0 = f.px[0].x(), x1 = x0, y0 = f.px[0].y(), y1 = y0;
    for (const auto& p : f.px) {
      x0 = std::min(x0, p.x()); x1 = std::max(x1, p.x());
      y0 = std::min(y0, p.y()); y1 = std::max(y1, p.y());
    }
    const int c0 = std::max(0, static_cast<int>(std::floor(x0)) - 1);
    const int c1 = std::min(K.width - 1, static_cast<int>(std::ceil(x1)) + 1);
    const int r0 = std::max(0, static_cast<int>(std::floor(y0)) - 1);
    const int r1 = std::min(K.height - 1, static_cast<int>(std::ceil(y1)) + 1);
    for (int r = r0; r <= r1; ++r) {
      for (int c = c0; c <= c1; ++c) {
        int hits = 0;
        for (int sy = 0; sy < ss; ++sy)
          for (int sx = 0; sx < ss; ++sx) {
            const Vec2 p(c - 0.5 + (sx + 0.5) / ss, r - 0.5 + (sy + 0.5) / ss);
            if (inside_convex(f.px, p)) ++hits;
          }
        if (hits == 0) continue;
        const double cover = hits * inv;
        // Coverage-weighted "over" compositing of the nearer face.
        img.at(r, c) = img.at(r, c) * (1.0 - cover) + f.shade * cover;
      }
    }
  }
  return img;
}

void DegradationSpec::validate() const {
  if (!(occlusion_frac >= 0.0 && occlusion_frac < 1.0))
    throw Error(ErrorCode::InvalidArgument, "occlusion_frac must be in [0,1)");
  if (!(noise_sigma >= 0.0)) throw Error(ErrorCode::InvalidArgument, "noise_sigma must be >= 0");
  if (!(blur_radius >= 0.0)) throw Error(ErrorCode::InvalidArgument, "blur_radius must be >= 0");
}

template <int Channels>
Image<Channels> apply_degradation(const Image<Channels>& img, const DegradationSpec& spec) {
  spec.validate();
  Image<Channels> out = img;
  std::mt19937_64 rng(spec.seed);
  const int W = img.width, H = img.height;

  if (spec.occlusion_frac > 0.0) {
    const double area = spec.occlusion_frac * W * H;
    std::uniform_real_distribution<double> log_aspect(std::log(0.5), std::log(2.0));
    const double aspect = std::exp(log_aspect(rng));
    int w = std::clamp(static_cast<int>(std::lround(std::sqrt(area * aspect))), 1, W);
    int h = std::clamp(static_cast<int>(std::lround(area / w)), 1, H);
    if (h == H) w = std::clamp(static_cast<int>(std::lround(area / h)), 1, W);
    std::uniform_int_distribution<int> px(0, W - w);
    std::uniform_int_distribution<int> py(0, H - h);
    const int x0 = px(rng);
    const int y0 = py(rng);
    for (int r = y0; r < y0 + h; ++r)
      for (int c = x0; c < x0 + w; ++c)
        for (int ch = 0; ch < Channels; ++ch) out.at(r, c, ch) = 0.0;
  }

  if (spec.noise_sigma > 0.0) {
    std::normal_distribution<double> n(0.0, spec.noise_sigma);
    for (Eigen::Index i = 0; i < out.data.size(); ++i)
      out.data[i] = std::clamp(out.data[i] + n(rng), 0.0, 1.0);
  }

  const int radius = static_cast<int>(std::floor(spec.blur_radius));
  if (radius > 0) {
    const Image<Channels> src = out;
    for (int r = 0; r < H; ++r)
      for (int c = 0; c < W; ++c)
        for (int ch = 0; ch < Channels; ++ch) {
          double sum = 0.0;
          int count = 0;
          for (int rr = std::max(0, r - radius); rr <= std::min(H - 1, r + radius); ++rr)
            for (int cc = std::max(0, c - radius); cc <= std::min(W - 1, c + radius); ++cc) {
              sum += src.at(rr, cc, ch);
              ++count;
            }
          out.at(r, c, ch) = sum / count;
        }
  }
  return out;
}

template Image<1> apply_degradation(const Image<1>&, const DegradationSpec&);
template Image<3> apply_degradation(const Image<3>&, const DegradationSpec&);

}  // namespace axisforge
