#include "axisforge/pose_sampler.hpp"

#include <algorithm>
#include <cmath>

#include "axisforge/error.hpp"

namespace axisforge {

void PoseSamplerConfig::validate() const {
  if (!(depth_min > std::sqrt(3.0)) || !(depth_max >= depth_min))
    throw Error(ErrorCode::InvalidArgument, "depth band must satisfy sqrt(3) < depth_min <= depth_max");
  if (!(lateral >= 0.0) || !(axis_len > 0.0) || !(min_axis_px >= 0.0) || !(min_line_separation_deg >= 0.0) || max_rejections < 1)
    throw Error(ErrorCode::InvalidArgument, "invalid pose sampler configuration");
}

double min_line_separation_deg(const AxisLines& lines) {
  double best = 90.0;
  for (int i = 0; i < kNumAxes; ++i)
    for (int j = i + 1; j < kNumAxes; ++j) {
      const double c = std::min(1.0, std::abs(lines.dir[i].dot(lines.dir[j])));
      best = std::min(best, std::acos(c) * 180.0 / M_PI);
    }
  return best;
}

bool pose_is_admissible(const CameraIntrinsics& K, const Pose& pose, const PoseSamplerConfig& cfg) {
  for (int corner = 0; corner < 8; ++corner) {
    const Vec3 c((corner & 1) ? 1.0 : -1.0, (corner & 2) ? 1.0 : -1.0, (corner & 4) ? 1.0 : -1.0);
    if (!((pose.R * c + pose.T).z() > 1e-6)) return false;
  }
  try {
    if (min_line_separation_deg(project_axes(K, pose, cfg.axis_len)) < cfg.min_line_separation_deg) return false;
    for (double len : projected_axis_lengths(K, pose, cfg.axis_len))
      if (len < cfg.min_axis_px) return false;
  } catch (const Error&) {
    return false;
  }
  return true;
}

Pose sample_pose(std::mt19937_64& rng, const CameraIntrinsics& K, const PoseSamplerConfig& cfg) {
  cfg.validate();
  std::uniform_real_distribution<double> depth(cfg.depth_min, cfg.depth_max);
  std::uniform_real_distribution<double> side(-cfg.lateral, cfg.lateral);
  for (int attempt = 0; attempt < cfg.max_rejections; ++attempt) {
    Pose p;
    p.R = random_rotation(rng);
    const double z = depth(rng);
    const double x = side(rng) * z;
    const double y = side(rng) * z;
    p.T = Vec3(x, y, z);
    if (pose_is_admissible(K, p, cfg)) return p;
  }
  throw Error(ErrorCode::DegenerateSamplingExhausted,
              std::to_string(cfg.max_rejections) + " consecutive degenerate poses");
}

}  // namespace axisforge
