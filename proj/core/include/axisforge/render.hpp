#pragma once

#include <cstdint>

#include "axisforge/camera.hpp"
#include "axisforge/image.hpp"

namespace axisforge {

// Rasterizes channel i as a capsule from the projected origin to the projected
// endpoint of object axis i: value 1 within thickness_px / 2 of the segment,
// falling linearly to 0 over the next pixel. Image size is taken from K.
TriAxisImage render_triaxis(const CameraIntrinsics& K, const Pose& pose, double axis_len,
                            double thickness_px);

struct QueryOptions {
  // Direction toward the light, camera frame. Normalized internally.
  Vec3 light = Vec3(1.0, 1.0, -1.0);
  double ambient = 0.2;
  int supersample = 4;
};

// Lambertian cube with unit half-extents, painter's-order faces, supersampled
// coverage. Throws NonPositiveDepth when any corner is not in front of the camera.
QueryImage render_query(const CameraIntrinsics& K, const Pose& pose, const QueryOptions& opts = {});

struct DegradationSpec {
  double occlusion_frac = 0.0;
  double noise_sigma = 0.0;
  double blur_radius = 0.0;
  std::uint64_t seed = 0;

  void validate() const;
};

// Occlusion rectangle zeroed, Gaussian noise added and clamped to [0,1],
// then a box blur of radius floor(blur_radius).
template <int Channels>
Image<Channels> apply_degradation(const Image<Channels>& img, const DegradationSpec& spec);

extern template Image<1> apply_degradation(const Image<1>&, const DegradationSpec&);
extern template Image<3> apply_degradation(const Image<3>&, const DegradationSpec&);

}  // namespace axisforge
