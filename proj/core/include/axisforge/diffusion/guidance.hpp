#pragma once

#include <Eigen/Core>

#include "axisforge/diffusion/denoiser.hpp"
#include "axisforge/extraction.hpp"

namespace axisforge {

struct GuidanceConfig {
  AxisObservation target;
  double rho_base = 1.0;
  // rho = rho_base / (|residual| + 1e-6) when set, rho_base otherwise.
  bool normalized = true;
  double sharpness = kDefaultSharpness;
  // Line test applied to the soft measurement of x0_hat.
  double line_ratio = kLineRatio;
  bool enabled = false;

  void validate() const;
};

// Squared direction differences plus squared centroid difference. The
// origin does not enter.
double geo_loss(const AxisObservation& gen, const AxisObservation& gt);
AxisObservation::Vector geo_loss_gradient(const AxisObservation& gen, const AxisObservation& gt);

struct GeoGradient {
  double loss = 0.0;
  Eigen::VectorXd eps;   // denoiser output at x_t
  Eigen::VectorXd grad;  // d loss / d x_t
};

// Loss of the soft measurement of clamp(x0_hat(x_t)) against the target and
// its gradient through the denoiser. Extraction errors propagate.
GeoGradient geo_gradient(const Eigen::VectorXd& x_t, int t, const Denoiser& denoiser, const QueryImage& cond,
                         const GuidanceConfig& guidance, const DiffusionSchedule& sched);

// Forward half of geo_gradient, for finite-difference checks.
double geo_loss_at(const Eigen::VectorXd& x_t, int t, const Denoiser& denoiser, const QueryImage& cond,
                   const GuidanceConfig& guidance, const DiffusionSchedule& sched);

struct GuidedEpsilon {
  Eigen::VectorXd eps;
  bool skipped = false;  // measurement undefined on x0_hat; eps left unguided
  double loss = 0.0;
  double rho = 0.0;
  double correction_norm = 0.0;
};

GuidedEpsilon guided_epsilon(const Eigen::VectorXd& x_t, int t, const Denoiser& denoiser, const QueryImage& cond,
                             const GuidanceConfig& guidance, const DiffusionSchedule& sched);

}  // namespace axisforge
