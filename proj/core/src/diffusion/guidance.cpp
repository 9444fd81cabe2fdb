#include "axisforge/diffusion/guidance.hpp"

#include <cmath>

#include "axisforge/error.hpp"

namespace axisforge {

namespace {

constexpr int kDirOffset = 2;
constexpr int kCentroidOffset = 8;

TriAxisImage clamped_estimate(const Eigen::VectorXd& x0, const QueryImage& cond) {
  if (x0.size() != static_cast<Eigen::Index>(cond.width) * cond.height * 3)
    throw Error(ErrorCode::InvalidArgument, "tensor size does not match the conditioning image");
  return TriAxisImage(cond.width, cond.height, x0.cwiseMax(0.0).cwiseMin(1.0));
}

bool undefined_measurement(ErrorCode c) {
  return c == ErrorCode::VanishingMass || c == ErrorCode::DegenerateChannel || c == ErrorCode::NoIntersection;
}

}  // namespace

void GuidanceConfig::validate() const {
  if (!(rho_base >= 0.0)) throw Error(ErrorCode::InvalidArgument, "rho must be non-negative");
  if (!(sharpness > 0.0)) throw Error(ErrorCode::InvalidArgument, "sharpness must be positive");
  if (!(line_ratio >= 1.0)) throw Error(ErrorCode::InvalidArgument, "line ratio must be at least 1");
}

double geo_loss(const AxisObservation& gen, const AxisObservation& gt) {
  double l = (gen.centroid - gt.centroid).squaredNorm();
  for (int i = 0; i < kNumAxes; ++i) l += (gen.dir[i] - gt.dir[i]).squaredNorm();
  return l;
}

AxisObservation::Vector geo_loss_gradient(const AxisObservation& gen, const AxisObservation& gt) {
  AxisObservation::Vector g = 2.0 * (gen.flatten() - gt.flatten());
  g.head<kDirOffset>().setZero();
  return g;
}

double geo_loss_at(const Eigen::VectorXd& x_t, int t, const Denoiser& denoiser, const QueryImage& cond,
                   const GuidanceConfig& guidance, const DiffusionSchedule& sched) {
  const Eigen::VectorXd x0 = predict_x0(x_t, t, denoiser.evaluate(x_t, t, cond), sched);
  return geo_loss(extract_axes_soft(clamped_estimate(x0, cond), guidance.sharpness, guidance.line_ratio), guidance.target);
}

GeoGradient geo_gradient(const Eigen::VectorXd& x_t, int t, const Denoiser& denoiser, const QueryImage& cond,
                         const GuidanceConfig& guidance, const DiffusionSchedule& sched) {
  guidance.validate();
  GeoGradient out;
  out.eps = denoiser.evaluate(x_t, t, cond);
  const double ab = sched.ab(t);
  const Eigen::VectorXd x0 = predict_x0(x_t, ab, out.eps);
  const SoftExtraction meas(clamped_estimate(x0, cond), guidance.sharpness, guidance.line_ratio);
  out.loss = geo_loss(meas.observation(), guidance.target);
  Eigen::VectorXd g0 = meas.vjp(geo_loss_gradient(meas.observation(), guidance.target));
  for (Eigen::Index i = 0; i < g0.size(); ++i)
    if (!(x0[i] > 0.0 && x0[i] < 1.0)) g0[i] = 0.0;
  // x0_hat depends on x_t directly and through eps.
  out.grad = (g0 - std::sqrt(1.0 - ab) * denoiser.vjp(x_t, t, cond, g0)) / std::sqrt(ab);
  return out;
}

GuidedEpsilon guided_epsilon(const Eigen::VectorXd& x_t, int t, const Denoiser& denoiser, const QueryImage& cond,
                             const GuidanceConfig& guidance, const DiffusionSchedule& sched) {
  GuidedEpsilon out;
  if (!guidance.enabled || guidance.rho_base == 0.0) {
    out.eps = denoiser.evaluate(x_t, t, cond);
    return out;
  }
  GeoGradient g;
  try {
    g = geo_gradient(x_t, t, denoiser, cond, guidance, sched);
  } catch (const Error& e) {
    if (!undefined_measurement(e.code())) throw;
    out.eps = denoiser.evaluate(x_t, t, cond);
    out.skipped = true;
    return out;
  }
  out.loss = g.loss;
  out.rho = guidance.normalized ? guidance.rho_base / (std::sqrt(g.loss) + 1e-6) : guidance.rho_base;
  const Eigen::VectorXd corr = out.rho * std::sqrt(1.0 - sched.ab(t)) * g.grad;
  out.correction_norm = corr.norm();
  out.eps = g.eps + corr;
  return out;
}

}  // namespace axisforge
