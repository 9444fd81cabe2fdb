#include "axisforge/diffusion/denoiser.hpp"

#include <cmath>

#include "axisforge/error.hpp"

namespace axisforge {

void GaussianScoreField::validate() const {
  if (mean.size() == 0 || mean.size() != var.size())
    throw Error(ErrorCode::InvalidArgument, "mean and variance must be nonempty and the same size");
  if (!(var.array() > 0.0).all()) throw Error(ErrorCode::InvalidArgument, "variances must be positive");
}

Eigen::VectorXd GaussianScoreField::score(const Eigen::VectorXd& x_t, double alpha_bar) const {
  const Eigen::ArrayXd total = alpha_bar * var.array() + (1.0 - alpha_bar);
  return -((x_t - std::sqrt(alpha_bar) * mean).array() / total).matrix();
}

GaussianDenoiser::GaussianDenoiser(GaussianScoreField field, DiffusionSchedule sched)
    : field_(std::move(field)), sched_(std::move(sched)) {
  field_.validate();
}

Eigen::VectorXd GaussianDenoiser::evaluate(const Eigen::VectorXd& x_t, int t, const QueryImage&) const {
  sched_.check_timestep(t);
  return -std::sqrt(1.0 - sched_.ab(t)) * field_.score(x_t, sched_.ab(t));
}

Eigen::VectorXd GaussianDenoiser::gain(int t) const {
  sched_.check_timestep(t);
  const double ab = sched_.ab(t);
  return (std::sqrt(1.0 - ab) / (ab * field_.var.array() + (1.0 - ab))).matrix();
}

Eigen::VectorXd GaussianDenoiser::vjp(const Eigen::VectorXd&, int t, const QueryImage&,
                                      const Eigen::VectorXd& cotangent) const {
  return gain(t).cwiseProduct(cotangent);
}

std::shared_ptr<const Denoiser> gaussian_denoiser(GaussianScoreField field, const DiffusionSchedule& sched) {
  return std::make_shared<GaussianDenoiser>(std::move(field), sched);
}

}  // namespace axisforge
