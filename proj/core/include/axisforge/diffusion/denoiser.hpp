#pragma once

#include <memory>

#include <Eigen/Core>

#include "axisforge/diffusion/schedule.hpp"
#include "axisforge/image.hpp"

namespace axisforge {

// Noise predictor eps(x_t, t | cond) over flat tensors of size dim().
class Denoiser {
 public:
  virtual ~Denoiser() = default;

  virtual Eigen::Index dim() const = 0;
  virtual Eigen::VectorXd evaluate(const Eigen::VectorXd& x_t, int t, const QueryImage& cond) const = 0;
  // Gradient of <cotangent, evaluate(x_t, t, cond)> with respect to x_t.
  virtual Eigen::VectorXd vjp(const Eigen::VectorXd& x_t, int t, const QueryImage& cond,
                              const Eigen::VectorXd& cotangent) const = 0;
};

// Independent Gaussians per element; the diffused marginal has a closed-form score.
struct GaussianScoreField {
  Eigen::VectorXd mean;
  Eigen::VectorXd var;

  void validate() const;
  // grad log p_t(x_t) for the marginal at alpha_bar.
  Eigen::VectorXd score(const Eigen::VectorXd& x_t, double alpha_bar) const;
};

class GaussianDenoiser final : public Denoiser {
 public:
  GaussianDenoiser(GaussianScoreField field, DiffusionSchedule sched);

  Eigen::Index dim() const override { return field_.mean.size(); }
  Eigen::VectorXd evaluate(const Eigen::VectorXd& x_t, int t, const QueryImage& cond) const override;
  Eigen::VectorXd vjp(const Eigen::VectorXd& x_t, int t, const QueryImage& cond,
                      const Eigen::VectorXd& cotangent) const override;

  const GaussianScoreField& field() const { return field_; }
  const DiffusionSchedule& schedule() const { return sched_; }
  // d eps / d x_t, which is diagonal and independent of x_t.
  Eigen::VectorXd gain(int t) const;

 private:
  GaussianScoreField field_;
  DiffusionSchedule sched_;
};

std::shared_ptr<const Denoiser> gaussian_denoiser(GaussianScoreField field, const DiffusionSchedule& sched);

}  // namespace axisforge
