#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <vector>

#include <Eigen/Core>

#include "axisforge/diffusion/denoiser.hpp"
#include "axisforge/extraction.hpp"

namespace axisforge {

struct MlpConfig {
  int width = 32;
  int height = 32;
  int hidden = 512;
  int time_dim = 32;

  Eigen::Index tri_dim() const { return static_cast<Eigen::Index>(width) * height * 3; }
  Eigen::Index query_dim() const { return static_cast<Eigen::Index>(width) * height; }
  Eigen::Index input_dim() const { return tri_dim() + query_dim() + time_dim; }
  Eigen::Index param_count() const;
  void validate() const;
  bool operator==(const MlpConfig&) const = default;
};

// Sinusoidal embedding: sin in the first half, cos in the second.
Eigen::VectorXd timestep_embedding(int t, int dim);

struct TrainingSample;

// Per-pixel mean and variance of the training images (variance floored).
GaussianScoreField fit_pixel_prior(const std::vector<TrainingSample>& data, double var_floor = 1e-6);

// eps = c_t * (x_t - sqrt(ab_t) * (mu + F(x_t, cond, t))), the noise estimate
// of a per-pixel Gaussian prior N(mu + F, v) with gain c_t = sqrt(1 - ab_t) /
// (ab_t v + 1 - ab_t), and
// F: input -> [W1, b1] -> SiLU -> [W2, b2] -> SiLU -> [W3, b3].
// F predicts a mean offset in image units. Its output spans at most
// hidden + 1 directions; outside them the estimate is the prior's, so noise
// the network cannot explain is shrunk rather than amplified by the sampler.
// Parameters live in one flat vector in the order W1 b1 W2 b2 W3 b3, each
// matrix column-major.
class MlpDenoiser final : public Denoiser {
 public:
  MlpDenoiser(const MlpConfig& cfg, const DiffusionSchedule& sched, GaussianScoreField prior, Rng& rng);
  MlpDenoiser(const MlpConfig& cfg, const DiffusionSchedule& sched, GaussianScoreField prior,
              Eigen::VectorXd params);

  const MlpConfig& config() const { return cfg_; }
  const GaussianDenoiser& base() const { return base_; }
  const Eigen::VectorXd& params() const { return theta_; }
  Eigen::VectorXd& params() { return theta_; }

  Eigen::Index dim() const override { return cfg_.tri_dim(); }
  Eigen::VectorXd evaluate(const Eigen::VectorXd& x_t, int t, const QueryImage& cond) const override;
  Eigen::VectorXd vjp(const Eigen::VectorXd& x_t, int t, const QueryImage& cond,
                      const Eigen::VectorXd& cotangent) const override;

  struct Cache {
    Eigen::MatrixXd z1, a1, z2, a2, y;
  };

  // Writes the network input for one sample into a column.
  void assemble(const Eigen::VectorXd& x_t, int t, const Eigen::VectorXd& cond,
                Eigen::Ref<Eigen::VectorXd> column) const;
  void forward(const Eigen::MatrixXd& input, Cache& c) const;
  // Map from F's output to eps and back: eps = base - scale * F.
  Eigen::VectorXd output_scale(int t) const;
  // Accumulates dL/dtheta for F-output cotangent dY into grad (when non-null);
  // returns dL/dinput when want_input_grad, an empty matrix otherwise.
  Eigen::MatrixXd backward(const Eigen::MatrixXd& input, const Cache& c, const Eigen::MatrixXd& dY,
                           Eigen::VectorXd* grad, bool want_input_grad) const;

 private:
  MlpConfig cfg_;
  GaussianDenoiser base_;
  Eigen::VectorXd theta_;
};

struct TrainingSample {
  TriAxisImage x0;
  QueryImage cond;
  // Measurement of x0, used only by the auxiliary geometric term.
  AxisObservation target;
};

struct OptimizerConfig {
  int steps = 2000;
  int batch = 16;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double grad_clip = 1.0;  // global norm; 0 disables
  // Weight of L_geo(extract_axes_soft(clamp(x0_hat)), target); 0 disables.
  double geo_weight = 0.0;
  double geo_sharpness = kDefaultSharpness;
  int threads = 1;
  int log_every = 50;

  void validate() const;
};

struct AdamState {
  Eigen::VectorXd m;
  Eigen::VectorXd v;
  std::uint64_t step = 0;
};

struct TrainLogEntry {
  std::uint64_t step = 0;
  double loss = 0.0;
  double running = 0.0;
};

class Trainer {
 public:
  Trainer(MlpDenoiser model, OptimizerConfig opt, DiffusionSchedule sched);
  Trainer(MlpDenoiser model, AdamState state, OptimizerConfig opt, DiffusionSchedule sched);

  // One optimizer step on a batch drawn from data; returns the batch's mean
  // squared noise error. Throws DivergedLoss.
  double step(const std::vector<TrainingSample>& data, Rng& rng);
  // Runs opt.steps steps, logging every opt.log_every.
  std::vector<TrainLogEntry> run(const std::vector<TrainingSample>& data, Rng& rng,
                                 const std::function<void(const TrainLogEntry&)>& on_log = {});

  const MlpDenoiser& model() const { return model_; }
  const AdamState& state() const { return adam_; }

  // Mean squared noise error and its parameter gradient on an explicit batch.
  double loss_and_gradient(const std::vector<const TrainingSample*>& batch, const std::vector<int>& t,
                           const std::vector<Eigen::VectorXd>& eps, Eigen::VectorXd& grad) const;

 private:
  MlpDenoiser model_;
  AdamState adam_;
  OptimizerConfig opt_;
  DiffusionSchedule sched_;
  double initial_loss_ = -1.0;
  double running_ = 0.0;
  Eigen::VectorXd grad_;
  mutable std::vector<Eigen::VectorXd> worker_grads_;
};

MlpDenoiser train_denoiser(const std::vector<TrainingSample>& data, const MlpConfig& arch,
                           const OptimizerConfig& opt, const DiffusionSchedule& sched, Rng& rng);

struct Checkpoint {
  MlpConfig arch;
  int T = 0;
  double zeta_start = 0.0;
  double zeta_end = 0.0;
  Eigen::VectorXd params;
  GaussianScoreField prior;
  bool has_optimizer = false;
  AdamState adam;
};

// Binary layout: magic, version, architecture, schedule, then parameters,
// prior mean and variance (and optionally Adam moments) as little-endian float32.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ck);
Checkpoint load_checkpoint(const std::filesystem::path& path);
// Throws IncompatibleCheckpoint when architecture or schedule differ.
void check_compatible(const Checkpoint& ck, const MlpConfig& arch, const DiffusionSchedule& sched);
Checkpoint make_checkpoint(const MlpDenoiser& model, const DiffusionSchedule& sched, const AdamState* adam);
MlpDenoiser model_from_checkpoint(const Checkpoint& ck);

}  // namespace axisforge
