#pragma once

#include <random>
#include <vector>

#include <Eigen/Core>

namespace axisforge {

using Rng = std::mt19937_64;

// Index t runs over 0..T; alpha_bar[0] = 1 and zeta[0] is unused.
struct DiffusionSchedule {
  int T = 0;
  double zeta_start = 0.0;
  double zeta_end = 0.0;
  std::vector<double> zeta;
  std::vector<double> alpha_bar;

  double ab(int t) const { return alpha_bar[static_cast<std::size_t>(t)]; }
  void check_timestep(int t) const;
};

// Linear zeta from zeta_start to zeta_end over t = 1..T.
DiffusionSchedule make_schedule(int T, double zeta_start, double zeta_end);

// Uniformly strided timesteps, descending, always ending in t = 1.
std::vector<int> sampling_timesteps(const DiffusionSchedule& sched, int steps);

Eigen::VectorXd standard_normal(Eigen::Index n, Rng& rng);

struct Diffused {
  Eigen::VectorXd x_t;
  Eigen::VectorXd eps;
};

Diffused forward_diffuse(const Eigen::VectorXd& x0, int t, const DiffusionSchedule& sched, Rng& rng);
Diffused forward_diffuse(const Eigen::VectorXd& x0, double alpha_bar, Rng& rng);

Eigen::VectorXd predict_x0(const Eigen::VectorXd& x_t, int t, const Eigen::VectorXd& eps_hat,
                           const DiffusionSchedule& sched);
Eigen::VectorXd predict_x0(const Eigen::VectorXd& x_t, double alpha_bar, const Eigen::VectorXd& eps_hat);

// Generalized step from t to t_prev (t_prev < t; t_prev = t - 1 is the plain
// update). The random term is drawn only when sigma > 0.
Eigen::VectorXd ddim_step(const Eigen::VectorXd& x_t, int t, int t_prev, const Eigen::VectorXd& eps,
                          const DiffusionSchedule& sched, double sigma, Rng& rng);
Eigen::VectorXd ddim_step(const Eigen::VectorXd& x_t, int t, const Eigen::VectorXd& eps,
                          const DiffusionSchedule& sched, double sigma, Rng& rng);

// sigma for a DDIM step with stochasticity eta (eta = 1 matches DDPM).
double ddim_sigma(const DiffusionSchedule& sched, int t, int t_prev, double eta);

}  // namespace axisforge
