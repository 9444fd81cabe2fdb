#include "axisforge/diffusion/schedule.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "axisforge/error.hpp"

namespace axisforge {

void DiffusionSchedule::check_timestep(int t) const {
  if (t < 1 || t > T) throw Error(ErrorCode::InvalidArgument, "timestep " + std::to_string(t) + " outside [1, T]");
}

DiffusionSchedule make_schedule(int T, double zeta_start, double zeta_end) {
  if (T < 1) throw Error(ErrorCode::InvalidSchedule, "T must be at least 1");
  if (!(zeta_start > 0.0) || !(zeta_start <= zeta_end) || !(zeta_end < 1.0))
    throw Error(ErrorCode::InvalidSchedule, "need 0 < zeta_start <= zeta_end < 1");
  DiffusionSchedule s;
  s.T = T;
  s.zeta_start = zeta_start;
  s.zeta_end = zeta_end;
  s.zeta.assign(T + 1, 0.0);
  s.alpha_bar.assign(T + 1, 1.0);
  for (int t = 1; t <= T; ++t) {
    s.zeta[t] = T == 1 ? zeta_start : zeta_start + (zeta_end - zeta_start) * (t - 1) / (T - 1);
    s.alpha_bar[t] = s.alpha_bar[t - 1] * (1.0 - s.zeta[t]);
  }
  return s;
}

std::vector<int> sampling_timesteps(const DiffusionSchedule& sched, int steps) {
  if (steps < 1 || steps > sched.T) throw Error(ErrorCode::InvalidArgument, "steps must be in [1, T]");
  std::vector<int> ts;
  for (int i = steps - 1; i >= 0; --i) ts.push_back(1 + static_cast<int>(static_cast<long>(i) * sched.T / steps));
  return ts;
}

Eigen::VectorXd standard_normal(Eigen::Index n, Rng& rng) {
  std::normal_distribution<double> nd(0.0, 1.0);
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = nd(rng);
  return v;
}

Diffused forward_diffuse(const Eigen::VectorXd& x0, double alpha_bar, Rng& rng) {
  Diffused d;
  d.eps = standard_normal(x0.size(), rng);
  d.x_t = std::sqrt(alpha_bar) * x0 + std::sqrt(1.0 - alpha_bar) * d.eps;
  return d;
}

Diffused forward_diffuse(const Eigen::VectorXd& x0, int t, const DiffusionSchedule& sched, Rng& rng) {
  sched.check_timestep(t);
  return forward_diffuse(x0, sched.ab(t), rng);
}

Eigen::VectorXd predict_x0(const Eigen::VectorXd& x_t, double alpha_bar, const Eigen::VectorXd& eps_hat) {
  return (x_t - std::sqrt(1.0 - alpha_bar) * eps_hat) / std::sqrt(alpha_bar);
}

Eigen::VectorXd predict_x0(const Eigen::VectorXd& x_t, int t, const Eigen::VectorXd& eps_hat,
                           const DiffusionSchedule& sched) {
  sched.check_timestep(t);
  return predict_x0(x_t, sched.ab(t), eps_hat);
}

Eigen::VectorXd ddim_step(const Eigen::VectorXd& x_t, int t, int t_prev, const Eigen::VectorXd& eps,
                          const DiffusionSchedule& sched, double sigma, Rng& rng) {
  sched.check_timestep(t);
  if (t_prev < 0 || t_prev >= t) throw Error(ErrorCode::InvalidArgument, "t_prev must lie in [0, t)");
  const double ab_prev = sched.ab(t_prev);
  const double dir2 = 1.0 - ab_prev - sigma * sigma;
  if (!(sigma >= 0.0) || dir2 < -1e-15)
    throw Error(ErrorCode::InvalidSigma, "sigma^2 exceeds 1 - alpha_bar at t_prev");
  Eigen::VectorXd out = std::sqrt(ab_prev) * predict_x0(x_t, t, eps, sched) + std::sqrt(std::max(dir2, 0.0)) * eps;
  if (sigma > 0.0) out += sigma * standard_normal(x_t.size(), rng);
  return out;
}

Eigen::VectorXd ddim_step(const Eigen::VectorXd& x_t, int t, const Eigen::VectorXd& eps,
                          const DiffusionSchedule& sched, double sigma, Rng& rng) {
  return ddim_step(x_t, t, t - 1, eps, sched, sigma, rng);
}

double ddim_sigma(const DiffusionSchedule& sched, int t, int t_prev, double eta) {
  const double ab = sched.ab(t), ab_prev = sched.ab(t_prev);
  return eta * std::sqrt((1.0 - ab_prev) / (1.0 - ab) * (1.0 - ab / ab_prev));
}

}  // namespace axisforge
