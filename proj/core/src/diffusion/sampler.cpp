#include "axisforge/diffusion/sampler.hpp"

#include "axisforge/error.hpp"

namespace axisforge {

ReverseResult reverse_process(const Denoiser& denoiser, const QueryImage& cond, const GuidanceConfig& guidance,
                              const DiffusionSchedule& sched, const SampleOptions& opts, Rng& rng,
                              const std::optional<Eigen::VectorXd>& x_T) {
  if (!(opts.eta >= 0.0)) throw Error(ErrorCode::InvalidSigma, "eta must be non-negative");
  const std::vector<int> ts = sampling_timesteps(sched, opts.steps);
  ReverseResult r;
  Eigen::VectorXd x = x_T ? *x_T : standard_normal(denoiser.dim(), rng);
  if (x.size() != denoiser.dim()) throw Error(ErrorCode::InvalidArgument, "start tensor has the wrong size");
  for (std::size_t k = 0; k < ts.size(); ++k) {
    const int t = ts[k];
    const int t_prev = k + 1 < ts.size() ? ts[k + 1] : 0;
    const GuidedEpsilon g = guided_epsilon(x, t, denoiser, cond, guidance, sched);
    r.log.push_back({t, g.correction_norm, g.loss, g.skipped});
    x = ddim_step(x, t, t_prev, g.eps, sched, ddim_sigma(sched, t, t_prev, opts.eta), rng);
  }
  r.x0 = std::move(x);
  return r;
}

SampleResult sample(const Denoiser& denoiser, const QueryImage& cond, const GuidanceConfig& guidance,
                    const DiffusionSchedule& sched, const SampleOptions& opts, Rng& rng) {
  if (denoiser.dim() != static_cast<Eigen::Index>(cond.width) * cond.height * 3)
    throw Error(ErrorCode::InvalidArgument, "denoiser size does not match the conditioning image");
  ReverseResult r = reverse_process(denoiser, cond, guidance, sched, opts, rng);
  SampleResult out;
  out.image = TriAxisImage(cond.width, cond.height, r.x0.cwiseMax(0.0).cwiseMin(1.0));
  out.log = std::move(r.log);
  return out;
}

}  // namespace axisforge
