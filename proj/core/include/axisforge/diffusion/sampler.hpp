#pragma once

#include <optional>
#include <vector>

#include <Eigen/Core>

#include "axisforge/diffusion/guidance.hpp"

namespace axisforge {

struct SampleOptions {
  int steps = 50;
  // Per-step sigma = eta * sqrt((1 - ab_prev) / (1 - ab) * (1 - ab / ab_prev)).
  double eta = 0.0;
};

struct SamplingLogEntry {
  int t = 0;
  double guidance_norm = 0.0;
  double loss = 0.0;
  bool skipped = false;
};

struct ReverseResult {
  Eigen::VectorXd x0;
  std::vector<SamplingLogEntry> log;
};

// Strided reverse process from x_T ~ N(0, I) (or the supplied start) down
// to t = 0. No clamping.
ReverseResult reverse_process(const Denoiser& denoiser, const QueryImage& cond, const GuidanceConfig& guidance,
                              const DiffusionSchedule& sched, const SampleOptions& opts, Rng& rng,
                              const std::optional<Eigen::VectorXd>& x_T = std::nullopt);

struct SampleResult {
  TriAxisImage image;
  std::vector<SamplingLogEntry> log;
};

// reverse_process clamped to [0, 1] at the conditioning image's resolution.
SampleResult sample(const Denoiser& denoiser, const QueryImage& cond, const GuidanceConfig& guidance,
                    const DiffusionSchedule& sched, const SampleOptions& opts, Rng& rng);

}  // namespace axisforge
