#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "axisforge/camera.hpp"
#include "axisforge/diffusion/mlp.hpp"
#include "axisforge/diffusion/schedule.hpp"
#include "axisforge/metrics.hpp"
#include "axisforge/pose_sampler.hpp"
#include "axisforge/render.hpp"

namespace axisforge {

inline constexpr int kConfigSchemaVersion = 1;

struct RenderConfig {
  int size = 32;
  double thickness = 1.0;  // px at the dataset resolution
  double axis_len = 1.5;
  double depth_min = 3.5;
  double depth_max = 4.5;
  double lateral = 0.08;
  double min_axis_px = 8.0;  // quoted at the 128 px reference, scaled with size
  double min_line_separation_deg = 10.0;
  double occlusion_frac = 0.25;
  double noise_sigma = 0.0;
  double blur_radius = 0.0;
  bool write_ppm = false;

  CameraIntrinsics intrinsics() const;
  PoseSamplerConfig sampler() const;
};

struct DatasetSizes {
  int n_train = 1000;
  int n_test = 100;
};

struct ScheduleConfig {
  int T = 1000;
  double zeta_start = 1e-4;
  double zeta_end = 0.02;

  DiffusionSchedule make() const;
};

struct TrainConfig {
  OptimizerConfig opt;
  int hidden = 512;
  int time_dim = 32;
  double var_floor = 1e-2;
  // Conditioning image the denoiser is trained on: "clean" or "degraded".
  std::string condition = "clean";
};

struct GuidanceParams {
  double rho_base = 1.0;
  double sharpness = kDefaultSharpness;
  bool normalized = true;
  double line_ratio = kLineRatio;
};

struct InferConfig {
  int steps = 50;
  double eta = 0.0;
  // "mlp" samples from the checkpoint; "analytic" uses a Gaussian field
  // centered on each record's ground-truth tri-axis image.
  std::string denoiser = "mlp";
  double analytic_var = 1e-4;
  // Conditioning image used at inference: "degraded" or "clean".
  std::string condition = "degraded";
  bool write_images = true;
  bool write_logs = true;
};

struct EvalConfig {
  Thresholds thresholds;
  // Metrics are computed with the dataset camera rescaled to this size.
  int reference_size = 128;
  double half_extent = 1.0;
};

struct OracleConfig {
  // Added to omega(0, 1), relative to |omega(0, 0)|, before solving; any
  // nonzero value must trip the residual oracle.
  double omega_perturbation = 0.0;
};

struct RunConfig {
  int schema_version = kConfigSchemaVersion;
  std::uint64_t seed = 0;
  bool deterministic = false;
  RenderConfig render;
  DatasetSizes dataset;
  ScheduleConfig schedule;
  TrainConfig train;
  GuidanceParams guidance;
  InferConfig infer;
  EvalConfig eval;
  OracleConfig oracle;

  MlpConfig arch() const;
  // Throws InvalidArgument naming the first offending key.
  void validate() const;
};

// Keys absent from the document keep their defaults; unknown keys are rejected.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::filesystem::path& path);
std::string dump_config(const RunConfig& cfg);

// Worker count: 1 when deterministic, else hardware concurrency capped by
// AXISFORGE_THREADS and by `requested` when positive.
int resolve_threads(bool deterministic, int requested = 0);

// splitmix64 finalizer and the per-record seed hash(global_seed, id).
std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t record_seed(std::uint64_t global_seed, const std::string& id);

}  // namespace axisforge
