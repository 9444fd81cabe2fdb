#include <benchmark/benchmark.h>

#include "axisforge/diffusion/guidance.hpp"
#include "axisforge/diffusion/mlp.hpp"
#include "axisforge/diffusion/sampler.hpp"
#include "axisforge/extraction.hpp"
#include "axisforge/pose_sampler.hpp"
#include "axisforge/render.hpp"
#include "axisforge/tbm.hpp"

using namespace axisforge;

namespace {

struct Fixture {
  CameraIntrinsics K;
  Pose pose;
  TriAxisImage tri;
  QueryImage query;

  explicit Fixture(int size) {
    K = CameraIntrinsics::reference().rescaled(size, size);
    Rng rng(3);
    PoseSamplerConfig cfg;
    cfg.min_axis_px *= size / 128.0;
    pose = sample_pose(rng, K, cfg);
    tri = render_triaxis(K, pose, 1.5, size >= 128 ? 2.0 : 1.0);
    query = render_query(K, pose);
  }
};

void BM_RecoverPose(benchmark::State& state) {
  const Fixture f(128);
  const AxisObservation obs = observation_from_lines(project_axes(f.K, f.pose), Vec2::Zero());
  for (auto _ : state) benchmark::DoNotOptimize(recover_pose(obs, f.K, LegRatios{}, f.pose.T.z()));
}
BENCHMARK(BM_RecoverPose);

void BM_SolveDepthScales(benchmark::State& state) {
  const Fixture f(128);
  const CornerImage c = corner_from_observation(observation_from_lines(project_axes(f.K, f.pose), Vec2::Zero()));
  const Omega w = compute_omega(f.K);
  for (auto _ : state) benchmark::DoNotOptimize(solve_depth_scales(c, w));
}
BENCHMARK(BM_SolveDepthScales);

void BM_RenderTriaxis(benchmark::State& state) {
  const Fixture f(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(render_triaxis(f.K, f.pose, 1.5, 2.0));
}
BENCHMARK(BM_RenderTriaxis)->Arg(32)->Arg(128);

void BM_RenderQuery(benchmark::State& state) {
  const Fixture f(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(render_query(f.K, f.pose));
}
BENCHMARK(BM_RenderQuery)->Arg(32)->Arg(128);

void BM_ExtractHard(benchmark::State& state) {
  const Fixture f(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(extract_axes_hard(f.tri));
}
BENCHMARK(BM_ExtractHard)->Arg(32)->Arg(128);

void BM_ExtractSoftVjp(benchmark::State& state) {
  const Fixture f(static_cast<int>(state.range(0)));
  const AxisObservation::Vector cot = AxisObservation::Vector::Ones();
  for (auto _ : state) {
    const SoftExtraction s(f.tri, kDefaultSharpness);
    benchmark::DoNotOptimize(s.vjp(cot));
  }
}
BENCHMARK(BM_ExtractSoftVjp)->Arg(32)->Arg(128);

MlpDenoiser make_mlp(int size, int hidden, const DiffusionSchedule& sched) {
  MlpConfig arch;
  arch.width = arch.height = size;
  arch.hidden = hidden;
  Rng rng(1);
  return MlpDenoiser(arch, sched, {Eigen::VectorXd::Zero(arch.tri_dim()), Eigen::VectorXd::Ones(arch.tri_dim())},
                     rng);
}

void BM_MlpForward(benchmark::State& state) {
  const int size = static_cast<int>(state.range(0));
  const auto sched = make_schedule(1000, 1e-4, 0.02);
  const Fixture f(size);
  const MlpDenoiser net = make_mlp(size, static_cast<int>(state.range(1)), sched);
  Rng rng(2);
  const Eigen::VectorXd x = standard_normal(f.tri.size(), rng);
  for (auto _ : state) benchmark::DoNotOptimize(net.evaluate(x, 500, f.query));
}
BENCHMARK(BM_MlpForward)->Args({16, 256})->Args({32, 512});

void BM_MlpVjp(benchmark::State& state) {
  const int size = static_cast<int>(state.range(0));
  const auto sched = make_schedule(1000, 1e-4, 0.02);
  const Fixture f(size);
  const MlpDenoiser net = make_mlp(size, static_cast<int>(state.range(1)), sched);
  Rng rng(2);
  const Eigen::VectorXd x = standard_normal(f.tri.size(), rng), g = standard_normal(f.tri.size(), rng);
  for (auto _ : state) benchmark::DoNotOptimize(net.vjp(x, 500, f.query, g));
}
BENCHMARK(BM_MlpVjp)->Args({16, 256})->Args({32, 512});

void BM_DdimStep(benchmark::State& state) {
  const auto sched = make_schedule(1000, 1e-4, 0.02);
  Rng rng(4);
  const Eigen::VectorXd x = standard_normal(state.range(0), rng), eps = standard_normal(state.range(0), rng);
  for (auto _ : state) benchmark::DoNotOptimize(ddim_step(x, 500, 480, eps, sched, 0.0, rng));
}
BENCHMARK(BM_DdimStep)->Arg(3 * 32 * 32)->Arg(3 * 128 * 128);

void BM_Sample50(benchmark::State& state) {
  const int size = static_cast<int>(state.range(0));
  const auto sched = make_schedule(1000, 1e-4, 0.02);
  const Fixture f(size);
  const MlpDenoiser net = make_mlp(size, 256, sched);
  GuidanceConfig g;
  g.enabled = state.range(1) != 0;
  g.line_ratio = 1.0;
  g.target = observation_from_lines(project_axes(f.K, f.pose), intensity_centroid(f.tri));
  for (auto _ : state) {
    Rng rng(5);
    benchmark::DoNotOptimize(sample(net, f.query, g, sched, SampleOptions{50, 0.0}, rng));
  }
}
BENCHMARK(BM_Sample50)->Args({16, 0})->Args({16, 1})->Unit(benchmark::kMillisecond);

void BM_TrainStep(benchmark::State& state) {
  const int size = 16;
  const auto sched = make_schedule(1000, 1e-4, 0.02);
  std::vector<TrainingSample> data;
  Rng rng(6);
  const CameraIntrinsics K = CameraIntrinsics::reference().rescaled(size, size);
  PoseSamplerConfig cfg;
  cfg.min_axis_px *= size / 128.0;
  for (int i = 0; i < 64; ++i) {
    const Pose p = sample_pose(rng, K, cfg);
    const auto tri = render_triaxis(K, p, 2.0, 1.0);
    data.push_back({tri, render_query(K, p), observation_from_lines(project_axes(K, p), intensity_centroid(tri))});
  }
  OptimizerConfig opt;
  opt.batch = static_cast<int>(state.range(0));
  Trainer tr(make_mlp(size, 256, sched), opt, sched);
  for (auto _ : state) benchmark::DoNotOptimize(tr.step(data, rng));
}
BENCHMARK(BM_TrainStep)->Arg(32)->Arg(128)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
