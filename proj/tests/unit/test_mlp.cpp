#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <random>

#include "axisforge/diffusion/mlp.hpp"
#include "axisforge/error.hpp"
#include "axisforge/pose_sampler.hpp"
#include "axisforge/render.hpp"

using namespace axisforge;

namespace {

MlpConfig small_arch() {
  MlpConfig a;
  a.width = a.height = 8;
  a.hidden = 24;
  a.time_dim = 8;
  return a;
}

std::vector<TrainingSample> dataset(int n, int size, std::uint64_t seed) {
  const auto K = CameraIntrinsics::reference().rescaled(size, size);
  Rng rng(seed);
  PoseSamplerConfig cfg;
  cfg.min_axis_px *= size / 128.0;
  std::vector<TrainingSample> out;
  for (int i = 0; i < n; ++i) {
    const Pose p = sample_pose(rng, K, cfg);
    TrainingSample s;
    s.x0 = render_triaxis(K, p, 1.5, 1.0);
    s.cond = render_query(K, p);
    s.target = observation_from_lines(project_axes(K, p), intensity_centroid(s.x0));
    out.push_back(std::move(s));
  }
  return out;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream is(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), {}};
}

}  // namespace

TEST_CASE("timestep embedding") {
  const auto e = timestep_embedding(0, 8);
  for (int k = 0; k < 4; ++k) {
    CHECK(e[k] == 0.0);
    CHECK(e[4 + k] == 1.0);
  }
  const auto f = timestep_embedding(7, 8);
  CHECK(f[0] == doctest::Approx(std::sin(7.0)));
  CHECK(f[5] == doctest::Approx(std::cos(7.0 * std::pow(10000.0, -0.25))));
}

TEST_CASE("parameter gradient matches finite differences at initialization") {
  const auto s = make_schedule(100, 1e-4, 0.02);
  const auto data = dataset(3, 8, 1);
  Rng rng(2);
  OptimizerConfig opt;
  Trainer tr(MlpDenoiser(small_arch(), s, fit_pixel_prior(data), rng), opt, s);
  std::vector<const TrainingSample*> batch{&data[0], &data[1], &data[2]};
  std::vector<int> ts{3, 50, 99};
  std::vector<Eigen::VectorXd> eps;
  for (int i = 0; i < 3; ++i) eps.push_back(standard_normal(small_arch().tri_dim(), rng));
  Eigen::VectorXd grad;
  tr.loss_and_gradient(batch, ts, eps, grad);

  MlpDenoiser probe = tr.model();
  auto loss_at = [&](const Eigen::VectorXd& theta) {
    probe.params() = theta;
    Trainer t2(probe, opt, s);
    Eigen::VectorXd g;
    return t2.loss_and_gradient(batch, ts, eps, g);
  };
  const Eigen::VectorXd theta = tr.model().params();
  std::uniform_int_distribution<Eigen::Index> pick(0, theta.size() - 1);
  const double scale = grad.cwiseAbs().maxCoeff();
  int checked = 0;
  while (checked < 40) {
    const Eigen::Index i = pick(rng);
    if (std::abs(grad[i]) < 1e-3 * scale) continue;
    const double h = 1e-5;
    Eigen::VectorXd p = theta, m = theta;
    p[i] += h;
    m[i] -= h;
    const double fd = (loss_at(p) - loss_at(m)) / (2 * h);
    CHECK(std::abs(grad[i] - fd) <= 1e-3 * std::abs(fd));
    ++checked;
  }
}

TEST_CASE("network vjp matches finite differences") {
  Rng rng(3);
  const auto s = make_schedule(100, 1e-4, 0.02);
  const MlpDenoiser net(small_arch(), s,
                        {Eigen::VectorXd::Zero(small_arch().tri_dim()), Eigen::VectorXd::Constant(small_arch().tri_dim(), 0.3)},
                        rng);
  const auto data = dataset(1, 8, 4);
  const Eigen::VectorXd x = standard_normal(net.dim(), rng);
  const Eigen::VectorXd cot = standard_normal(net.dim(), rng);
  const Eigen::VectorXd g = net.vjp(x, 40, data[0].cond, cot);
  for (int k = 0; k < 20; ++k) {
    const Eigen::VectorXd dir = standard_normal(net.dim(), rng);
    const double h = 1e-5;
    const double fd =
        cot.dot(net.evaluate(x + h * dir, 40, data[0].cond) - net.evaluate(x - h * dir, 40, data[0].cond)) / (2 * h);
    CHECK(std::abs(g.dot(dir) - fd) <= 1e-3 * std::abs(fd));
  }
}

TEST_CASE("overfits a single sample") {
  const auto s = make_schedule(10, 1e-4, 0.02);
  const auto data = dataset(1, 8, 5);
  Rng rng(6);
  OptimizerConfig opt;
  opt.steps = 2000;
  opt.batch = 8;
  Trainer tr(MlpDenoiser(small_arch(), s, fit_pixel_prior(data), rng), opt, s);
  // Fixed evaluation draws.
  Rng eval_rng(7);
  std::vector<const TrainingSample*> batch(64, &data[0]);
  std::vector<int> ts;
  std::vector<Eigen::VectorXd> eps;
  for (int i = 0; i < 64; ++i) {
    ts.push_back(1 + i % 10);
    eps.push_back(standard_normal(small_arch().tri_dim(), eval_rng));
  }
  Eigen::VectorXd g;
  const double before = tr.loss_and_gradient(batch, ts, eps, g);
  tr.run(data, rng);
  const double after = tr.loss_and_gradient(batch, ts, eps, g);
  CHECK(after < 0.05 * before);
}

TEST_CASE("training is deterministic and checkpoints round-trip") {
  const auto s = make_schedule(50, 1e-4, 0.02);
  const auto data = dataset(4, 8, 8);
  OptimizerConfig opt;
  opt.steps = 30;
  opt.batch = 4;
  const auto dir = std::filesystem::temp_directory_path() / "axisforge_test_mlp";
  std::filesystem::create_directories(dir);
  auto train_to = [&](const std::filesystem::path& p, int threads) {
    OptimizerConfig o = opt;
    o.threads = threads;
    Rng rng(9);
    Trainer tr(MlpDenoiser(small_arch(), s, fit_pixel_prior(data), rng), o, s);
    const auto log = tr.run(data, rng);
    save_checkpoint(p, make_checkpoint(tr.model(), s, &tr.state()));
    return log.back().loss;
  };
  const double la = train_to(dir / "a.ckpt", 1);
  const double lb = train_to(dir / "b.ckpt", 1);
  CHECK(la == lb);
  CHECK(slurp(dir / "a.ckpt") == slurp(dir / "b.ckpt"));
  const double lc = train_to(dir / "c.ckpt", 3);
  CHECK(std::abs(lc - la) < 1e-9 * std::abs(la));

  const Checkpoint ck = load_checkpoint(dir / "a.ckpt");
  CHECK(ck.arch == small_arch());
  CHECK(ck.T == 50);
  CHECK(ck.has_optimizer);
  CHECK(ck.adam.step == 30);
  CHECK_NOTHROW(check_compatible(ck, small_arch(), s));
  MlpConfig other = small_arch();
  other.hidden = 25;
  CHECK_THROWS_AS(check_compatible(ck, other, s), Error);
  CHECK_THROWS_AS(check_compatible(ck, small_arch(), make_schedule(60, 1e-4, 0.02)), Error);
  save_checkpoint(dir / "d.ckpt", ck);
  CHECK(slurp(dir / "a.ckpt") == slurp(dir / "d.ckpt"));

  std::ofstream(dir / "junk.ckpt") << "not a checkpoint";
  try {
    load_checkpoint(dir / "junk.ckpt");
    FAIL("expected IncompatibleCheckpoint");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::IncompatibleCheckpoint);
  }
  std::filesystem::remove_all(dir);
}

TEST_CASE("divergence is detected") {
  const auto s = make_schedule(50, 1e-4, 0.02);
  const auto data = dataset(2, 8, 10);
  Rng rng(11);
  OptimizerConfig opt;
  opt.lr = 10.0;
  opt.grad_clip = 0.0;
  opt.steps = 500;
  Trainer tr(MlpDenoiser(small_arch(), s, fit_pixel_prior(data), rng), opt, s);
  try {
    tr.run(data, rng);
    FAIL("expected DivergedLoss");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::DivergedLoss);
  }
}

TEST_CASE("auxiliary geometric term contributes a gradient") {
  const auto s = make_schedule(50, 1e-4, 0.02);
  const auto data = dataset(2, 32, 12);
  Rng rng(13);
  OptimizerConfig plain, geo;
  geo.geo_weight = 1.0;
  MlpConfig arch;
  arch.hidden = 16;
  const MlpDenoiser net(arch, s, fit_pixel_prior(data), rng);
  std::vector<const TrainingSample*> batch{&data[0], &data[1]};
  std::vector<int> ts{5, 10};
  std::vector<Eigen::VectorXd> eps{Eigen::VectorXd::Zero(arch.tri_dim()), Eigen::VectorXd::Zero(arch.tri_dim())};
  Eigen::VectorXd g1, g2;
  const double l1 = Trainer(net, plain, s).loss_and_gradient(batch, ts, eps, g1);
  const double l2 = Trainer(net, geo, s).loss_and_gradient(batch, ts, eps, g2);
  CHECK(l1 == l2);
  CHECK((g1 - g2).norm() > 0.0);
}
