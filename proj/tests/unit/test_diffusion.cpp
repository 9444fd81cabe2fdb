#include <doctest.h>

#include <cmath>
#include <random>

#include "axisforge/diffusion/denoiser.hpp"
#include "axisforge/diffusion/guidance.hpp"
#include "axisforge/diffusion/mlp.hpp"
#include "axisforge/diffusion/sampler.hpp"
#include "axisforge/diffusion/schedule.hpp"
#include "axisforge/error.hpp"
#include "axisforge/pose_sampler.hpp"
#include "axisforge/render.hpp"

using namespace axisforge;

namespace {

DiffusionSchedule standard() { return make_schedule(1000, 1e-4, 0.02); }

// Sum of an analytic denoiser and a scaled network, so guidance gradients
// pass through a dense Jacobian.
class SumDenoiser final : public Denoiser {
 public:
  SumDenoiser(const Denoiser& a, const Denoiser& b, double scale) : a_(a), b_(b), s_(scale) {}
  Eigen::Index dim() const override { return a_.dim(); }
  Eigen::VectorXd evaluate(const Eigen::VectorXd& x, int t, const QueryImage& c) const override {
    return a_.evaluate(x, t, c) + s_ * b_.evaluate(x, t, c);
  }
  Eigen::VectorXd vjp(const Eigen::VectorXd& x, int t, const QueryImage& c, const Eigen::VectorXd& g) const override {
    return a_.vjp(x, t, c, g) + s_ * b_.vjp(x, t, c, g);
  }

 private:
  const Denoiser& a_;
  const Denoiser& b_;
  double s_;
};

struct Scene {
  Pose pose;
  CameraIntrinsics K;
  TriAxisImage tri;
  QueryImage query;
};

Scene scene(int size, std::uint64_t seed) {
  Scene s;
  s.K = CameraIntrinsics::reference().rescaled(size, size);
  Rng rng(seed);
  PoseSamplerConfig cfg;
  cfg.min_axis_px *= size / 128.0;
  s.pose = sample_pose(rng, s.K, cfg);
  s.tri = render_triaxis(s.K, s.pose, 1.5, 1.0);
  s.query = render_query(s.K, s.pose);
  return s;
}

}  // namespace

TEST_CASE("make_schedule") {
  const auto one = make_schedule(1, 0.1, 0.1);
  CHECK(one.ab(1) == doctest::Approx(0.9).epsilon(1e-15));
  CHECK(one.ab(0) == 1.0);

  const auto s = standard();
  // Independent product in long double.
  long double prod = 1.0L;
  for (int t = 1; t <= 1000; ++t) {
    const long double z = 1e-4L + (0.02L - 1e-4L) * (t - 1) / 999.0L;
    CHECK(std::abs(static_cast<double>(z) - s.zeta[t]) < 1e-15);
    prod *= 1.0L - z;
    CHECK(std::abs(s.ab(t) - static_cast<double>(prod)) < 1e-12);
    CHECK(s.ab(t) < s.ab(t - 1));
    CHECK(s.ab(t) > 0.0);
  }
  CHECK(s.ab(1000) < 0.01);

  for (auto bad : {std::array<double, 2>{1e-4, 1.0}, {0.0, 0.02}, {0.03, 0.02}}) {
    try {
      make_schedule(10, bad[0], bad[1]);
      FAIL("expected InvalidSchedule");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::InvalidSchedule);
    }
  }
  CHECK_THROWS_AS(make_schedule(0, 0.1, 0.1), Error);
}

TEST_CASE("sampling_timesteps are strided and end at 1") {
  const auto ts = sampling_timesteps(standard(), 50);
  REQUIRE(ts.size() == 50);
  CHECK(ts.back() == 1);
  CHECK(ts.front() == 981);
  for (std::size_t i = 1; i < ts.size(); ++i) CHECK(ts[i - 1] - ts[i] == 20);
  CHECK_THROWS_AS(sampling_timesteps(standard(), 1001), Error);
}

TEST_CASE("forward_diffuse") {
  const auto s = standard();
  Eigen::VectorXd x0 = Eigen::VectorXd::LinSpaced(16, -1.0, 1.0);
  SUBCASE("alpha_bar = 1 leaves x0 unchanged") {
    Rng rng(1);
    CHECK(forward_diffuse(x0, 1.0, rng).x_t == x0);
  }
  SUBCASE("seeded") {
    Rng a(5), b(5);
    const auto da = forward_diffuse(x0, 300, s, a);
    const auto db = forward_diffuse(x0, 300, s, b);
    CHECK(da.x_t == db.x_t);
    CHECK(da.eps == db.eps);
  }
  SUBCASE("Monte Carlo moments at alpha_bar = 0.5") {
    const int n = 100000;
    Rng rng(2);
    const Eigen::VectorXd x(Eigen::VectorXd::Constant(n, 0.8));
    const auto d = forward_diffuse(x, 0.5, rng);
    const Eigen::ArrayXd resid = d.x_t.array() - std::sqrt(0.5) * 0.8;
    CHECK(std::abs(resid.mean()) < 3.0 * std::sqrt(0.5 / n));
    const double var = (resid - resid.mean()).square().sum() / (n - 1);
    CHECK(std::abs(var - 0.5) < 0.02 * 0.5);
  }
  SUBCASE("marginal matches composing single steps") {
    const int n = 10000, t = 40;
    Rng r1(3), r2(4);
    Eigen::VectorXd x = Eigen::VectorXd::Constant(n, 1.5);
    const auto direct = forward_diffuse(x, t, s, r1).x_t;
    for (int k = 1; k <= t; ++k)
      x = std::sqrt(1.0 - s.zeta[k]) * x + std::sqrt(s.zeta[k]) * standard_normal(n, r2);
    auto moments = [](const Eigen::VectorXd& v) {
      const double m = v.mean();
      return std::pair{m, (v.array() - m).square().sum() / (v.size() - 1)};
    };
    const auto [m1, v1] = moments(direct);
    const auto [m2, v2] = moments(x);
    CHECK(std::abs(m1 - m2) < 0.02 * std::abs(m1));
    CHECK(std::abs(v1 - v2) < 0.02 * v1 + 4.0 * v1 * std::sqrt(2.0 / n));
  }
}

TEST_CASE("predict_x0 inverts forward_diffuse") {
  const auto s = standard();
  Rng rng(6);
  const Eigen::VectorXd x0 = standard_normal(64, rng);
  for (int t : {1, 10, 500, 1000}) {
    const auto d = forward_diffuse(x0, t, s, rng);
    CHECK((predict_x0(d.x_t, t, d.eps, s) - x0).cwiseAbs().maxCoeff() < 1e-12 / std::sqrt(s.ab(t)) * 10);
    CHECK((predict_x0(d.x_t, t, Eigen::VectorXd::Zero(64), s) - d.x_t / std::sqrt(s.ab(t))).norm() == 0.0);
  }
  CHECK(predict_x0(x0, 1.0, Eigen::VectorXd::Constant(64, 1e6)) == x0);
}

TEST_CASE("ddim_step") {
  const auto s = standard();
  Rng rng(7);
  const Eigen::VectorXd x0 = standard_normal(32, rng);
  const int t = 400;
  const auto d = forward_diffuse(x0, t, s, rng);
  Rng r1(0), r2(0);
  const auto a = ddim_step(d.x_t, t, d.eps, s, 0.0, r1);
  const auto b = ddim_step(d.x_t, t, d.eps, s, 0.0, r2);
  CHECK(a == b);
  const Eigen::VectorXd expect = std::sqrt(s.ab(t - 1)) * x0 + std::sqrt(1.0 - s.ab(t - 1)) * d.eps;
  CHECK((a - expect).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(r1() == Rng(0)());  // sigma = 0 draws nothing

  try {
    ddim_step(d.x_t, t, d.eps, s, std::sqrt(1.0 - s.ab(t - 1)) * 1.01, r1);
    FAIL("expected InvalidSigma");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::InvalidSigma);
  }
  CHECK_NOTHROW(ddim_step(d.x_t, t, d.eps, s, std::sqrt(1.0 - s.ab(t - 1)), r1));
}

TEST_CASE("gaussian_denoiser") {
  const auto s = standard();
  Rng rng(8);
  GaussianScoreField f{standard_normal(50, rng), (standard_normal(50, rng).array().square() + 0.05).matrix()};
  const GaussianDenoiser den(f, s);
  const QueryImage none;
  for (int t : {1, 250, 999}) {
    const double ab = s.ab(t);
    CHECK(den.evaluate(std::sqrt(ab) * f.mean, t, none).cwiseAbs().maxCoeff() < 1e-15);
    for (int k = 0; k < 2; ++k) {
      const Eigen::VectorXd x = standard_normal(50, rng);
      // Score of N(sqrt(ab) m, ab s^2 + 1 - ab), written out independently.
      Eigen::VectorXd score(50);
      for (int i = 0; i < 50; ++i) score[i] = -(x[i] - std::sqrt(ab) * f.mean[i]) / (ab * f.var[i] + 1.0 - ab);
      CHECK((den.evaluate(x, t, none) + std::sqrt(1.0 - ab) * score).cwiseAbs().maxCoeff() < 1e-10);
      // vjp against central differences.
      const Eigen::VectorXd cot = standard_normal(50, rng), dir = standard_normal(50, rng);
      const double h = 1e-5;
      const double fd = cot.dot(den.evaluate(x + h * dir, t, none) - den.evaluate(x - h * dir, t, none)) / (2 * h);
      CHECK(std::abs(den.vjp(x, t, none, cot).dot(dir) - fd) <= 1e-8 * std::abs(fd));
    }
  }
  f.var[3] = 0.0;
  CHECK_THROWS_AS(GaussianDenoiser(f, s), Error);
}

namespace {

// Deterministic DDIM on a scalar Gaussian target is affine in x_T; track the
// coefficients through the strided chain with the closed-form posterior eps.
std::pair<double, double> ddim_affine_moments(const DiffusionSchedule& s, int steps, double m, double s2) {
  std::vector<int> ts;
  for (int i = steps - 1; i >= 0; --i) ts.push_back(1 + i * s.T / steps);
  ts.push_back(0);
  double a = 1.0, b = 0.0;
  for (std::size_t k = 0; k + 1 < ts.size(); ++k) {
    const double A = s.ab(ts[k]), Ap = s.ab(ts[k + 1]);
    const double c = std::sqrt(1.0 - A) / (A * s2 + 1.0 - A);
    const double keep = (1.0 - std::sqrt(1.0 - A) * c) * std::sqrt(Ap / A) + std::sqrt(1.0 - Ap) * c;
    a *= keep;
    b = b * keep + std::sqrt(A) * m * c * (std::sqrt(Ap / A) * std::sqrt(1.0 - A) - std::sqrt(1.0 - Ap));
  }
  return {b, a * a};
}

}  // namespace

TEST_CASE("deterministic DDIM with the analytic denoiser matches the exact discrete chain") {
  // Each element is an independent chain.
  const auto s = standard();
  const int chains = 10000;
  const GaussianDenoiser den({Eigen::VectorXd::Constant(chains, 2.0), Eigen::VectorXd::Constant(chains, 0.25)}, s);
  for (int steps : {50, 1000}) {
    Rng rng(9);
    const auto r = reverse_process(den, QueryImage{}, GuidanceConfig{}, s, SampleOptions{steps, 0.0}, rng);
    const double mean = r.x0.mean();
    const double var = (r.x0.array() - mean).square().sum() / (chains - 1);
    const auto [em, ev] = ddim_affine_moments(s, steps, 2.0, 0.25);
    CHECK(std::abs(mean - em) < 3.0 * std::sqrt(var / chains));
    CHECK(std::abs(var - ev) < 4.0 * ev * std::sqrt(2.0 / chains));
    if (steps == 1000) {
      CHECK(std::abs(mean - 2.0) < 3.0 * std::sqrt(var / chains));
      CHECK(std::abs(var - 0.25) < 0.05 * 0.25);
    }
  }
}

TEST_CASE("analytic sampler lands on a tri-axis mean image") {
  const auto s = standard();
  const Scene sc = scene(32, 10);
  const GaussianDenoiser den({sc.tri.data, Eigen::VectorXd::Constant(sc.tri.size(), 1e-6)}, s);
  Rng rng(11);
  const auto out = sample(den, sc.query, GuidanceConfig{}, s, SampleOptions{50, 0.0}, rng);
  CHECK((out.image.data - sc.tri.data).cwiseAbs().mean() < 0.05);
  CHECK(out.log.size() == 50);
}

TEST_CASE("geo_loss") {
  AxisObservation a;
  a.dir = {Vec2(1, 0), Vec2(0, 1), Vec2(-1, 0)};
  a.centroid = Vec2(10, 10);
  CHECK(geo_loss(a, a) == 0.0);
  AxisObservation b = a;
  b.centroid += Vec2(3, 4);
  CHECK(geo_loss(b, a) == 25.0);
  b = a;
  b.dir[0] = Vec2(0, 1);
  CHECK(geo_loss(b, a) == doctest::Approx(2.0));
  b = a;
  b.origin_px = Vec2(50, 50);
  CHECK(geo_loss(b, a) == 0.0);
}

TEST_CASE("guidance switched off") {
  const auto s = standard();
  const Scene sc = scene(32, 12);
  Rng init(1);
  MlpConfig arch;
  arch.hidden = 32;
  const MlpDenoiser net(arch, s, {Eigen::VectorXd::Zero(arch.tri_dim()), Eigen::VectorXd::Ones(arch.tri_dim())}, init);
  GuidanceConfig off;
  off.target = extract_axes_hard(sc.tri);
  GuidanceConfig zero = off;
  zero.enabled = true;
  zero.rho_base = 0.0;
  Rng a(3), b(3);
  const auto ra = sample(net, sc.query, off, s, SampleOptions{20, 0.5}, a);
  const auto rb = sample(net, sc.query, zero, s, SampleOptions{20, 0.5}, b);
  CHECK(ra.image == rb.image);

  Rng x(4);
  const Eigen::VectorXd xt = standard_normal(net.dim(), x);
  CHECK(guided_epsilon(xt, 500, net, sc.query, zero, s).eps == net.evaluate(xt, 500, sc.query));
}

TEST_CASE("guidance at a stationary point leaves eps unchanged") {
  const auto s = standard();
  const Scene sc = scene(32, 13);
  const GaussianDenoiser den({sc.tri.data, Eigen::VectorXd::Constant(sc.tri.size(), 1e-8)}, s);
  const int t = 300;
  Rng rng(5);
  const Eigen::VectorXd xt = forward_diffuse(sc.tri.data, t, s, rng).x_t;
  GuidanceConfig g;
  g.enabled = true;
  g.normalized = false;
  g.rho_base = 1.0;
  // Target equal to the measurement of x0_hat: zero loss and zero gradient.
  const Eigen::VectorXd x0 = predict_x0(xt, t, den.evaluate(xt, t, sc.query), s);
  g.target = extract_axes_soft(TriAxisImage(32, 32, x0.cwiseMax(0.0).cwiseMin(1.0)), g.sharpness);
  const auto out = guided_epsilon(xt, t, den, sc.query, g, s);
  CHECK(out.loss < 1e-20);
  CHECK((out.eps - den.evaluate(xt, t, sc.query)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("guidance gradient matches central differences") {
  const auto s = standard();
  const Scene sc = scene(32, 14);
  const GaussianDenoiser gauss({sc.tri.data, Eigen::VectorXd::Constant(sc.tri.size(), 0.02)}, s);
  Rng init(2);
  MlpConfig arch;
  arch.hidden = 64;
  const MlpDenoiser net(arch, s, {Eigen::VectorXd::Zero(arch.tri_dim()), Eigen::VectorXd::Ones(arch.tri_dim())}, init);
  const SumDenoiser den(gauss, net, 0.05);

  const int t = 400;
  Rng rng(6);
  const Eigen::VectorXd xt = forward_diffuse(sc.tri.data, t, s, rng).x_t;
  GuidanceConfig g;
  g.enabled = true;
  g.target = observation_from_lines(project_axes(sc.K, sc.pose), intensity_centroid(sc.tri));
  const auto res = geo_gradient(xt, t, den, sc.query, g, s);
  CHECK(res.loss > 0.0);
  const double scale = res.grad.cwiseAbs().maxCoeff();
  const double h = 1e-3;
  int probes = 0;
  std::uniform_int_distribution<Eigen::Index> pick(0, xt.size() - 1);
  while (probes < 20) {
    const Eigen::Index i = pick(rng);
    if (std::abs(res.grad[i]) < 1e-2 * scale) continue;
    Eigen::VectorXd p = xt, m = xt;
    p[i] += h;
    m[i] -= h;
    const double fd = (geo_loss_at(p, t, den, sc.query, g, s) - geo_loss_at(m, t, den, sc.query, g, s)) / (2 * h);
    CHECK(std::abs(res.grad[i] - fd) <= 1e-3 * std::abs(fd));
    ++probes;
  }
}

TEST_CASE("guidance skips when the measurement is undefined") {
  const auto s = standard();
  const int n = 32 * 32 * 3;
  // Mean zero everywhere: x0_hat clamps to an empty image.
  const GaussianDenoiser den({Eigen::VectorXd::Constant(n, -1.0), Eigen::VectorXd::Constant(n, 1e-6)}, s);
  GuidanceConfig g;
  g.enabled = true;
  QueryImage q(32, 32);
  Rng rng(1);
  const auto out = sample(den, q, g, s, SampleOptions{10, 0.0}, rng);
  for (const auto& e : out.log) CHECK(e.skipped);
}

TEST_CASE("guided sampling moves the analytic sample toward the target") {
  const auto s = standard();
  const Scene sc = scene(32, 15);
  const Scene other = scene(32, 16);
  // Prior centred on the wrong image; guidance pulls toward the right axes.
  const GaussianDenoiser den({other.tri.data, Eigen::VectorXd::Constant(sc.tri.size(), 0.01)}, s);
  GuidanceConfig g;
  g.target = observation_from_lines(project_axes(sc.K, sc.pose), intensity_centroid(sc.tri));
  auto loss_of = [&](double rho) {
    g.enabled = rho > 0.0;
    g.rho_base = rho;
    Rng rng(21);
    const auto out = sample(den, sc.query, g, s, SampleOptions{50, 0.0}, rng);
    return geo_loss(extract_axes_soft(out.image), g.target);
  };
  CHECK(loss_of(100.0) < loss_of(0.0));
}
