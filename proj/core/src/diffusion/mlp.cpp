#include "axisforge/diffusion/mlp.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <thread>

#include "axisforge/error.hpp"
#include "../binary_io.hpp"

namespace axisforge {

namespace {

struct Offsets {
  Eigen::Index in, h, out;
  Eigen::Index w1, b1, w2, b2, w3, b3, end;
};

Offsets offsets(const MlpConfig& c) {
  Offsets o;
  o.in = c.input_dim();
  o.h = c.hidden;
  o.out = c.tri_dim();
  o.w1 = 0;
  o.b1 = o.w1 + o.h * o.in;
  o.w2 = o.b1 + o.h;
  o.b2 = o.w2 + o.h * o.h;
  o.w3 = o.b2 + o.h;
  o.b3 = o.w3 + o.out * o.h;
  o.end = o.b3 + o.out;
  return o;
}

using CMap = Eigen::Map<const Eigen::MatrixXd>;
using Map = Eigen::Map<Eigen::MatrixXd>;
using CVMap = Eigen::Map<const Eigen::VectorXd>;
using VMap = Eigen::Map<Eigen::VectorXd>;

Eigen::MatrixXd silu(const Eigen::MatrixXd& z) {
  return z.unaryExpr([](double v) { return v / (1.0 + std::exp(-v)); });
}

Eigen::MatrixXd silu_prime(const Eigen::MatrixXd& z) {
  return z.unaryExpr([](double v) {
    const double s = 1.0 / (1.0 + std::exp(-v));
    return s * (1.0 + v * (1.0 - s));
  });
}

}  // namespace

Eigen::Index MlpConfig::param_count() const { return offsets(*this).end; }

void MlpConfig::validate() const {
  if (width < 1 || height < 1 || hidden < 1 || time_dim < 2 || time_dim % 2 != 0)
    throw Error(ErrorCode::InvalidArgument, "invalid MLP architecture");
}

Eigen::VectorXd timestep_embedding(int t, int dim) {
  const int half = dim / 2;
  Eigen::VectorXd e(dim);
  for (int k = 0; k < half; ++k) {
    const double freq = std::exp(-std::log(10000.0) * k / half);
    e[k] = std::sin(t * freq);
    e[half + k] = std::cos(t * freq);
  }
  return e;
}

GaussianScoreField fit_pixel_prior(const std::vector<TrainingSample>& data, double var_floor) {
  if (data.empty()) throw Error(ErrorCode::InvalidArgument, "empty training set");
  const Eigen::Index n = data.front().x0.size();
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(n), sq = Eigen::VectorXd::Zero(n);
  for (const auto& s : data) {
    if (s.x0.size() != n) throw Error(ErrorCode::InvalidArgument, "training images differ in size");
    mean += s.x0.data;
    sq += s.x0.data.cwiseAbs2();
  }
  mean /= static_cast<double>(data.size());
  const Eigen::VectorXd var = (sq / static_cast<double>(data.size()) - mean.cwiseAbs2()).cwiseMax(var_floor);
  return {mean, var};
}

MlpDenoiser::MlpDenoiser(const MlpConfig& cfg, const DiffusionSchedule& sched, GaussianScoreField prior, Rng& rng)
    : cfg_(cfg), base_(std::move(prior), sched) {
  cfg_.validate();
  if (base_.dim() != cfg_.tri_dim()) throw Error(ErrorCode::InvalidArgument, "prior size does not match the MLP");
  const Offsets o = offsets(cfg_);
  theta_ = Eigen::VectorXd::Zero(o.end);
  std::normal_distribution<double> n(0.0, 1.0);
  auto fill = [&](Eigen::Index off, Eigen::Index count, double fan_in) {
    const double s = 1.0 / std::sqrt(fan_in);
    for (Eigen::Index i = 0; i < count; ++i) theta_[off + i] = s * n(rng);
  };
  fill(o.w1, o.h * o.in, static_cast<double>(o.in));
  fill(o.w2, o.h * o.h, static_cast<double>(o.h));
  fill(o.w3, o.out * o.h, static_cast<double>(o.h));
}

MlpDenoiser::MlpDenoiser(const MlpConfig& cfg, const DiffusionSchedule& sched, GaussianScoreField prior,
                         Eigen::VectorXd params)
    : cfg_(cfg), base_(std::move(prior), sched), theta_(std::move(params)) {
  cfg_.validate();
  if (base_.dim() != cfg_.tri_dim()) throw Error(ErrorCode::InvalidArgument, "prior size does not match the MLP");
  if (theta_.size() != cfg_.param_count())
    throw Error(ErrorCode::IncompatibleCheckpoint, "parameter count does not match the architecture");
}

void MlpDenoiser::assemble(const Eigen::VectorXd& x_t, int t, const Eigen::VectorXd& cond,
                           Eigen::Ref<Eigen::VectorXd> column) const {
  if (x_t.size() != cfg_.tri_dim() || cond.size() != cfg_.query_dim())
    throw Error(ErrorCode::InvalidArgument, "input size does not match the MLP resolution");
  column.head(cfg_.tri_dim()) = x_t;
  column.segment(cfg_.tri_dim(), cfg_.query_dim()) = cond;
  column.tail(cfg_.time_dim) = timestep_embedding(t, cfg_.time_dim);
}

void MlpDenoiser::forward(const Eigen::MatrixXd& input, Cache& c) const {
  const Offsets o = offsets(cfg_);
  const double* p = theta_.data();
  c.z1 = CMap(p + o.w1, o.h, o.in) * input;
  c.z1.colwise() += CVMap(p + o.b1, o.h);
  c.a1 = silu(c.z1);
  c.z2 = CMap(p + o.w2, o.h, o.h) * c.a1;
  c.z2.colwise() += CVMap(p + o.b2, o.h);
  c.a2 = silu(c.z2);
  c.y = CMap(p + o.w3, o.out, o.h) * c.a2;
  c.y.colwise() += CVMap(p + o.b3, o.out);
}

Eigen::MatrixXd MlpDenoiser::backward(const Eigen::MatrixXd& input, const Cache& c, const Eigen::MatrixXd& dY,
                                      Eigen::VectorXd* grad, bool want_input_grad) const {
  const Offsets o = offsets(cfg_);
  const double* p = theta_.data();
  const CMap W1(p + o.w1, o.h, o.in), W2(p + o.w2, o.h, o.h), W3(p + o.w3, o.out, o.h);
  const Eigen::MatrixXd dz2 = (W3.transpose() * dY).cwiseProduct(silu_prime(c.z2));
  const Eigen::MatrixXd dz1 = (W2.transpose() * dz2).cwiseProduct(silu_prime(c.z1));
  if (grad) {
    double* g = grad->data();
    Map(g + o.w3, o.out, o.h).noalias() += dY * c.a2.transpose();
    VMap(g + o.b3, o.out) += dY.rowwise().sum();
    Map(g + o.w2, o.h, o.h).noalias() += dz2 * c.a1.transpose();
    VMap(g + o.b2, o.h) += dz2.rowwise().sum();
    Map(g + o.w1, o.h, o.in).noalias() += dz1 * input.transpose();
    VMap(g + o.b1, o.h) += dz1.rowwise().sum();
  }
  if (!want_input_grad) return {};
  return W1.transpose() * dz1;
}

Eigen::VectorXd MlpDenoiser::evaluate(const Eigen::VectorXd& x_t, int t, const QueryImage& cond) const {
  Eigen::MatrixXd in(cfg_.input_dim(), 1);
  assemble(x_t, t, cond.data, in.col(0));
  Cache c;
  forward(in, c);
  return base_.evaluate(x_t, t, cond) - output_scale(t).cwiseProduct(c.y.col(0));
}

Eigen::VectorXd MlpDenoiser::output_scale(int t) const {
  return std::sqrt(base_.schedule().ab(t)) * base_.gain(t);
}

Eigen::VectorXd MlpDenoiser::vjp(const Eigen::VectorXd& x_t, int t, const QueryImage& cond,
                                 const Eigen::VectorXd& cotangent) const {
  Eigen::MatrixXd in(cfg_.input_dim(), 1);
  assemble(x_t, t, cond.data, in.col(0));
  Cache c;
  forward(in, c);
  const Eigen::MatrixXd dx = backward(in, c, -output_scale(t).cwiseProduct(cotangent), nullptr, true);
  return dx.col(0).head(cfg_.tri_dim()) + base_.vjp(x_t, t, cond, cotangent);
}

void OptimizerConfig::validate() const {
  if (steps < 0 || batch < 1 || !(lr > 0.0) || !(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0) ||
      !(adam_eps > 0.0) || !(grad_clip >= 0.0) || !(geo_weight >= 0.0) || !(geo_sharpness > 0.0) || threads < 1 ||
      log_every < 1)
    throw Error(ErrorCode::InvalidArgument, "invalid optimizer configuration");
}

Trainer::Trainer(MlpDenoiser model, OptimizerConfig opt, DiffusionSchedule sched)
    : Trainer(std::move(model), AdamState{}, opt, std::move(sched)) {}

Trainer::Trainer(MlpDenoiser model, AdamState state, OptimizerConfig opt, DiffusionSchedule sched)
    : model_(std::move(model)), adam_(std::move(state)), opt_(opt), sched_(std::move(sched)) {
  opt_.validate();
  const Eigen::Index n = model_.params().size();
  if (adam_.m.size() == 0) {
    adam_.m = Eigen::VectorXd::Zero(n);
    adam_.v = Eigen::VectorXd::Zero(n);
  }
  if (adam_.m.size() != n || adam_.v.size() != n)
    throw Error(ErrorCode::IncompatibleCheckpoint, "optimizer state does not match the model");
}

double Trainer::loss_and_gradient(const std::vector<const TrainingSample*>& batch, const std::vector<int>& t,
                                  const std::vector<Eigen::VectorXd>& eps, Eigen::VectorXd& grad) const {
  const Eigen::Index B = static_cast<Eigen::Index>(batch.size());
  const Eigen::Index out = model_.config().tri_dim();
  const Eigen::Index P = model_.params().size();
  if (grad.size() != P) grad.resize(P);
  grad.setZero();
  if (B == 0) return 0.0;

  const int workers = static_cast<int>(std::min<Eigen::Index>(opt_.threads, B));
  auto& grads = worker_grads_;
  grads.resize(std::max<std::size_t>(grads.size(), static_cast<std::size_t>(workers)));
  std::vector<double> losses(workers, 0.0);
  auto work = [&](int w) {
    const Eigen::Index lo = B * w / workers, hi = B * (w + 1) / workers;
    Eigen::MatrixXd in(model_.config().input_dim(), hi - lo);
    Eigen::MatrixXd target(out, hi - lo);
    std::vector<Eigen::VectorXd> xts;
    for (Eigen::Index j = lo; j < hi; ++j) {
      const double ab = sched_.ab(t[j]);
      xts.push_back(std::sqrt(ab) * batch[j]->x0.data + std::sqrt(1.0 - ab) * eps[j]);
      model_.assemble(xts.back(), t[j], batch[j]->cond.data, in.col(j - lo));
      target.col(j - lo) = eps[j];
    }
    MlpDenoiser::Cache c;
    model_.forward(in, c);
    Eigen::MatrixXd scale(out, hi - lo), pred(out, hi - lo);
    for (Eigen::Index j = lo; j < hi; ++j) {
      scale.col(j - lo) = model_.output_scale(t[j]);
      pred.col(j - lo) = model_.base().evaluate(xts[j - lo], t[j], batch[j]->cond) -
                         scale.col(j - lo).cwiseProduct(c.y.col(j - lo));
    }
    const Eigen::MatrixXd diff = pred - target;
    losses[w] = diff.squaredNorm();
    Eigen::MatrixXd dY = (2.0 / static_cast<double>(B * out)) * diff;
    if (opt_.geo_weight > 0.0) {
      const auto& cfg = model_.config();
      for (Eigen::Index j = lo; j < hi; ++j) {
        const double ab = sched_.ab(t[j]);
        const Eigen::VectorXd x0 = predict_x0(xts[j - lo], ab, pred.col(j - lo));
        try {
          const SoftExtraction meas(TriAxisImage(cfg.width, cfg.height, x0.cwiseMax(0.0).cwiseMin(1.0)),
                                    opt_.geo_sharpness);
          AxisObservation::Vector cot = 2.0 * (meas.observation().flatten() - batch[j]->target.flatten());
          cot.head<2>().setZero();
          Eigen::VectorXd g0 = meas.vjp(cot);
          for (Eigen::Index i = 0; i < g0.size(); ++i)
            if (!(x0[i] > 0.0 && x0[i] < 1.0)) g0[i] = 0.0;
          dY.col(j - lo) -= (opt_.geo_weight / B) * std::sqrt((1.0 - ab) / ab) * g0;
        } catch (const Error&) {
          // Measurement undefined on this estimate; no geometric signal.
        }
      }
    }
    dY = -scale.cwiseProduct(dY);
    if (w == 0) {
      model_.backward(in, c, dY, &grad, false);
    } else {
      if (grads[w].size() != P) grads[w].resize(P);
      grads[w].setZero();
      model_.backward(in, c, dY, &grads[w], false);
    }
  };
  if (workers == 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(work, w);
    for (auto& th : pool) th.join();
  }
  double loss = losses[0];
  for (int w = 1; w < workers; ++w) {
    grad += grads[w];
    loss += losses[w];
  }
  return loss / static_cast<double>(B * out);
}

double Trainer::step(const std::vector<TrainingSample>& data, Rng& rng) {
  if (data.empty()) throw Error(ErrorCode::InvalidArgument, "empty training set");
  std::uniform_int_distribution<std::size_t> pick(0, data.size() - 1);
  std::uniform_int_distribution<int> pick_t(1, sched_.T);
  std::vector<const TrainingSample*> batch;
  std::vector<int> ts;
  std::vector<Eigen::VectorXd> eps;
  for (int b = 0; b < opt_.batch; ++b) {
    batch.push_back(&data[pick(rng)]);
    ts.push_back(pick_t(rng));
    eps.push_back(standard_normal(model_.config().tri_dim(), rng));
  }
  Eigen::VectorXd& grad = grad_;
  const double loss = loss_and_gradient(batch, ts, eps, grad);
  if (!std::isfinite(loss)) throw Error(ErrorCode::DivergedLoss, "non-finite training loss");
  if (initial_loss_ < 0.0) {
    initial_loss_ = loss;
    running_ = loss;
  } else {
    running_ = 0.98 * running_ + 0.02 * loss;
  }
  if (running_ > 10.0 * initial_loss_)
    throw Error(ErrorCode::DivergedLoss, "running loss exceeds ten times its initial value");

  if (opt_.grad_clip > 0.0) {
    const double norm = grad.norm();
    if (norm > opt_.grad_clip) grad *= opt_.grad_clip / norm;
  }
  ++adam_.step;
  const double c1 = 1.0 - std::pow(opt_.beta1, static_cast<double>(adam_.step));
  const double c2 = 1.0 - std::pow(opt_.beta2, static_cast<double>(adam_.step));
  const double b1 = opt_.beta1, b2 = opt_.beta2, lr = opt_.lr / c1, inv_c2 = 1.0 / c2, e = opt_.adam_eps;
  double* th = model_.params().data();
  double* m = adam_.m.data();
  double* v = adam_.v.data();
  const double* g = grad.data();
  for (Eigen::Index i = 0, n = grad.size(); i < n; ++i) {
    m[i] = b1 * m[i] + (1.0 - b1) * g[i];
    v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
    th[i] -= lr * m[i] / (std::sqrt(v[i] * inv_c2) + e);
  }
  return loss;
}

std::vector<TrainLogEntry> Trainer::run(const std::vector<TrainingSample>& data, Rng& rng,
                                        const std::function<void(const TrainLogEntry&)>& on_log) {
  std::vector<TrainLogEntry> log;
  for (int i = 0; i < opt_.steps; ++i) {
    const double loss = step(data, rng);
    if (i == 0 || (i + 1) % opt_.log_every == 0 || i + 1 == opt_.steps) {
      log.push_back({adam_.step, loss, running_});
      if (on_log) on_log(log.back());
    }
  }
  return log;
}

MlpDenoiser train_denoiser(const std::vector<TrainingSample>& data, const MlpConfig& arch,
                           const OptimizerConfig& opt, const DiffusionSchedule& sched, Rng& rng) {
  Trainer tr(MlpDenoiser(arch, sched, fit_pixel_prior(data), rng), opt, sched);
  tr.run(data, rng);
  return tr.model();
}

namespace {

constexpr char kMagic[8] = {'A', 'X', 'F', 'G', 'M', 'L', 'P', '\0'};
constexpr std::uint32_t kVersion = 1;

using detail::get;
using detail::get_f32s;
using detail::get_f64;
using detail::put;
using detail::put_f32s;
using detail::put_f64;

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ck) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  os.write(kMagic, sizeof kMagic);
  put<std::uint32_t>(os, kVersion);
  put<std::uint32_t>(os, static_cast<std::uint32_t>(ck.arch.width));
  put<std::uint32_t>(os, static_cast<std::uint32_t>(ck.arch.height));
  put<std::uint32_t>(os, static_cast<std::uint32_t>(ck.arch.hidden));
  put<std::uint32_t>(os, static_cast<std::uint32_t>(ck.arch.time_dim));
  put<std::uint32_t>(os, static_cast<std::uint32_t>(ck.T));
  put_f64(os, ck.zeta_start);
  put_f64(os, ck.zeta_end);
  put<std::uint64_t>(os, static_cast<std::uint64_t>(ck.params.size()));
  put<std::uint8_t>(os, ck.has_optimizer ? 1 : 0);
  put<std::uint64_t>(os, ck.has_optimizer ? ck.adam.step : 0);
  put_f32s(os, ck.params);
  put_f32s(os, ck.prior.mean);
  put_f32s(os, ck.prior.var);
  if (ck.has_optimizer) {
    put_f32s(os, ck.adam.m);
    put_f32s(os, ck.adam.v);
  }
  if (!os) throw Error(ErrorCode::IoError, "failed writing " + path.string());
}

Checkpoint make_checkpoint(const MlpDenoiser& model, const DiffusionSchedule& sched, const AdamState* adam) {
  Checkpoint ck;
  ck.arch = model.config();
  ck.T = sched.T;
  ck.zeta_start = sched.zeta_start;
  ck.zeta_end = sched.zeta_end;
  ck.params = model.params();
  ck.prior = model.base().field();
  if (adam) {
    ck.has_optimizer = true;
    ck.adam = *adam;
  }
  return ck;
}

MlpDenoiser model_from_checkpoint(const Checkpoint& ck) {
  return MlpDenoiser(ck.arch, make_schedule(ck.T, ck.zeta_start, ck.zeta_end), ck.prior, ck.params);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(ErrorCode::IoError, "cannot read " + path.string());
  char magic[8];
  is.read(magic, sizeof magic);
  if (!is || std::memcmp(magic, kMagic, sizeof magic) != 0)
    throw Error(ErrorCode::IncompatibleCheckpoint, "not a checkpoint file");
  if (get<std::uint32_t>(is) != kVersion) throw Error(ErrorCode::IncompatibleCheckpoint, "unsupported version");
  Checkpoint ck;
  ck.arch.width = static_cast<int>(get<std::uint32_t>(is));
  ck.arch.height = static_cast<int>(get<std::uint32_t>(is));
  ck.arch.hidden = static_cast<int>(get<std::uint32_t>(is));
  ck.arch.time_dim = static_cast<int>(get<std::uint32_t>(is));
  ck.T = static_cast<int>(get<std::uint32_t>(is));
  ck.zeta_start = get_f64(is);
  ck.zeta_end = get_f64(is);
  const auto n = static_cast<Eigen::Index>(get<std::uint64_t>(is));
  ck.arch.validate();
  if (n != ck.arch.param_count()) throw Error(ErrorCode::IncompatibleCheckpoint, "parameter count mismatch");
  ck.has_optimizer = get<std::uint8_t>(is) != 0;
  ck.adam.step = get<std::uint64_t>(is);
  ck.params = get_f32s(is, n);
  ck.prior.mean = get_f32s(is, ck.arch.tri_dim());
  ck.prior.var = get_f32s(is, ck.arch.tri_dim());
  if (ck.has_optimizer) {
    ck.adam.m = get_f32s(is, n);
    ck.adam.v = get_f32s(is, n);
  }
  return ck;
}

void check_compatible(const Checkpoint& ck, const MlpConfig& arch, const DiffusionSchedule& sched) {
  if (!(ck.arch == arch)) throw Error(ErrorCode::IncompatibleCheckpoint, "architecture differs from the config");
  if (ck.T != sched.T || ck.zeta_start != sched.zeta_start || ck.zeta_end != sched.zeta_end)
    throw Error(ErrorCode::IncompatibleCheckpoint, "schedule differs from the config");
}

}  // namespace axisforge
