#include "axisforge/pipeline/config.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "axisforge/error.hpp"

namespace axisforge {

using nlohmann::json;

namespace {

// Reads keys out of one JSON object, remembering which were consumed so
// that misspelled keys are reported instead of silently ignored.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw Error(ErrorCode::InvalidArgument, "config: " + where() + " must be an object");
  }

  template <class T>
  void read(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception&) {
      throw Error(ErrorCode::InvalidArgument, "config: wrong type for " + path_ + key);
    }
  }

  Section sub(const char* key) {
    seen_.insert(key);
    static const json empty = json::object();
    return Section(j_.contains(key) ? j_.at(key) : empty, path_ + key + ".");
  }

  void finish() const {
    for (const auto& item : j_.items())
      if (!seen_.count(item.key())) throw Error(ErrorCode::InvalidArgument, "config: unknown key " + path_ + item.key());
  }

 private:
  std::string where() const { return path_.empty() ? "document" : path_.substr(0, path_.size() - 1); }

  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

void require(bool ok, const std::string& key, const std::string& what) {
  if (!ok) throw Error(ErrorCode::InvalidArgument, "config: " + key + " " + what);
}

}  // namespace

CameraIntrinsics RenderConfig::intrinsics() const { return CameraIntrinsics::reference().rescaled(size, size); }

PoseSamplerConfig RenderConfig::sampler() const {
  PoseSamplerConfig s;
  s.depth_min = depth_min;
  s.depth_max = depth_max;
  s.lateral = lateral;
  s.axis_len = axis_len;
  s.min_axis_px = min_axis_px * size / static_cast<double>(CameraIntrinsics::reference().width);
  s.min_line_separation_deg = min_line_separation_deg;
  return s;
}

DiffusionSchedule ScheduleConfig::make() const { return make_schedule(T, zeta_start, zeta_end); }

MlpConfig RunConfig::arch() const {
  MlpConfig a;
  a.width = a.height = render.size;
  a.hidden = train.hidden;
  a.time_dim = train.time_dim;
  return a;
}

void RunConfig::validate() const {
  require(schema_version == kConfigSchemaVersion, "schema_version", "is not supported");
  require(render.size >= 8, "render.size", "must be at least 8");
  require(render.thickness > 0.0, "render.thickness", "must be positive");
  require(render.axis_len > 0.0, "render.axis_len", "must be positive");
  require(render.occlusion_frac >= 0.0 && render.occlusion_frac < 1.0, "render.occlusion_frac", "must be in [0, 1)");
  require(dataset.n_train >= 1, "dataset.n_train", "must be at least 1");
  require(dataset.n_test >= 1, "dataset.n_test", "must be at least 1");
  require(train.var_floor > 0.0, "train.var_floor", "must be positive");
  require(train.condition == "clean" || train.condition == "degraded", "train.condition", "must be clean or degraded");
  require(infer.steps >= 1 && infer.steps <= schedule.T, "infer.steps", "must be in [1, schedule.T]");
  require(infer.eta >= 0.0, "infer.eta", "must be non-negative");
  require(infer.denoiser == "mlp" || infer.denoiser == "analytic", "infer.denoiser", "must be mlp or analytic");
  require(infer.analytic_var > 0.0, "infer.analytic_var", "must be positive");
  require(infer.condition == "clean" || infer.condition == "degraded", "infer.condition", "must be clean or degraded");
  require(eval.reference_size >= 1, "eval.reference_size", "must be positive");
  require(eval.half_extent > 0.0, "eval.half_extent", "must be positive");
  require(eval.thresholds.add_fraction > 0.0, "eval.thresholds.add_fraction", "must be positive");
  require(eval.thresholds.reproj_px > 0.0, "eval.thresholds.reproj_px", "must be positive");
  require(guidance.rho_base >= 0.0, "guidance.rho_base", "must be non-negative");
  require(guidance.sharpness > 0.0, "guidance.sharpness", "must be positive");
  require(guidance.line_ratio >= 1.0, "guidance.line_ratio", "must be at least 1");
  render.intrinsics().validate();
  render.sampler().validate();
  DegradationSpec{render.occlusion_frac, render.noise_sigma, render.blur_radius, 0}.validate();
  schedule.make();
  arch().validate();
  train.opt.validate();
}

RunConfig parse_config(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::InvalidArgument, std::string("config: ") + e.what());
  }
  RunConfig c;
  Section root(doc, "");
  root.read("schema_version", c.schema_version);
  root.read("seed", c.seed);
  root.read("deterministic", c.deterministic);

  Section r = root.sub("render");
  r.read("size", c.render.size);
  r.read("thickness", c.render.thickness);
  r.read("axis_len", c.render.axis_len);
  r.read("depth_min", c.render.depth_min);
  r.read("depth_max", c.render.depth_max);
  r.read("lateral", c.render.lateral);
  r.read("min_axis_px", c.render.min_axis_px);
  r.read("min_line_separation_deg", c.render.min_line_separation_deg);
  r.read("occlusion_frac", c.render.occlusion_frac);
  r.read("noise_sigma", c.render.noise_sigma);
  r.read("blur_radius", c.render.blur_radius);
  r.read("write_ppm", c.render.write_ppm);
  r.finish();

  Section d = root.sub("dataset");
  d.read("n_train", c.dataset.n_train);
  d.read("n_test", c.dataset.n_test);
  d.finish();

  Section s = root.sub("schedule");
  s.read("T", c.schedule.T);
  s.read("zeta_start", c.schedule.zeta_start);
  s.read("zeta_end", c.schedule.zeta_end);
  s.finish();

  Section t = root.sub("train");
  auto& o = c.train.opt;
  t.read("steps", o.steps);
  t.read("batch", o.batch);
  t.read("lr", o.lr);
  t.read("beta1", o.beta1);
  t.read("beta2", o.beta2);
  t.read("adam_eps", o.adam_eps);
  t.read("grad_clip", o.grad_clip);
  t.read("geo_weight", o.geo_weight);
  t.read("geo_sharpness", o.geo_sharpness);
  t.read("threads", o.threads);
  t.read("log_every", o.log_every);
  t.read("hidden", c.train.hidden);
  t.read("time_dim", c.train.time_dim);
  t.read("var_floor", c.train.var_floor);
  t.read("condition", c.train.condition);
  t.finish();

  Section g = root.sub("guidance");
  g.read("rho_base", c.guidance.rho_base);
  g.read("sharpness", c.guidance.sharpness);
  g.read("normalized", c.guidance.normalized);
  g.read("line_ratio", c.guidance.line_ratio);
  g.finish();

  Section i = root.sub("infer");
  i.read("steps", c.infer.steps);
  i.read("eta", c.infer.eta);
  i.read("denoiser", c.infer.denoiser);
  i.read("analytic_var", c.infer.analytic_var);
  i.read("condition", c.infer.condition);
  i.read("write_images", c.infer.write_images);
  i.read("write_logs", c.infer.write_logs);
  i.finish();

  Section e = root.sub("eval");
  e.read("add_fraction", c.eval.thresholds.add_fraction);
  e.read("reproj_px", c.eval.thresholds.reproj_px);
  e.read("reference_size", c.eval.reference_size);
  e.read("half_extent", c.eval.half_extent);
  e.finish();

  Section q = root.sub("oracle");
  q.read("omega_perturbation", c.oracle.omega_perturbation);
  q.finish();

  root.finish();
  c.validate();
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string dump_config(const RunConfig& c) {
  const auto& o = c.train.opt;
  json j = {
      {"schema_version", c.schema_version},
      {"seed", c.seed},
      {"deterministic", c.deterministic},
      {"render",
       {{"size", c.render.size},
        {"thickness", c.render.thickness},
        {"axis_len", c.render.axis_len},
        {"depth_min", c.render.depth_min},
        {"depth_max", c.render.depth_max},
        {"lateral", c.render.lateral},
        {"min_axis_px", c.render.min_axis_px},
        {"min_line_separation_deg", c.render.min_line_separation_deg},
        {"occlusion_frac", c.render.occlusion_frac},
        {"noise_sigma", c.render.noise_sigma},
        {"blur_radius", c.render.blur_radius},
        {"write_ppm", c.render.write_ppm}}},
      {"dataset", {{"n_train", c.dataset.n_train}, {"n_test", c.dataset.n_test}}},
      {"schedule", {{"T", c.schedule.T}, {"zeta_start", c.schedule.zeta_start}, {"zeta_end", c.schedule.zeta_end}}},
      {"train",
       {{"steps", o.steps},
        {"batch", o.batch},
        {"lr", o.lr},
        {"beta1", o.beta1},
        {"beta2", o.beta2},
        {"adam_eps", o.adam_eps},
        {"grad_clip", o.grad_clip},
        {"geo_weight", o.geo_weight},
        {"geo_sharpness", o.geo_sharpness},
        {"threads", o.threads},
        {"log_every", o.log_every},
        {"hidden", c.train.hidden},
        {"time_dim", c.train.time_dim},
        {"var_floor", c.train.var_floor},
        {"condition", c.train.condition}}},
      {"guidance",
       {{"rho_base", c.guidance.rho_base},
        {"sharpness", c.guidance.sharpness},
        {"normalized", c.guidance.normalized},
        {"line_ratio", c.guidance.line_ratio}}},
      {"infer",
       {{"steps", c.infer.steps},
        {"eta", c.infer.eta},
        {"denoiser", c.infer.denoiser},
        {"analytic_var", c.infer.analytic_var},
        {"condition", c.infer.condition},
        {"write_images", c.infer.write_images},
        {"write_logs", c.infer.write_logs}}},
      {"eval",
       {{"add_fraction", c.eval.thresholds.add_fraction},
        {"reproj_px", c.eval.thresholds.reproj_px},
        {"reference_size", c.eval.reference_size},
        {"half_extent", c.eval.half_extent}}},
      {"oracle", {{"omega_perturbation", c.oracle.omega_perturbation}}},
  };
  return j.dump(2) + "\n";
}

int resolve_threads(bool deterministic, int requested) {
  if (deterministic) return 1;
  int n = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  if (const char* env = std::getenv("AXISFORGE_THREADS")) {
    const int cap = std::atoi(env);
    if (cap >= 1) n = std::min(n, cap);
  }
  if (requested > 0) n = std::min(n, requested);
  return n;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t record_seed(std::uint64_t global_seed, const std::string& id) {
  // FNV-1a over the id, mixed with the global seed.
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : id) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return splitmix64(global_seed ^ splitmix64(h));
}

}  // namespace axisforge
