#include <atomic>
#include <fstream>
#include <memory>
#include <mutex>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "axisforge/diffusion/sampler.hpp"
#include "axisforge/error.hpp"
#include "axisforge/extraction.hpp"
#include "axisforge/pipeline/commands.hpp"
#include "axisforge/tbm.hpp"
#include "json_util.hpp"

namespace axisforge {

using nlohmann::json;

namespace {

json record_json(const PredictionRecord& r) {
  json j = {{"id", r.id}, {"seed", r.seed}, {"guidance_skipped", r.guidance_skipped},
            {"guidance_steps", r.guidance_steps}};
  if (r.pose) {
    j["pose"] = detail::pose_to_json(*r.pose);
    j["failure"] = nullptr;
  } else {
    j["pose"] = nullptr;
    j["failure"] = {{"variant", r.failure}, {"index", r.failure_index}, {"message", r.message}};
  }
  return j;
}

PredictionRecord record_from(const json& j) {
  PredictionRecord r;
  r.id = j.at("id").get<std::string>();
  r.seed = j.at("seed").get<std::uint64_t>();
  r.guidance_skipped = j.at("guidance_skipped").get<int>();
  r.guidance_steps = j.at("guidance_steps").get<int>();
  if (!j.at("pose").is_null()) r.pose = detail::pose_from_json(j.at("pose"));
  if (!j.at("failure").is_null()) {
    const auto& f = j.at("failure");
    r.failure = f.at("variant").get<std::string>();
    r.failure_index = f.at("index").get<int>();
    r.message = f.at("message").get<std::string>();
  }
  return r;
}

void write_sampling_log(const fs::path& path, const std::vector<SamplingLogEntry>& log) {
  std::string text;
  for (const auto& e : log)
    text += json{{"t", e.t}, {"guidance_norm", e.guidance_norm}, {"loss", e.loss}, {"skipped", e.skipped}}.dump() +
            "\n";
  write_text(path, text);
}

}  // namespace

InferResult cmd_infer(const RunConfig& cfg, const std::optional<fs::path>& checkpoint, const fs::path& dataset_dir,
                      const std::string& split, bool guidance_on, const fs::path& out_dir) {
  cfg.validate();
  const Manifest m = read_manifest(dataset_dir / kManifestFile);
  const auto records = m.split(split);
  if (records.empty()) throw Error(ErrorCode::InvalidArgument, "dataset has no '" + split + "' records");
  const DiffusionSchedule sched = cfg.schedule.make();

  std::shared_ptr<const MlpDenoiser> mlp;
  if (cfg.infer.denoiser == "mlp") {
    if (!checkpoint) throw Error(ErrorCode::InvalidArgument, "mlp inference needs a checkpoint");
    const Checkpoint ck = load_checkpoint(*checkpoint);
    check_compatible(ck, cfg.arch(), sched);
    mlp = std::make_shared<const MlpDenoiser>(model_from_checkpoint(ck));
  }

  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (cfg.infer.write_images) fs::create_directories(out_dir / "images", ec);
  if (cfg.infer.write_logs) fs::create_directories(out_dir / "logs", ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot create " + out_dir.string());

  const SampleOptions opts{cfg.infer.steps, cfg.infer.eta};
  std::vector<PredictionRecord> out(records.size());
  std::vector<std::string> io_errors;
  std::mutex io_mutex;

  auto run_one = [&](std::size_t i) {
    const DatasetRecord& r = *records[i];
    PredictionRecord& p = out[i];
    p.id = r.id;
    p.seed = record_seed(cfg.seed, r.id);
    try {
      const LoadedRecord img = load_record(dataset_dir, r);
      const QueryImage& cond = cfg.infer.condition == "clean" ? img.query : img.degraded;

      GuidanceConfig g;
      g.enabled = guidance_on;
      g.rho_base = cfg.guidance.rho_base;
      g.normalized = cfg.guidance.normalized;
      g.sharpness = cfg.guidance.sharpness;
      g.line_ratio = cfg.guidance.line_ratio;
      g.target = observation_from_lines(project_axes(r.intrinsics, r.pose), intensity_centroid(img.triaxis));

      std::shared_ptr<const Denoiser> den = mlp;
      if (!den) {
        GaussianScoreField field{img.triaxis.data, Eigen::VectorXd::Constant(img.triaxis.size(), cfg.infer.analytic_var)};
        den = gaussian_denoiser(std::move(field), sched);
      }

      Rng rng(p.seed);
      const SampleResult s = sample(*den, cond, g, sched, opts, rng);
      for (const auto& e : s.log) {
        p.guidance_skipped += e.skipped;
        p.guidance_steps += 1;
      }
      if (cfg.infer.write_images) write_f32(out_dir / "images" / (r.id + ".f32"), s.image.data);
      if (cfg.infer.write_logs) write_sampling_log(out_dir / "logs" / (r.id + ".jsonl"), s.log);

      const AxisObservation obs = extract_axes_hard(s.image);
      p.pose = recover_pose(obs, r.intrinsics, LegRatios{}, r.pose.T.z());
    } catch (const Error& e) {
      if (e.code() == ErrorCode::IoError) {
        std::lock_guard<std::mutex> lock(io_mutex);
        io_errors.push_back(e.what());
      }
      p.pose.reset();
      p.failure = std::string(to_string(e.code()));
      p.failure_index = e.index();
      p.message = e.what();
    }
  };

  const int threads = resolve_threads(cfg.deterministic);
  if (threads <= 1) {
    for (std::size_t i = 0; i < records.size(); ++i) run_one(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (int w = 0; w < threads; ++w)
      pool.emplace_back([&] {
        for (std::size_t i; (i = next.fetch_add(1)) < records.size();) run_one(i);
      });
    for (auto& th : pool) th.join();
  }
  // A broken dataset is a runtime failure, not a per-record one.
  if (!io_errors.empty()) throw Error(ErrorCode::IoError, io_errors.front());

  InferResult res;
  res.split = split;
  res.guidance_on = guidance_on;
  res.records = std::move(out);
  std::string lines;
  for (const auto& p : res.records) {
    lines += record_json(p).dump() + "\n";
    if (!p.pose) ++res.failures[p.failure];
  }
  write_text(out_dir / kPredictionsFile, lines);
  const json summary = {{"split", split},
                        {"guidance_on", guidance_on},
                        {"denoiser", cfg.infer.denoiser},
                        {"condition", cfg.infer.condition},
                        {"n", res.records.size()},
                        {"failures", res.failures}};
  write_text(out_dir / kInferSummaryFile, summary.dump(2) + "\n");
  return res;
}

InferResult read_predictions(const fs::path& dir) {
  InferResult res;
  try {
    const json summary = json::parse(read_text(dir / kInferSummaryFile));
    res.split = summary.at("split").get<std::string>();
    res.guidance_on = summary.at("guidance_on").get<bool>();
    std::istringstream lines(read_text(dir / kPredictionsFile));
    for (std::string line; std::getline(lines, line);) {
      if (line.empty()) continue;
      res.records.push_back(record_from(json::parse(line)));
      if (!res.records.back().pose) ++res.failures[res.records.back().failure];
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::IoError, "malformed predictions in " + dir.string() + ": " + e.what());
  }
  return res;
}

}  // namespace axisforge
