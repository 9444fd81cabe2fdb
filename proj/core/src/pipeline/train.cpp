#include <fstream>

#include <json.hpp>

#include "axisforge/error.hpp"
#include "axisforge/extraction.hpp"
#include "axisforge/pipeline/commands.hpp"

namespace axisforge {

std::vector<TrainingSample> load_training_set(const fs::path& dataset_dir, const Manifest& m,
                                              const std::string& split, const std::string& condition) {
  std::vector<TrainingSample> data;
  for (const DatasetRecord* r : m.split(split)) {
    LoadedRecord img = load_record(dataset_dir, *r);
    TrainingSample s;
    s.cond = condition == "degraded" ? std::move(img.degraded) : std::move(img.query);
    s.target = observation_from_lines(project_axes(r->intrinsics, r->pose), intensity_centroid(img.triaxis));
    s.x0 = std::move(img.triaxis);
    data.push_back(std::move(s));
  }
  if (data.empty()) throw Error(ErrorCode::InvalidArgument, "dataset has no '" + split + "' records");
  return data;
}

TrainResult cmd_train(const RunConfig& cfg, const fs::path& dataset_dir, const fs::path& out_dir,
                      const std::optional<fs::path>& resume,
                      const std::function<void(const TrainLogEntry&)>& on_log) {
  cfg.validate();
  const Manifest m = read_manifest(dataset_dir / kManifestFile);
  if (m.render.size != cfg.render.size)
    throw Error(ErrorCode::InvalidArgument, "dataset resolution does not match render.size");
  const std::vector<TrainingSample> data = load_training_set(dataset_dir, m, "train", cfg.train.condition);
  const DiffusionSchedule sched = cfg.schedule.make();
  OptimizerConfig opt = cfg.train.opt;
  opt.threads = resolve_threads(cfg.deterministic, opt.threads);

  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot create " + out_dir.string());

  std::optional<Trainer> trainer;
  Rng rng(record_seed(cfg.seed, "train"));
  if (resume) {
    const Checkpoint ck = load_checkpoint(*resume);
    check_compatible(ck, cfg.arch(), sched);
    AdamState adam = ck.adam;
    if (!ck.has_optimizer) {
      adam.m = adam.v = Eigen::VectorXd::Zero(ck.params.size());
      adam.step = 0;
    }
    // A fresh stream per resume point keeps resumed runs reproducible.
    rng.seed(record_seed(cfg.seed, "train@" + std::to_string(adam.step)));
    trainer.emplace(model_from_checkpoint(ck), std::move(adam), opt, sched);
  } else {
    trainer.emplace(MlpDenoiser(cfg.arch(), sched, fit_pixel_prior(data, cfg.train.var_floor), rng), opt, sched);
  }

  const fs::path log_path = out_dir / kTrainLogFile;
  std::ofstream log(log_path, resume ? std::ios::app : std::ios::trunc);
  if (!log) throw Error(ErrorCode::IoError, "cannot write " + log_path.string());

  TrainResult out;
  out.log = trainer->run(data, rng, [&](const TrainLogEntry& e) {
    log << nlohmann::json{{"step", e.step}, {"loss", e.loss}, {"running", e.running}}.dump() << "\n";
    log.flush();
    if (on_log) on_log(e);
  });
  if (!log) throw Error(ErrorCode::IoError, "failed writing " + log_path.string());

  out.checkpoint = out_dir / kCheckpointFile;
  save_checkpoint(out.checkpoint, make_checkpoint(trainer->model(), sched, &trainer->state()));
  return out;
}

}  // namespace axisforge
