#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "axisforge/diffusion/mlp.hpp"
#include "axisforge/metrics.hpp"
#include "axisforge/pipeline/config.hpp"
#include "axisforge/pipeline/dataset.hpp"

namespace axisforge {

namespace fs = std::filesystem;

inline constexpr const char* kCheckpointFile = "model.ckpt";
inline constexpr const char* kTrainLogFile = "train_log.jsonl";
inline constexpr const char* kPredictionsFile = "predictions.jsonl";
inline constexpr const char* kInferSummaryFile = "infer.json";
inline constexpr const char* kReportFile = "report.json";

// Samples cfg.dataset.n_train + n_test poses and writes the clean query,
// tri-axis and degraded query of each under out_dir/images, plus the manifest.
Manifest cmd_render_dataset(const RunConfig& cfg, const fs::path& out_dir);

// Training samples for one split, conditioned on the clean or degraded query.
std::vector<TrainingSample> load_training_set(const fs::path& dataset_dir, const Manifest& m,
                                              const std::string& split, const std::string& condition);

struct TrainResult {
  std::vector<TrainLogEntry> log;
  fs::path checkpoint;
};

// Writes out_dir/model.ckpt (with optimizer state) and out_dir/train_log.jsonl.
// With `resume`, continues from that checkpoint for cfg.train.opt.steps more steps.
TrainResult cmd_train(const RunConfig& cfg, const fs::path& dataset_dir, const fs::path& out_dir,
                      const std::optional<fs::path>& resume = std::nullopt,
                      const std::function<void(const TrainLogEntry&)>& on_log = {});

struct PredictionRecord {
  std::string id;
  std::uint64_t seed = 0;
  std::optional<Pose> pose;
  std::string failure;  // error variant name
  int failure_index = -1;
  std::string message;
  int guidance_skipped = 0;
  int guidance_steps = 0;
};

struct InferResult {
  std::string split;
  bool guidance_on = false;
  std::vector<PredictionRecord> records;
  std::map<std::string, int> failures;  // count per error variant
};

// Samples a tri-axis image per record of `split`, extracts axes and recovers
// the pose with the ground-truth depth as scale. Per-record failures are
// recorded and never abort the run. Writes predictions.jsonl, infer.json and,
// when enabled, images/<id>.f32 and logs/<id>.jsonl. `checkpoint` is ignored
// in analytic mode.
InferResult cmd_infer(const RunConfig& cfg, const std::optional<fs::path>& checkpoint, const fs::path& dataset_dir,
                      const std::string& split, bool guidance_on, const fs::path& out_dir);

// Reads predictions.jsonl and infer.json from a cmd_infer output directory.
InferResult read_predictions(const fs::path& dir);

struct PairedDelta {
  std::size_t n = 0;
  std::size_t both = 0;           // reproj pass in both runs
  std::size_t only_run = 0;       // pass here, fail in baseline
  std::size_t only_baseline = 0;  // fail here, pass in baseline
  std::size_t neither = 0;
  double reproj_rate_delta = 0.0;
  double add_rate_delta = 0.0;
  double median_rotation_delta_deg = 0.0;
};

struct EvalResult {
  MetricsReport report;
  std::vector<std::string> missing;
  std::map<std::string, int> failures;
  std::optional<MetricsReport> baseline;
  std::optional<PairedDelta> paired;
};

// Evaluates every record of the predicted split; missing predictions count as
// failures with variant MissingPrediction. Writes metrics.jsonl, summary.csv
// and report.json into out_dir.
EvalResult cmd_eval(const RunConfig& cfg, const fs::path& predictions_dir, const fs::path& dataset_dir,
                    const fs::path& out_dir, const std::optional<fs::path>& baseline_dir = std::nullopt);

struct OracleResult {
  std::string name;
  std::string criterion;  // what is compared, e.g. "max rotation error < 1e-6 rad"
  double measured = 0.0;
  double tolerance = 0.0;
  bool passed = false;
  double seconds = 0.0;
};

struct OracleReport {
  std::vector<OracleResult> results;
  double seconds = 0.0;

  bool all_passed() const;
};

// Runs the geometry, extraction, analytic-diffusion, training smoke and
// pipeline oracles. Each result carries its tolerance and measured value.
OracleReport cmd_oracle(const RunConfig& cfg, const std::function<void(const OracleResult&)>& on_result = {});

std::string oracle_report_json(const OracleReport& r);

}  // namespace axisforge
