#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

#include "axisforge/error.hpp"
#include "axisforge/pipeline/commands.hpp"

namespace axisforge {

using nlohmann::ordered_json;

namespace {

ordered_json num(double v) { return std::isfinite(v) ? ordered_json(v) : ordered_json(nullptr); }

ordered_json summary_json(const MetricsSummary& s) {
  return {{"n", s.n},
          {"n_failed", s.n_failed},
          {"add_rate", s.add_rate},
          {"reproj_rate", s.reproj_rate},
          {"median_rotation_deg", num(s.median_rotation_deg)},
          {"median_translation_err", num(s.median_translation_err)},
          {"median_add", num(s.median_add)},
          {"median_reproj_px", num(s.median_reproj_px)}};
}

// Metrics for every record of the predicted split, in manifest order.
MetricsReport evaluate_run(const RunConfig& cfg, const InferResult& run, const Manifest& m,
                           std::vector<std::string>& missing) {
  std::unordered_map<std::string, const PredictionRecord*> by_id;
  for (const auto& p : run.records) {
    if (!m.find(p.id)) throw Error(ErrorCode::InvalidArgument, "prediction " + p.id + " is not in the dataset");
    by_id[p.id] = &p;
  }
  const ModelPoints model = ModelPoints::cuboid(cfg.eval.half_extent);
  MetricsReport rep;
  for (const DatasetRecord* r : m.split(run.split)) {
    EvalRecord e;
    e.id = r->id;
    e.gt = r->pose;
    const auto it = by_id.find(r->id);
    if (it == by_id.end()) {
      missing.push_back(r->id);
      e.failure = std::string(to_string(ErrorCode::MissingPrediction));
    } else {
      e.pred = it->second->pose;
      e.failure = it->second->failure;
    }
    const CameraIntrinsics K = r->intrinsics.rescaled(cfg.eval.reference_size, cfg.eval.reference_size);
    rep.records.push_back(evaluate_suite({e}, model, K, cfg.eval.thresholds).records.front());
  }
  if (rep.records.empty()) throw Error(ErrorCode::InvalidArgument, "dataset has no '" + run.split + "' records");
  rep.summary = summarize(rep.records);
  return rep;
}

double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

PairedDelta pair(const MetricsReport& run, const MetricsReport& base) {
  std::unordered_map<std::string, const SampleMetrics*> by_id;
  for (const auto& r : base.records) by_id[r.id] = &r;
  PairedDelta d;
  std::vector<double> rot_delta;
  for (const auto& a : run.records) {
    const auto it = by_id.find(a.id);
    if (it == by_id.end()) continue;
    const SampleMetrics& b = *it->second;
    ++d.n;
    if (a.reproj_pass && b.reproj_pass) ++d.both;
    else if (a.reproj_pass) ++d.only_run;
    else if (b.reproj_pass) ++d.only_baseline;
    else ++d.neither;
    if (std::isfinite(a.rotation_deg) && std::isfinite(b.rotation_deg)) rot_delta.push_back(a.rotation_deg - b.rotation_deg);
  }
  d.reproj_rate_delta = run.summary.reproj_rate - base.summary.reproj_rate;
  d.add_rate_delta = run.summary.add_rate - base.summary.add_rate;
  d.median_rotation_delta_deg = rot_delta.empty() ? NAN : median_of(rot_delta);
  return d;
}

}  // namespace

EvalResult cmd_eval(const RunConfig& cfg, const fs::path& predictions_dir, const fs::path& dataset_dir,
                    const fs::path& out_dir, const std::optional<fs::path>& baseline_dir) {
  cfg.validate();
  const Manifest m = read_manifest(dataset_dir / kManifestFile);
  const InferResult run = read_predictions(predictions_dir);

  EvalResult res;
  res.report = evaluate_run(cfg, run, m, res.missing);
  for (const auto& r : res.report.records)
    if (r.failed) ++res.failures[r.failure];
  if (baseline_dir) {
    std::vector<std::string> base_missing;
    res.baseline = evaluate_run(cfg, read_predictions(*baseline_dir), m, base_missing);
    res.paired = pair(res.report, *res.baseline);
  }

  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot create " + out_dir.string());
  std::ostringstream jsonl, csv;
  write_records_jsonl(jsonl, res.report.records);
  write_summary_csv(csv, res.report.summary);
  write_text(out_dir / "metrics.jsonl", jsonl.str());
  write_text(out_dir / "summary.csv", csv.str());

  ordered_json doc;
  doc["split"] = run.split;
  doc["guidance_on"] = run.guidance_on;
  doc["summary"] = summary_json(res.report.summary);
  doc["missing"] = res.missing;
  doc["failures"] = res.failures;
  if (res.paired) {
    const PairedDelta& d = *res.paired;
    doc["baseline_summary"] = summary_json(res.baseline->summary);
    doc["paired_delta"] = {{"n", d.n},
                           {"both_pass", d.both},
                           {"only_run", d.only_run},
                           {"only_baseline", d.only_baseline},
                           {"neither", d.neither},
                           {"reproj_rate_delta", d.reproj_rate_delta},
                           {"add_rate_delta", d.add_rate_delta},
                           {"median_rotation_delta_deg", num(d.median_rotation_delta_deg)}};
  }
  write_text(out_dir / kReportFile, doc.dump(2) + "\n");
  return res;
}

}  // namespace axisforge
