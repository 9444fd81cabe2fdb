#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "axisforge/camera.hpp"

namespace axisforge {

struct ModelPoints {
  std::vector<Vec3> points;
  double diameter = 0.0;

  static ModelPoints from_points(std::vector<Vec3> pts);
  // 8 corners and 6 face centers of the cube [-h, h]^3.
  static ModelPoints cuboid(double half_extent = 1.0);
  void validate() const;
};

// Mean distance between the model points under the two poses.
double add_metric(const Pose& gt, const Pose& pred, const ModelPoints& model);
// Mean pixel distance between the projected model points.
double reproj_metric(const Pose& gt, const Pose& pred, const ModelPoints& model, const CameraIntrinsics& K);
double rotation_geodesic_deg(const Mat3& R1, const Mat3& R2);

struct Thresholds {
  double add_fraction = 0.2;  // of the model diameter
  double reproj_px = 15.0;
};

// Pass flags use strict inequality.
inline bool passes(double value, double threshold) { return value < threshold; }

struct EvalRecord {
  std::string id;
  Pose gt;
  std::optional<Pose> pred;  // absent when the prediction failed or is missing
  std::string failure;       // error variant name when pred is absent
};

// Per-sample values are +inf for failed predictions.
struct SampleMetrics {
  std::string id;
  bool failed = false;
  std::string failure;
  double rotation_deg = 0.0;
  double translation_err = 0.0;
  double add = 0.0;
  double reproj_px = 0.0;
  bool add_pass = false;
  bool reproj_pass = false;
};

struct MetricsSummary {
  std::size_t n = 0;
  std::size_t n_failed = 0;
  double add_rate = 0.0;
  double reproj_rate = 0.0;
  double median_rotation_deg = 0.0;
  double median_translation_err = 0.0;
  double median_add = 0.0;
  double median_reproj_px = 0.0;
};

struct MetricsReport {
  std::vector<SampleMetrics> records;
  MetricsSummary summary;
};

MetricsSummary summarize(const std::vector<SampleMetrics>& records);

MetricsReport evaluate_suite(const std::vector<EvalRecord>& records, const ModelPoints& model,
                             const CameraIntrinsics& K, const Thresholds& thresholds = {});

// One JSON object per record per line.
void write_records_jsonl(std::ostream& os, const std::vector<SampleMetrics>& records);
std::vector<SampleMetrics> read_records_jsonl(std::istream& is);

// Header line then one row, columns in kSummaryColumns order.
inline constexpr const char* kSummaryColumns =
    "n,n_failed,add_rate,reproj_rate,median_rotation_deg,median_translation_err,median_add,median_reproj_px";
void write_summary_csv(std::ostream& os, const MetricsSummary& s);

}  // namespace axisforge
