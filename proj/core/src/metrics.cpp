#include "axisforge/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>

#include <json.hpp>

#include "axisforge/error.hpp"

namespace axisforge {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double median(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + mid, v.end());
  if (v.size() % 2 == 1) return v[mid];
  const double hi = v[mid];
  const double lo = *std::max_element(v.begin(), v.begin() + mid);
  return 0.5 * (lo + hi);
}

nlohmann::json num(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }
double num(const nlohmann::json& j) { return j.is_null() ? kInf : j.get<double>(); }

}  // namespace

ModelPoints ModelPoints::from_points(std::vector<Vec3> pts) {
  ModelPoints m;
  m.points = std::move(pts);
  for (std::size_t i = 0; i < m.points.size(); ++i)
    for (std::size_t j = i + 1; j < m.points.size(); ++j)
      m.diameter = std::max(m.diameter, (m.points[i] - m.points[j]).norm());
  m.validate();
  return m;
}

ModelPoints ModelPoints::cuboid(double h) {
  std::vector<Vec3> pts;
  for (int i = 0; i < 8; ++i) pts.emplace_back(i & 1 ? h : -h, i & 2 ? h : -h, i & 4 ? h : -h);
  for (int a = 0; a < 3; ++a) {
    pts.push_back(h * Vec3::Unit(a));
    pts.push_back(-h * Vec3::Unit(a));
  }
  return from_points(std::move(pts));
}

void ModelPoints::validate() const {
  if (points.size() < 8) throw Error(ErrorCode::InvalidArgument, "at least 8 model points required");
  if (!(diameter > 0.0)) throw Error(ErrorCode::InvalidArgument, "model diameter must be positive");
}

double add_metric(const Pose& gt, const Pose& pred, const ModelPoints& model) {
  double sum = 0.0;
  for (const Vec3& x : model.points) sum += ((gt.R * x + gt.T) - (pred.R * x + pred.T)).norm();
  return sum / static_cast<double>(model.points.size());
}

double reproj_metric(const Pose& gt, const Pose& pred, const ModelPoints& model, const CameraIntrinsics& K) {
  double sum = 0.0;
  for (const Vec3& x : model.points) sum += (project_point(K, gt, x) - project_point(K, pred, x)).norm();
  return sum / static_cast<double>(model.points.size());
}

double rotation_geodesic_deg(const Mat3& R1, const Mat3& R2) {
  const double c = std::clamp(((R1.transpose() * R2).trace() - 1.0) / 2.0, -1.0, 1.0);
  return std::acos(c) * 180.0 / M_PI;
}

MetricsSummary summarize(const std::vector<SampleMetrics>& records) {
  MetricsSummary s;
  s.n = records.size();
  std::vector<double> rot, tr, add, rep;
  std::size_t add_ok = 0, rep_ok = 0;
  for (const auto& r : records) {
    if (r.failed) ++s.n_failed;
    add_ok += r.add_pass;
    rep_ok += r.reproj_pass;
    rot.push_back(r.rotation_deg);
    tr.push_back(r.translation_err);
    add.push_back(r.add);
    rep.push_back(r.reproj_px);
  }
  if (s.n > 0) {
    s.add_rate = static_cast<double>(add_ok) / static_cast<double>(s.n);
    s.reproj_rate = static_cast<double>(rep_ok) / static_cast<double>(s.n);
  }
  s.median_rotation_deg = median(rot);
  s.median_translation_err = median(tr);
  s.median_add = median(add);
  s.median_reproj_px = median(rep);
  return s;
}

MetricsReport evaluate_suite(const std::vector<EvalRecord>& records, const ModelPoints& model,
                             const CameraIntrinsics& K, const Thresholds& th) {
  if (records.empty()) throw Error(ErrorCode::InvalidArgument, "no records to evaluate");
  model.validate();
  MetricsReport rep;
  for (const auto& rec : records) {
    SampleMetrics m;
    m.id = rec.id;
    if (!rec.pred) {
      m.failed = true;
      m.failure = rec.failure;
      m.rotation_deg = m.translation_err = m.add = m.reproj_px = kInf;
    } else {
      const Pose& p = *rec.pred;
      m.rotation_deg = rotation_geodesic_deg(rec.gt.R, p.R);
      m.translation_err = (rec.gt.T - p.T).norm();
      m.add = add_metric(rec.gt, p, model);
      try {
        m.reproj_px = reproj_metric(rec.gt, p, model, K);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::NonPositiveDepth) throw;
        m.reproj_px = kInf;
      }
      m.add_pass = passes(m.add, th.add_fraction * model.diameter);
      m.reproj_pass = passes(m.reproj_px, th.reproj_px);
    }
    rep.records.push_back(std::move(m));
  }
  rep.summary = summarize(rep.records);
  return rep;
}

void write_records_jsonl(std::ostream& os, const std::vector<SampleMetrics>& records) {
  for (const auto& r : records) {
    nlohmann::ordered_json j;
    j["id"] = r.id;
    j["failed"] = r.failed;
    j["failure"] = r.failure;
    j["rotation_deg"] = num(r.rotation_deg);
    j["translation_err"] = num(r.translation_err);
    j["add"] = num(r.add);
    j["reproj_px"] = num(r.reproj_px);
    j["add_pass"] = r.add_pass;
    j["reproj_pass"] = r.reproj_pass;
    os << j.dump() << '\n';
  }
}

std::vector<SampleMetrics> read_records_jsonl(std::istream& is) {
  std::vector<SampleMetrics> out;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto j = nlohmann::json::parse(line);
    SampleMetrics r;
    r.id = j.at("id").get<std::string>();
    r.failed = j.at("failed").get<bool>();
    r.failure = j.at("failure").get<std::string>();
    r.rotation_deg = num(j.at("rotation_deg"));
    r.translation_err = num(j.at("translation_err"));
    r.add = num(j.at("add"));
    r.reproj_px = num(j.at("reproj_px"));
    r.add_pass = j.at("add_pass").get<bool>();
    r.reproj_pass = j.at("reproj_pass").get<bool>();
    out.push_back(std::move(r));
  }
  return out;
}

void write_summary_csv(std::ostream& os, const MetricsSummary& s) {
  os << kSummaryColumns << '\n';
  os << s.n << ',' << s.n_failed << ',' << s.add_rate << ',' << s.reproj_rate << ',' << s.median_rotation_deg << ','
     << s.median_translation_err << ',' << s.median_add << ',' << s.median_reproj_px << '\n';
}

}  // namespace axisforge
