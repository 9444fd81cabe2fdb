#include "axisforge/pipeline/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "../binary_io.hpp"
#include "axisforge/error.hpp"
#include "json_util.hpp"

namespace axisforge {

using nlohmann::json;

namespace {

json intrinsics_json(const CameraIntrinsics& K) {
  return {{"fx", K.fx}, {"fy", K.fy}, {"gamma", K.gamma}, {"cx", K.cx},
          {"cy", K.cy}, {"width", K.width}, {"height", K.height}};
}

CameraIntrinsics intrinsics_from(const json& j) {
  CameraIntrinsics K;
  K.fx = j.at("fx").get<double>();
  K.fy = j.at("fy").get<double>();
  K.gamma = j.at("gamma").get<double>();
  K.cx = j.at("cx").get<double>();
  K.cy = j.at("cy").get<double>();
  K.width = j.at("width").get<int>();
  K.height = j.at("height").get<int>();
  return K;
}

json render_json(const RenderConfig& r) {
  return {{"size", r.size},
          {"thickness", r.thickness},
          {"axis_len", r.axis_len},
          {"depth_min", r.depth_min},
          {"depth_max", r.depth_max},
          {"lateral", r.lateral},
          {"min_axis_px", r.min_axis_px},
          {"min_line_separation_deg", r.min_line_separation_deg},
          {"occlusion_frac", r.occlusion_frac},
          {"noise_sigma", r.noise_sigma},
          {"blur_radius", r.blur_radius},
          {"write_ppm", r.write_ppm}};
}

RenderConfig render_from(const json& j) {
  RenderConfig r;
  r.size = j.at("size").get<int>();
  r.thickness = j.at("thickness").get<double>();
  r.axis_len = j.at("axis_len").get<double>();
  r.depth_min = j.at("depth_min").get<double>();
  r.depth_max = j.at("depth_max").get<double>();
  r.lateral = j.at("lateral").get<double>();
  r.min_axis_px = j.at("min_axis_px").get<double>();
  r.min_line_separation_deg = j.at("min_line_separation_deg").get<double>();
  r.occlusion_frac = j.at("occlusion_frac").get<double>();
  r.noise_sigma = j.at("noise_sigma").get<double>();
  r.blur_radius = j.at("blur_radius").get<double>();
  r.write_ppm = j.at("write_ppm").get<bool>();
  return r;
}

std::uint8_t to_byte(double v) {
  return static_cast<std::uint8_t>(std::floor(std::clamp(v, 0.0, 1.0) * 255.0 + 0.5));
}

void write_ppm_bytes(const std::filesystem::path& path, int w, int h, const std::vector<std::uint8_t>& rgb) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  os << "P6\n" << w << " " << h << "\n255\n";
  os.write(reinterpret_cast<const char*>(rgb.data()), static_cast<std::streamsize>(rgb.size()));
  if (!os) throw Error(ErrorCode::IoError, "failed writing " + path.string());
}

}  // namespace

std::vector<const DatasetRecord*> Manifest::split(const std::string& name) const {
  std::vector<const DatasetRecord*> out;
  for (const auto& r : records)
    if (r.split == name) out.push_back(&r);
  return out;
}

const DatasetRecord* Manifest::find(const std::string& id) const {
  for (const auto& r : records)
    if (r.id == id) return &r;
  return nullptr;
}

void write_manifest(const std::filesystem::path& path, const Manifest& m) {
  json recs = json::array();
  for (const auto& r : m.records) {
    recs.push_back({{"id", r.id},
                    {"split", r.split},
                    {"seed", r.seed},
                    {"pose", detail::pose_to_json(r.pose)},
                    {"intrinsics", intrinsics_json(r.intrinsics)},
                    {"query", r.query_path},
                    {"triaxis", r.triaxis_path},
                    {"degraded", r.degraded_path},
                    {"degradation",
                     {{"occlusion_frac", r.degradation.occlusion_frac},
                      {"noise_sigma", r.degradation.noise_sigma},
                      {"blur_radius", r.degradation.blur_radius},
                      {"seed", r.degradation.seed}}}});
  }
  const json doc = {{"schema_version", m.schema_version},
                    {"seed", m.seed},
                    {"render", render_json(m.render)},
                    {"records", recs}};
  write_text(path, doc.dump(2) + "\n");
}

Manifest read_manifest(const std::filesystem::path& path) {
  Manifest m;
  try {
    const json doc = json::parse(read_text(path));
    m.schema_version = doc.at("schema_version").get<int>();
    if (m.schema_version != kManifestSchemaVersion)
      throw Error(ErrorCode::IoError, "unsupported manifest schema_version " + std::to_string(m.schema_version));
    m.seed = doc.at("seed").get<std::uint64_t>();
    m.render = render_from(doc.at("render"));
    for (const auto& j : doc.at("records")) {
      DatasetRecord r;
      r.id = j.at("id").get<std::string>();
      r.split = j.at("split").get<std::string>();
      r.seed = j.at("seed").get<std::uint64_t>();
      r.pose = detail::pose_from_json(j.at("pose"));
      r.intrinsics = intrinsics_from(j.at("intrinsics"));
      r.query_path = j.at("query").get<std::string>();
      r.triaxis_path = j.at("triaxis").get<std::string>();
      r.degraded_path = j.at("degraded").get<std::string>();
      const auto& d = j.at("degradation");
      r.degradation.occlusion_frac = d.at("occlusion_frac").get<double>();
      r.degradation.noise_sigma = d.at("noise_sigma").get<double>();
      r.degradation.blur_radius = d.at("blur_radius").get<double>();
      r.degradation.seed = d.at("seed").get<std::uint64_t>();
      m.records.push_back(std::move(r));
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::IoError, "malformed manifest " + path.string() + ": " + e.what());
  }
  return m;
}

void write_f32(const std::filesystem::path& path, const Eigen::VectorXd& data) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  detail::put_f32s(os, data);
  if (!os) throw Error(ErrorCode::IoError, "failed writing " + path.string());
}

Eigen::VectorXd read_f32(const std::filesystem::path& path, Eigen::Index count) {
  std::error_code ec;
  const auto bytes = std::filesystem::file_size(path, ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot stat " + path.string());
  if (bytes != static_cast<std::uintmax_t>(count) * 4)
    throw Error(ErrorCode::IoError, path.string() + " holds " + std::to_string(bytes / 4) + " values, expected " +
                                        std::to_string(count));
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  return detail::get_f32s(is, count);
}

void write_ppm(const std::filesystem::path& path, const TriAxisImage& img) {
  std::vector<std::uint8_t> rgb(static_cast<std::size_t>(img.size()));
  for (Eigen::Index i = 0; i < img.size(); ++i) rgb[static_cast<std::size_t>(i)] = to_byte(img.data[i]);
  write_ppm_bytes(path, img.width, img.height, rgb);
}

void write_ppm(const std::filesystem::path& path, const QueryImage& img) {
  std::vector<std::uint8_t> rgb;
  rgb.reserve(static_cast<std::size_t>(img.size()) * 3);
  for (Eigen::Index i = 0; i < img.size(); ++i) rgb.insert(rgb.end(), 3, to_byte(img.data[i]));
  write_ppm_bytes(path, img.width, img.height, rgb);
}

LoadedRecord load_record(const std::filesystem::path& dir, const DatasetRecord& r) {
  const auto& K = r.intrinsics;
  const Eigen::Index px = static_cast<Eigen::Index>(K.width) * K.height;
  LoadedRecord out;
  out.triaxis = TriAxisImage(K.width, K.height, read_f32(dir / r.triaxis_path, px * 3));
  out.query = QueryImage(K.width, K.height, read_f32(dir / r.query_path, px));
  out.degraded = QueryImage(K.width, K.height, read_f32(dir / r.degraded_path, px));
  return out;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  os << text;
  if (!os) throw Error(ErrorCode::IoError, "failed writing " + path.string());
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

}  // namespace axisforge
