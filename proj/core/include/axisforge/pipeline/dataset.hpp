#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "axisforge/camera.hpp"
#include "axisforge/image.hpp"
#include "axisforge/pipeline/config.hpp"
#include "axisforge/render.hpp"

namespace axisforge {

inline constexpr int kManifestSchemaVersion = 1;
inline constexpr const char* kManifestFile = "manifest.json";

struct DatasetRecord {
  std::string id;
  std::string split;  // "train" or "test"
  Pose pose;
  CameraIntrinsics intrinsics;
  // Relative to the dataset directory.
  std::string query_path;
  std::string triaxis_path;
  std::string degraded_path;
  DegradationSpec degradation;
  std::uint64_t seed = 0;
};

struct Manifest {
  int schema_version = kManifestSchemaVersion;
  RenderConfig render;
  std::uint64_t seed = 0;
  std::vector<DatasetRecord> records;

  std::vector<const DatasetRecord*> split(const std::string& name) const;
  const DatasetRecord* find(const std::string& id) const;
};

void write_manifest(const std::filesystem::path& path, const Manifest& m);
Manifest read_manifest(const std::filesystem::path& path);

// Flat little-endian float32, row-major, channel-interleaved.
void write_f32(const std::filesystem::path& path, const Eigen::VectorXd& data);
// Throws IoError when the file does not hold exactly `count` values.
Eigen::VectorXd read_f32(const std::filesystem::path& path, Eigen::Index count);

// Binary PPM (P6); single-channel images are replicated to gray.
void write_ppm(const std::filesystem::path& path, const TriAxisImage& img);
void write_ppm(const std::filesystem::path& path, const QueryImage& img);

struct LoadedRecord {
  TriAxisImage triaxis;
  QueryImage query;
  QueryImage degraded;
};

// Reads a record's images, checking them against the declared intrinsics.
LoadedRecord load_record(const std::filesystem::path& dataset_dir, const DatasetRecord& r);

// Writes the whole string, throwing IoError on failure.
void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

}  // namespace axisforge
