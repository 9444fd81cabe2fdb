#include <cstdio>

#include "axisforge/error.hpp"
#include "axisforge/pipeline/commands.hpp"
#include "axisforge/pose_sampler.hpp"
#include "axisforge/render.hpp"

namespace axisforge {

namespace {

std::string record_id(const std::string& split, int i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s_%05d", split.c_str(), i);
  return buf;
}

void make_dir(const fs::path& p) {
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot create " + p.string() + ": " + ec.message());
}

}  // namespace

Manifest cmd_render_dataset(const RunConfig& cfg, const fs::path& out_dir) {
  cfg.validate();
  make_dir(out_dir / "images");
  if (cfg.render.write_ppm) make_dir(out_dir / "preview");

  const CameraIntrinsics K = cfg.render.intrinsics();
  const PoseSamplerConfig sampler = cfg.render.sampler();
  Rng rng(cfg.seed);

  Manifest m;
  m.render = cfg.render;
  m.seed = cfg.seed;
  for (const auto& [split, n] : {std::pair<std::string, int>{"train", cfg.dataset.n_train},
                                 std::pair<std::string, int>{"test", cfg.dataset.n_test}}) {
    for (int i = 0; i < n; ++i) {
      DatasetRecord r;
      r.id = record_id(split, i);
      r.split = split;
      r.seed = record_seed(cfg.seed, r.id);
      r.pose = sample_pose(rng, K, sampler);
      r.intrinsics = K;
      r.degradation = {cfg.render.occlusion_frac, cfg.render.noise_sigma, cfg.render.blur_radius, r.seed};
      r.query_path = "images/" + r.id + "_query.f32";
      r.triaxis_path = "images/" + r.id + "_triaxis.f32";
      r.degraded_path = "images/" + r.id + "_degraded.f32";

      const TriAxisImage tri = render_triaxis(K, r.pose, cfg.render.axis_len, cfg.render.thickness);
      const QueryImage query = render_query(K, r.pose);
      const QueryImage degraded = apply_degradation(query, r.degradation);
      write_f32(out_dir / r.triaxis_path, tri.data);
      write_f32(out_dir / r.query_path, query.data);
      write_f32(out_dir / r.degraded_path, degraded.data);
      if (cfg.render.write_ppm) {
        write_ppm(out_dir / "preview" / (r.id + "_triaxis.ppm"), tri);
        write_ppm(out_dir / "preview" / (r.id + "_query.ppm"), query);
        write_ppm(out_dir / "preview" / (r.id + "_degraded.ppm"), degraded);
      }
      m.records.push_back(std::move(r));
    }
  }
  write_manifest(out_dir / kManifestFile, m);
  return m;
}

}  // namespace axisforge
