#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "axisforge/error.hpp"
#include "axisforge/pipeline/commands.hpp"

namespace af = axisforge;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;
constexpr int kExitOracle = 3;

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  bool deterministic = false;
  std::string out;
};

void add_common(CLI::App* sub, Common& c, bool needs_out) {
  sub->add_option("--config", c.config, "JSON run configuration")->check(CLI::ExistingFile);
  sub->add_option("--seed", c.seed, "global seed (overrides config)");
  sub->add_flag("--deterministic", c.deterministic, "single-threaded execution");
  auto* out = sub->add_option("--out", c.out, "output directory");
  if (needs_out) out->required();
}

// Usage errors: the configuration itself is unusable.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

af::RunConfig resolve(const Common& c) {
  af::RunConfig cfg;
  try {
    if (!c.config.empty()) cfg = af::load_config(c.config);
    if (c.seed) cfg.seed = *c.seed;
    if (c.deterministic) cfg.deterministic = true;
    cfg.validate();
  } catch (const af::Error& e) {
    throw UsageError(e.what());
  }
  return cfg;
}

void print_summary(const af::MetricsSummary& s) {
  std::printf("n=%zu failed=%zu reproj_rate=%.4f add_rate=%.4f median_rot=%.3f deg\n", s.n, s.n_failed,
              s.reproj_rate, s.add_rate, s.median_rotation_deg);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"axisforge: tri-axis diffusion pose pipeline"};
  app.footer("Exit codes: 0 success, 1 usage, 2 runtime failure, 3 oracle failure.\n"
             "AXISFORGE_THREADS caps the worker count.");
  app.require_subcommand(1);

  Common common;
  std::string dataset, checkpoint, split = "test", predictions, baseline, resume;
  std::optional<int> n_train, n_test, steps;
  std::optional<double> rho;
  bool guidance = false, json_report = false;

  auto* render = app.add_subcommand("render-dataset", "render poses, tri-axis targets and queries");
  add_common(render, common, true);
  render->add_option("--n-train", n_train, "training records")->check(CLI::PositiveNumber);
  render->add_option("--n-test", n_test, "test records")->check(CLI::PositiveNumber);

  auto* train = app.add_subcommand("train", "train the denoiser");
  add_common(train, common, true);
  train->add_option("--dataset", dataset, "dataset directory")->required()->check(CLI::ExistingDirectory);
  train->add_option("--resume", resume, "checkpoint to continue from")->check(CLI::ExistingFile);
  train->add_option("--steps", steps, "optimizer steps")->check(CLI::PositiveNumber);

  auto* infer = app.add_subcommand("infer", "sample tri-axis images and recover poses");
  add_common(infer, common, true);
  infer->add_option("--dataset", dataset, "dataset directory")->required()->check(CLI::ExistingDirectory);
  infer->add_option("--checkpoint", checkpoint, "model checkpoint")->check(CLI::ExistingFile);
  infer->add_option("--split", split, "dataset split")->capture_default_str();
  infer->add_flag("--guidance", guidance, "enable geometric guidance");
  infer->add_option("--rho", rho, "guidance base step size");

  auto* eval = app.add_subcommand("eval", "score predictions against the dataset");
  add_common(eval, common, true);
  eval->add_option("--dataset", dataset, "dataset directory")->required()->check(CLI::ExistingDirectory);
  eval->add_option("--predictions", predictions, "infer output directory")->required()->check(CLI::ExistingDirectory);
  eval->add_option("--baseline", baseline, "second infer output for a paired comparison")
      ->check(CLI::ExistingDirectory);
  eval->footer(std::string("Writes metrics.jsonl, report.json and summary.csv with columns:\n  ") + af::kSummaryColumns);

  auto* oracle = app.add_subcommand("oracle", "run the oracle property suite");
  add_common(oracle, common, false);
  oracle->add_flag("--json", json_report, "print the report as JSON");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  try {
    af::RunConfig cfg = resolve(common);
    if (n_train) cfg.dataset.n_train = *n_train;
    if (n_test) cfg.dataset.n_test = *n_test;
    if (steps) cfg.train.opt.steps = *steps;
    if (rho) cfg.guidance.rho_base = *rho;
    try {
      cfg.validate();
    } catch (const af::Error& e) {
      throw UsageError(e.what());
    }

    if (*render) {
      const auto m = af::cmd_render_dataset(cfg, common.out);
      std::printf("wrote %zu records to %s\n", m.records.size(), common.out.c_str());
    } else if (*train) {
      const auto res = af::cmd_train(cfg, dataset, common.out,
                                     resume.empty() ? std::nullopt : std::optional<af::fs::path>(resume),
                                     [](const af::TrainLogEntry& e) {
                                       std::printf("step %zu loss %.6f running %.6f\n", static_cast<std::size_t>(e.step), e.loss, e.running);
                                       std::fflush(stdout);
                                     });
      std::printf("checkpoint %s\n", res.checkpoint.c_str());
    } else if (*infer) {
      const auto res = af::cmd_infer(cfg, checkpoint.empty() ? std::nullopt : std::optional<af::fs::path>(checkpoint),
                                     dataset, split, guidance, common.out);
      std::size_t failed = 0;
      for (const auto& [variant, count] : res.failures) {
        std::printf("  %s: %d\n", variant.c_str(), count);
        failed += static_cast<std::size_t>(count);
      }
      std::printf("%zu records, %zu failed\n", res.records.size(), failed);
    } else if (*eval) {
      const auto res = af::cmd_eval(cfg, predictions, dataset, common.out,
                                    baseline.empty() ? std::nullopt : std::optional<af::fs::path>(baseline));
      print_summary(res.report.summary);
      if (!res.missing.empty()) std::printf("missing predictions: %zu\n", res.missing.size());
      if (res.paired) {
        const auto& d = *res.paired;
        std::printf("baseline: ");
        print_summary(res.baseline->summary);
        std::printf("paired n=%zu both=%zu only_run=%zu only_baseline=%zu reproj_delta=%+.4f\n", d.n, d.both,
                    d.only_run, d.only_baseline, d.reproj_rate_delta);
      }
    } else if (*oracle) {
      const auto rep = af::cmd_oracle(cfg, [&](const af::OracleResult& r) {
        if (json_report) return;
        std::printf("%s %-30s measured=%-12.4g tol=%-10.4g %.2fs  %s\n", r.passed ? "PASS" : "FAIL", r.name.c_str(),
                    r.measured, r.tolerance, r.seconds, r.criterion.c_str());
        std::fflush(stdout);
      });
      const std::string report = af::oracle_report_json(rep);
      if (json_report) std::fputs(report.c_str(), stdout);
      else std::printf("%s in %.1fs\n", rep.all_passed() ? "all oracles passed" : "ORACLE FAILURES", rep.seconds);
      if (!common.out.empty()) {
        std::error_code ec;
        af::fs::create_directories(common.out, ec);
        af::write_text(af::fs::path(common.out) / "oracle.json", report);
      }
      return rep.all_passed() ? kExitOk : kExitOracle;
    }
  } catch (const UsageError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUsage;
  } catch (const af::Error& e) {
    std::fprintf(stderr, "error [%s]: %s\n", std::string(af::to_string(e.code())).c_str(), e.what());
    return kExitRuntime;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitRuntime;
  }
  return kExitOk;
}
