// hvio command-line tool: generate, track, bench, metrics.
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "hvio/pipeline.hpp"

namespace fs = std::filesystem;

namespace {

int cmd_generate(const std::string& spec_arg, const std::string& out_arg,
                 const std::optional<std::uint64_t>& seed) {
  hvio::ScenarioSpec spec = hvio::load_scenario(spec_arg);
  if (seed) {
    spec.seed = *seed;
  }
  const fs::path out = out_arg.empty() ? fs::path(spec.name) : fs::path(out_arg);
  hvio::write_dataset(spec, out);
  std::printf("wrote %s (%zu frames)\n", out.string().c_str(),
              hvio::sample_count(spec.duration, spec.image_rate));
  return 0;
}

int cmd_track(const std::string& config) {
  const hvio::RunConfig cfg = hvio::RunConfig::load(config);
  const hvio::Dataset data = hvio::load_dataset(cfg.dataset);
  const hvio::TrackOutput out = hvio::run_tracking(data, cfg);
  hvio::write_outputs(out, cfg.output_dir);
  std::printf("tracked %zu frames -> %s\n", out.rows.size(), cfg.output_dir.string().c_str());
  if (out.metrics) {
    std::cout << hvio::format_metrics_table(*out.metrics);
  } else {
    std::cout << "no ground truth; metrics omitted\n";
  }
  return 0;
}

int cmd_bench(const std::string& config, int reps) {
  const hvio::RunConfig cfg = hvio::RunConfig::load(config);
  const hvio::Dataset data = hvio::load_dataset(cfg.dataset);
  const hvio::BenchReport r = hvio::run_bench(data, cfg, reps);
  std::printf("mean,sigma,min,max\n%.3f,%.3f,%.3f,%.3f\n", r.mean_hz, r.sigma_hz, r.min_hz,
              r.max_hz);
  std::printf("frames per repetition:");
  for (auto n : r.frames_processed) {
    std::printf(" %zu", n);
  }
  std::printf("\n");
  return 0;
}

int cmd_metrics(const std::string& est, const std::string& gt, const std::string& out) {
  const auto rows = hvio::read_track_csv(est);
  const auto truth = hvio::read_groundtruth_csv(gt);
  const hvio::RunMetrics m = hvio::evaluate_rows(rows, truth);
  if (!out.empty()) {
    hvio::write_metrics_csv(out, m.report);
  }
  std::cout << hvio::format_metrics_table(m);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Downward-facing visual-inertial odometry toolkit"};
  app.require_subcommand(1);

  std::string spec_arg;
  std::string out_arg;
  std::uint64_t seed = 0;
  auto* gen = app.add_subcommand("generate", "Render a synthetic dataset from a preset or spec file");
  gen->add_option("spec", spec_arg, "preset name or scenario file")->required();
  gen->add_option("--out,-o", out_arg, "output directory (default: scenario name)");
  auto* seed_opt = gen->add_option("--seed", seed, "override the scenario seed");

  std::string config;
  auto* track = app.add_subcommand("track", "Run tracker + filter on a dataset");
  track->add_option("config", config, "run configuration file")->required();

  int reps = 3;
  auto* bench = app.add_subcommand("bench", "Time the alignment stage");
  bench->add_option("config", config, "run configuration file")->required();
  bench->add_option("--reps", reps, "repetitions")->check(CLI::PositiveNumber);

  std::string est;
  std::string gt;
  std::string metrics_out;
  auto* metrics = app.add_subcommand("metrics", "Evaluate a track CSV against ground truth");
  metrics->add_option("estimate", est, "track CSV")->required();
  metrics->add_option("groundtruth", gt, "groundtruth CSV")->required();
  metrics->add_option("--out", metrics_out, "also write a single-row metrics CSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (gen->parsed()) {
      return cmd_generate(spec_arg, out_arg,
                          seed_opt->count() ? std::optional<std::uint64_t>(seed) : std::nullopt);
    }
    if (track->parsed()) {
      return cmd_track(config);
    }
    if (bench->parsed()) {
      return cmd_bench(config, reps);
    }
    if (metrics->parsed()) {
      return cmd_metrics(est, gt, metrics_out);
    }
  } catch (const hvio::ConfigError& e) {
    std::fprintf(stderr, "configuration error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 1;
}
