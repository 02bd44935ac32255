#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "hvio/align.hpp"
#include "hvio/dataset.hpp"
#include "hvio/evalkit.hpp"
#include "hvio/fusion.hpp"
#include "hvio/keyvalue.hpp"
#include "hvio/simsynth.hpp"

namespace hvio {

/// Everything a tracking run needs, loaded from one flat config file.
struct RunConfig {
  std::filesystem::path dataset;
  std::filesystem::path output_dir = "out";
  AlignConfig align;
  PixelSelection pixels;
  NoiseConfig noise;
  std::optional<Extrinsics> extrinsics;  ///< overrides the dataset manifest when set
  double var_v = 0.25;
  double var_d = 0.01;
  double var_b = 0.01;
  FilterOptions filter;
  bool velocity_prior = true;  ///< seed the translation prior with v * dt / d

  /// Relative paths resolve against `base_dir`. Unknown keys and bad values throw ConfigError.
  static RunConfig from_keyvalue(const KeyValueFile& kv, const std::filesystem::path& base_dir);
  static RunConfig load(const std::filesystem::path& path);
  KeyValueFile to_keyvalue() const;
};

/// Scenario files share the key = value format. `preset = name` selects a base preset.
ScenarioSpec scenario_from_keyvalue(const KeyValueFile& kv);
KeyValueFile scenario_to_keyvalue(const ScenarioSpec& spec);
/// Accepts a preset name or a path to a scenario file.
ScenarioSpec load_scenario(const std::string& preset_or_path);

struct FrameDiagnostics {
  std::size_t frame = 0;
  double timestamp = 0.0;
  AlignResult align;
  bool range_available = false;
  bool gate_accepted = false;
  double align_seconds = 0.0;  ///< wall clock, excluded from the diagnostics CSV
};

struct TrackRow {
  double timestamp = 0.0;
  Eigen::Vector3d v_camera = Eigen::Vector3d::Zero();
  Eigen::Vector3d v_body = Eigen::Vector3d::Zero();
  double d = 0.0;
  Eigen::Vector3d bias = Eigen::Vector3d::Zero();
  double trace_cov = 0.0;
  bool converged = false;
  bool accepted = false;
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  Eigen::Matrix3d attitude = Eigen::Matrix3d::Identity();
};

/// Metrics where some entries may be undefined (NaN) for short or stationary runs.
struct RunMetrics {
  MetricReport report;
  std::vector<std::string> notes;  ///< why a metric is NaN
};

struct TrackOutput {
  std::vector<TrackRow> rows;  ///< one per frame from the second frame on
  std::vector<FrameDiagnostics> diagnostics;
  std::optional<RunMetrics> metrics;  ///< present when ground truth is available
  bool distance_clamped = false;
};

/// Aligns every consecutive frame pair, fuses with the EKF, dead-reckons and evaluates.
TrackOutput run_tracking(const Dataset& data, const RunConfig& cfg);

/// Metrics for rows against ground truth; undefined entries become NaN with a note.
RunMetrics evaluate_rows(const std::vector<TrackRow>& rows,
                         const std::vector<GroundTruthSample>& truth);

TrajectoryTrack track_from_rows(const std::vector<TrackRow>& rows);
TrajectoryTrack track_from_truth(const std::vector<GroundTruthSample>& truth);

void write_track_csv(const std::filesystem::path& path, const std::vector<TrackRow>& rows);
std::vector<TrackRow> read_track_csv(const std::filesystem::path& path);
void write_diagnostics_csv(const std::filesystem::path& path,
                           const std::vector<FrameDiagnostics>& diagnostics);
void write_metrics_csv(const std::filesystem::path& path, const MetricReport& m);
std::string format_metrics_table(const RunMetrics& m);

/// Writes track.csv, diagnostics.csv and (with ground truth) metrics.csv into cfg.output_dir.
void write_outputs(const TrackOutput& out, const std::filesystem::path& dir);

struct BenchReport {
  double mean_hz = 0.0;
  double sigma_hz = 0.0;
  double min_hz = 0.0;
  double max_hz = 0.0;
  std::vector<std::size_t> frames_processed;  ///< per repetition
};

/// Per-frame alignment rate statistics over `reps` runs. Needs at least 100 frames.
BenchReport run_bench(const Dataset& data, const RunConfig& cfg, int reps);

}  // namespace hvio
