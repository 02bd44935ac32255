#pragma once

#include <vector>

#include <Eigen/Core>

#include "hvio/common.hpp"
#include "hvio/sensors.hpp"

namespace hvio {

struct PoseSample {
  double timestamp = 0.0;
  Eigen::Vector3d position = Eigen::Vector3d::Zero();      ///< world, m
  Eigen::Matrix3d attitude = Eigen::Matrix3d::Identity();  ///< body -> world
  Eigen::Vector3d velocity = Eigen::Vector3d::Zero();      ///< body frame, m/s
};

/// Timestamp-sorted track. Throws StreamError unless timestamps strictly increase.
class TrajectoryTrack {
 public:
  TrajectoryTrack() = default;
  explicit TrajectoryTrack(std::vector<PoseSample> samples);

  const std::vector<PoseSample>& samples() const { return samples_; }
  std::size_t size() const { return samples_.size(); }
  bool empty() const { return samples_.empty(); }
  const PoseSample& operator[](std::size_t i) const { return samples_[i]; }
  double start() const { return samples_.front().timestamp; }
  double end() const { return samples_.back().timestamp; }
  /// Median spacing between consecutive samples (0 for fewer than two).
  double median_period() const;

 private:
  std::vector<PoseSample> samples_;
};

struct VelocitySample {
  double timestamp = 0.0;
  Eigen::Vector3d velocity = Eigen::Vector3d::Zero();  ///< body frame
};

/// Integrates body velocities rotated into the world by the nearest attitude (trapezoid rule).
/// `tolerance` < 0 selects half the median velocity sample period.
/// Throws PairingError when an attitude lies further than the tolerance.
TrajectoryTrack dead_reckon(const std::vector<VelocitySample>& velocities,
                            const std::vector<AhrsAttitude>& attitudes,
                            const Eigen::Vector3d& initial_position, double tolerance = -1.0);

struct RpeResult {
  double trans_rmse = 0.0;  ///< m
  double rot_rmse = 0.0;    ///< rad
  std::size_t pairs = 0;
};

/// Relative pose error over a fixed interval. Throws SpanError when the tracks overlap for less
/// than twice the interval.
RpeResult rpe(const TrajectoryTrack& estimate, const TrajectoryTrack& truth, double interval = 1.0);

struct AteResult {
  double ate_xy_rmse = 0.0;
  double relative_ate = 0.0;
  double path_length_xy = 0.0;
  double yaw = 0.0;  ///< rotation applied to the estimate, rad
  Eigen::Vector2d translation = Eigen::Vector2d::Zero();
};

/// xy ATE after least-squares alignment by a z rotation and xy translation, divided by the
/// truth xy path length sampled every `path_step` seconds.
/// Throws SpanError for fewer than two paired samples and UndefinedMetricError for zero length.
AteResult relative_ate(const TrajectoryTrack& estimate, const TrajectoryTrack& truth,
                       double path_step = 1.0);

/// Truth xy path length through samples nearest to start + k * step, plus the final sample.
double path_length_xy(const TrajectoryTrack& truth, double step = 1.0);

/// RMSE of body-frame velocity over paired samples.
double velocity_rmse(const TrajectoryTrack& estimate, const TrajectoryTrack& truth);

struct FrameOutcome {
  bool converged = false;
  bool gate_accepted = false;
};

/// Fraction of frames that did not converge or were rejected by the gate.
/// Throws SpanError on an empty list.
double failure_rate(const std::vector<FrameOutcome>& frames);

struct MetricReport {
  double rpe_trans_rmse = 0.0;
  double rpe_rot_rmse = 0.0;
  double ate_xy_rmse = 0.0;
  double relative_ate = 0.0;
  double velocity_rmse = 0.0;
  double failure_rate = 0.0;
  double path_length_xy = 0.0;

  bool valid() const;
};

MetricReport evaluate(const TrajectoryTrack& estimate, const TrajectoryTrack& truth,
                      double failure_fraction, double rpe_interval = 1.0);

/// Pairs each estimate sample with the nearest truth sample within `tolerance`
/// (< 0: half the estimate's median period). Unpaired samples are skipped.
std::vector<std::pair<std::size_t, std::size_t>> pair_tracks(const TrajectoryTrack& estimate,
                                                              const TrajectoryTrack& truth,
                                                              double tolerance = -1.0);

}  // namespace hvio
