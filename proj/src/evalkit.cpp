#include "hvio/evalkit.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>

#include <Eigen/Geometry>

#include "hvio/geometry.hpp"

namespace hvio {

namespace {

constexpr double kTimeEps = 1e-9;

template <typename Get>
std::optional<std::size_t> nearest_by(std::size_t n, double t, Get&& time_of) {
  if (n == 0) {
    return std::nullopt;
  }
  std::size_t lo = 0;
  std::size_t hi = n;
  while (lo < hi) {
    const std::size_t mid = (lo + hi) / 2;
    if (time_of(mid) < t) {
      lo = mid + 1;
    } else {
      hi = mid;
    }
  }
  if (lo == n) {
    return n - 1;
  }
  if (lo == 0) {
    return 0;
  }
  return (t - time_of(lo - 1) <= time_of(lo) - t) ? lo - 1 : lo;
}

std::optional<std::size_t> nearest_sample(const TrajectoryTrack& track, double t, double tol) {
  const auto i = nearest_by(track.size(), t, [&](std::size_t k) { return track[k].timestamp; });
  if (!i || std::abs(track[*i].timestamp - t) > tol + kTimeEps) {
    return std::nullopt;
  }
  return i;
}

double half_period(const TrajectoryTrack& track) { return 0.5 * track.median_period(); }

}  // namespace

TrajectoryTrack::TrajectoryTrack(std::vector<PoseSample> samples) : samples_(std::move(samples)) {
  for (std::size_t i = 1; i < samples_.size(); ++i) {
    if (!(samples_[i].timestamp > samples_[i - 1].timestamp)) {
      throw StreamError("track timestamps must strictly increase (index " + std::to_string(i) +
                        ")");
    }
  }
}

double TrajectoryTrack::median_period() const {
  if (samples_.size() < 2) {
    return 0.0;
  }
  std::vector<double> gaps;
  gaps.reserve(samples_.size() - 1);
  for (std::size_t i = 1; i < samples_.size(); ++i) {
    gaps.push_back(samples_[i].timestamp - samples_[i - 1].timestamp);
  }
  const auto mid = gaps.begin() + static_cast<std::ptrdiff_t>(gaps.size() / 2);
  std::nth_element(gaps.begin(), mid, gaps.end());
  return *mid;
}

TrajectoryTrack dead_reckon(const std::vector<VelocitySample>& velocities,
                            const std::vector<AhrsAttitude>& attitudes,
                            const Eigen::Vector3d& initial_position, double tolerance) {
  if (velocities.empty()) {
    return {};
  }
  if (tolerance < 0.0) {
    std::vector<PoseSample> stub;
    for (const auto& v : velocities) {
      stub.push_back({v.timestamp, {}, {}, {}});
    }
    tolerance = half_period(TrajectoryTrack(std::move(stub)));
  }
  std::vector<PoseSample> out;
  out.reserve(velocities.size());
  Eigen::Vector3d position = initial_position;
  Eigen::Vector3d prev_world = Eigen::Vector3d::Zero();
  for (std::size_t i = 0; i < velocities.size(); ++i) {
    const VelocitySample& v = velocities[i];
    const auto k = nearest_index(attitudes, v.timestamp);
    if (!k || std::abs(attitudes[*k].timestamp - v.timestamp) > tolerance + kTimeEps) {
      throw PairingError("no attitude within " + std::to_string(tolerance) + " s of t = " +
                         std::to_string(v.timestamp));
    }
    const Eigen::Matrix3d& rot = attitudes[*k].rotation;
    const Eigen::Vector3d world = rot * v.velocity;
    if (i > 0) {
      const double dt = v.timestamp - velocities[i - 1].timestamp;
      position += 0.5 * dt * (prev_world + world);
    }
    prev_world = world;
    out.push_back({v.timestamp, position, rot, v.velocity});
  }
  return TrajectoryTrack(std::move(out));
}

std::vector<std::pair<std::size_t, std::size_t>> pair_tracks(const TrajectoryTrack& estimate,
                                                              const TrajectoryTrack& truth,
                                                              double tolerance) {
  if (tolerance < 0.0) {
    tolerance = half_period(estimate);
  }
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t i = 0; i < estimate.size(); ++i) {
    if (const auto j = nearest_sample(truth, estimate[i].timestamp, tolerance)) {
      pairs.emplace_back(i, *j);
    }
  }
  return pairs;
}

RpeResult rpe(const TrajectoryTrack& estimate, const TrajectoryTrack& truth, double interval) {
  if (!(interval > 0.0)) {
    throw ConfigError("interval", "must be positive");
  }
  if (estimate.empty() || truth.empty()) {
    throw SpanError("rpe needs two non-empty tracks");
  }
  const double overlap = std::min(estimate.end(), truth.end()) -
                         std::max(estimate.start(), truth.start());
  if (overlap < 2.0 * interval - kTimeEps) {
    throw SpanError("tracks overlap for " + std::to_string(overlap) + " s, need " +
                    std::to_string(2.0 * interval));
  }
  const double tol = half_period(estimate);
  double sum_t = 0.0;
  double sum_r = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < estimate.size(); ++i) {
    const PoseSample& a = estimate[i];
    const auto j = nearest_sample(estimate, a.timestamp + interval, tol);
    if (!j || *j == i) {
      continue;
    }
    const PoseSample& b = estimate[*j];
    const auto ga = nearest_sample(truth, a.timestamp, tol);
    const auto gb = nearest_sample(truth, b.timestamp, tol);
    if (!ga || !gb) {
      continue;
    }
    const PoseSample& ta = truth[*ga];
    const PoseSample& tb = truth[*gb];
    const Eigen::Matrix3d rel_est = a.attitude.transpose() * b.attitude;
    const Eigen::Vector3d dp_est = a.attitude.transpose() * (b.position - a.position);
    const Eigen::Matrix3d rel_gt = ta.attitude.transpose() * tb.attitude;
    const Eigen::Vector3d dp_gt = ta.attitude.transpose() * (tb.position - ta.position);
    const Eigen::Vector3d e_t = rel_gt.transpose() * (dp_est - dp_gt);
    const double e_r = matrix_to_rodrigues(rel_gt.transpose() * rel_est).norm();
    sum_t += e_t.squaredNorm();
    sum_r += e_r * e_r;
    ++count;
  }
  if (count == 0) {
    throw SpanError("no sample pairs separated by the rpe interval");
  }
  return {std::sqrt(sum_t / count), std::sqrt(sum_r / count), count};
}

double path_length_xy(const TrajectoryTrack& truth, double step) {
  if (!(step > 0.0)) {
    throw ConfigError("path_step", "must be positive");
  }
  if (truth.empty()) {
    return 0.0;
  }
  std::vector<std::size_t> idx;
  for (double t = truth.start(); t <= truth.end() + kTimeEps;) {
    const auto k = nearest_by(truth.size(), t, [&](std::size_t i) { return truth[i].timestamp; });
    if (idx.empty() || *k != idx.back()) {
      idx.push_back(*k);
    }
    t = truth.start() + step * static_cast<double>(idx.size());
  }
  if (idx.back() != truth.size() - 1) {
    idx.push_back(truth.size() - 1);
  }
  double length = 0.0;
  for (std::size_t i = 1; i < idx.size(); ++i) {
    length += (truth[idx[i]].position.head<2>() - truth[idx[i - 1]].position.head<2>()).norm();
  }
  return length;
}

AteResult relative_ate(const TrajectoryTrack& estimate, const TrajectoryTrack& truth,
                       double path_step) {
  const auto pairs = pair_tracks(estimate, truth);
  if (pairs.size() < 2) {
    throw SpanError("relative_ate needs at least two paired samples");
  }
  Eigen::Vector2d mean_e = Eigen::Vector2d::Zero();
  Eigen::Vector2d mean_g = Eigen::Vector2d::Zero();
  for (const auto& [i, j] : pairs) {
    mean_e += estimate[i].position.head<2>();
    mean_g += truth[j].position.head<2>();
  }
  mean_e /= static_cast<double>(pairs.size());
  mean_g /= static_cast<double>(pairs.size());
  double dot = 0.0;
  double cross = 0.0;
  for (const auto& [i, j] : pairs) {
    const Eigen::Vector2d e = estimate[i].position.head<2>() - mean_e;
    const Eigen::Vector2d g = truth[j].position.head<2>() - mean_g;
    dot += g.dot(e);
    cross += e.x() * g.y() - e.y() * g.x();
  }
  AteResult out;
  out.yaw = std::atan2(cross, dot);
  const Eigen::Matrix2d rot = Eigen::Rotation2Dd(out.yaw).toRotationMatrix();
  out.translation = mean_g - rot * mean_e;
  double sum = 0.0;
  for (const auto& [i, j] : pairs) {
    sum += (rot * estimate[i].position.head<2>() + out.translation -
            truth[j].position.head<2>()).squaredNorm();
  }
  out.ate_xy_rmse = std::sqrt(sum / static_cast<double>(pairs.size()));
  out.path_length_xy = path_length_xy(truth, path_step);
  if (!(out.path_length_xy > 0.0)) {
    throw UndefinedMetricError("truth path length is zero; relative ATE is undefined");
  }
  out.relative_ate = out.ate_xy_rmse / out.path_length_xy;
  return out;
}

double velocity_rmse(const TrajectoryTrack& estimate, const TrajectoryTrack& truth) {
  const auto pairs = pair_tracks(estimate, truth);
  if (pairs.empty()) {
    throw SpanError("velocity_rmse found no paired samples");
  }
  double sum = 0.0;
  for (const auto& [i, j] : pairs) {
    sum += (estimate[i].velocity - truth[j].velocity).squaredNorm();
  }
  return std::sqrt(sum / static_cast<double>(pairs.size()));
}

double failure_rate(const std::vector<FrameOutcome>& frames) {
  if (frames.empty()) {
    throw SpanError("failure_rate needs at least one frame");
  }
  const auto failed = std::count_if(frames.begin(), frames.end(), [](const FrameOutcome& f) {
    return !f.converged || !f.gate_accepted;
  });
  return static_cast<double>(failed) / static_cast<double>(frames.size());
}

bool MetricReport::valid() const {
  for (double x : {rpe_trans_rmse, rpe_rot_rmse, ate_xy_rmse, relative_ate, velocity_rmse,
                   failure_rate, path_length_xy}) {
    if (!(x >= 0.0) || !std::isfinite(x)) {
      return false;
    }
  }
  return failure_rate <= 1.0;
}

MetricReport evaluate(const TrajectoryTrack& estimate, const TrajectoryTrack& truth,
                      double failure_fraction, double rpe_interval) {
  MetricReport m;
  const RpeResult r = rpe(estimate, truth, rpe_interval);
  m.rpe_trans_rmse = r.trans_rmse;
  m.rpe_rot_rmse = r.rot_rmse;
  const AteResult a = relative_ate(estimate, truth);
  m.ate_xy_rmse = a.ate_xy_rmse;
  m.relative_ate = a.relative_ate;
  m.path_length_xy = a.path_length_xy;
  m.velocity_rmse = velocity_rmse(estimate, truth);
  m.failure_rate = failure_fraction;
  return m;
}

}  // namespace hvio
