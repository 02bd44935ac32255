#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "hvio/evalkit.hpp"
#include "hvio/pipeline.hpp"
#include "hvio/simsynth.hpp"
#include "support/oracles.hpp"

using namespace hvio;

namespace {

std::vector<AhrsAttitude> level_attitudes(const std::vector<VelocitySample>& v) {
  std::vector<AhrsAttitude> a;
  for (const auto& s : v) {
    a.push_back({s.timestamp, Eigen::Matrix3d::Identity()});
  }
  return a;
}

Eigen::Matrix3d yaw_matrix(double a) {
  return testing::quaternion_rotation(Eigen::Vector3d(0.0, 0.0, a));
}

TrajectoryTrack figure8_truth() {
  ScenarioSpec spec = preset("p1-ideal");
  spec.duration = 20.0;
  return track_from_truth(synthesize_ground_truth(Scenario(spec)));
}

}  // namespace

TEST_CASE("TrajectoryTrack rejects unsorted timestamps") {
  std::vector<PoseSample> s(4);
  s[0].timestamp = 0.0;
  s[1].timestamp = 0.1;
  s[2].timestamp = 0.1;
  s[3].timestamp = 0.5;
  CHECK_THROWS_AS(TrajectoryTrack{s}, StreamError);
  s[2].timestamp = 0.2;
  CHECK(TrajectoryTrack{s}.median_period() == doctest::Approx(0.1));
}

TEST_CASE("dead_reckon examples") {
  std::vector<VelocitySample> v;
  for (int i = 0; i <= 160; ++i) {
    v.push_back({i / 80.0, Eigen::Vector3d(1.0, 0.0, 0.0)});
  }
  const TrajectoryTrack line = dead_reckon(v, level_attitudes(v), Eigen::Vector3d::Zero());
  CHECK((line[line.size() - 1].position - Eigen::Vector3d(2.0, 0.0, 0.0)).norm() < 1e-12);

  for (auto& s : v) {
    s.velocity.setZero();
  }
  const Eigen::Vector3d start(1.0, -2.0, 3.0);
  const TrajectoryTrack still = dead_reckon(v, level_attitudes(v), start);
  for (const auto& p : still.samples()) {
    CHECK(p.position == start);
  }

  // Body velocity along x, attitude yawed by 90 degrees: motion along world y.
  std::vector<AhrsAttitude> yawed;
  for (const auto& s : v) {
    yawed.push_back({s.timestamp, yaw_matrix(std::numbers::pi / 2)});
  }
  for (auto& s : v) {
    s.velocity = Eigen::Vector3d(1.0, 0.0, 0.0);
  }
  const TrajectoryTrack turned = dead_reckon(v, yawed, Eigen::Vector3d::Zero());
  CHECK((turned[turned.size() - 1].position - Eigen::Vector3d(0.0, 2.0, 0.0)).norm() < 1e-12);
}

TEST_CASE("dead_reckon of a sinusoid follows the closed-form integral to O(dt^2)") {
  const double w = 2.0;
  const double duration = 5.0;
  auto max_error = [&](double dt) {
    std::vector<VelocitySample> v;
    const int n = static_cast<int>(std::lround(duration / dt));
    for (int i = 0; i <= n; ++i) {
      const double t = i * dt;
      v.push_back({t, Eigen::Vector3d(std::cos(w * t), 0.0, 0.0)});
    }
    const TrajectoryTrack p = dead_reckon(v, level_attitudes(v), Eigen::Vector3d::Zero());
    double err = 0.0;
    for (const auto& s : p.samples()) {
      err = std::max(err, std::abs(s.position.x() - std::sin(w * s.timestamp) / w));
    }
    return err;
  };
  const double dt = 1.0 / 80.0;
  const double coarse = max_error(dt);
  const double fine = max_error(dt / 2.0);
  // Composite trapezoid bound: T dt^2 max|v''| / 12.
  CHECK(coarse <= duration * dt * dt * w * w / 12.0);
  CHECK(coarse / fine == doctest::Approx(4.0).epsilon(0.05));
}

TEST_CASE("dead_reckon pairing errors") {
  std::vector<VelocitySample> v{{0.0, Eigen::Vector3d::Zero()}, {0.1, Eigen::Vector3d::Zero()}};
  std::vector<AhrsAttitude> a{{0.0, Eigen::Matrix3d::Identity()}, {0.2, Eigen::Matrix3d::Identity()}};
  // Half the velocity period is 0.05 s; the nearest attitude to t = 0.1 is 0.1 s away.
  CHECK_THROWS_AS(dead_reckon(v, a, Eigen::Vector3d::Zero()), PairingError);
  CHECK_NOTHROW(dead_reckon(v, a, Eigen::Vector3d::Zero(), 0.1));
  CHECK_THROWS_AS(dead_reckon(v, {}, Eigen::Vector3d::Zero()), PairingError);
}

TEST_CASE("dead_reckon of the true figure-8 velocities reproduces the true positions") {
  const TrajectoryTrack truth = figure8_truth();
  std::vector<VelocitySample> v;
  std::vector<AhrsAttitude> a;
  for (const auto& s : truth.samples()) {
    v.push_back({s.timestamp, s.velocity});
    a.push_back({s.timestamp, s.attitude});
  }
  const TrajectoryTrack dr = dead_reckon(v, a, truth[0].position);
  double err = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    err = std::max(err, (dr[i].position - truth[i].position).norm());
  }
  CHECK(err < 1e-4);
}

TEST_CASE("rpe examples") {
  const TrajectoryTrack truth = testing::straight_track(101, 0.1, 1.0);
  const RpeResult same = rpe(truth, truth);
  CHECK(same.trans_rmse == 0.0);
  CHECK(same.rot_rmse == 0.0);
  CHECK(same.pairs == 91);

  const TrajectoryTrack shifted = testing::straight_track(101, 0.1, 1.0, 1.0, Eigen::Vector3d(5, -3, 1));
  CHECK(rpe(shifted, truth).trans_rmse < 1e-12);

  const TrajectoryTrack scaled = testing::straight_track(101, 0.1, 1.0, 1.01);
  CHECK(std::abs(rpe(scaled, truth).trans_rmse - 0.01) < 1e-9);
}

TEST_CASE("rpe measures rotation error as the residual angle") {
  const TrajectoryTrack truth = testing::straight_track(101, 0.1, 1.0);
  std::vector<PoseSample> s = truth.samples();
  const double rate = 0.01;  // rad/s of spurious yaw drift
  for (auto& p : s) {
    p.attitude = yaw_matrix(rate * p.timestamp);
  }
  const RpeResult r = rpe(TrajectoryTrack(s), truth);
  CHECK(std::abs(r.rot_rmse - rate) < 1e-12);
}

TEST_CASE("rpe span errors") {
  const TrajectoryTrack shortt = testing::straight_track(15, 0.1, 1.0);
  CHECK_THROWS_AS(rpe(shortt, shortt), SpanError);
  CHECK_THROWS_AS(rpe(TrajectoryTrack{}, shortt), SpanError);
  CHECK_THROWS_AS(rpe(shortt, shortt, 0.0), ConfigError);
}

TEST_CASE("rpe is invariant under a rigid transform of both tracks") {
  const TrajectoryTrack truth = figure8_truth();
  std::vector<PoseSample> noisy = truth.samples();
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g(0.0, 0.01);
  for (auto& p : noisy) {
    p.position += Eigen::Vector3d(g(rng), g(rng), g(rng));
    p.attitude = p.attitude * testing::quaternion_rotation(Eigen::Vector3d(g(rng), g(rng), g(rng)));
  }
  const TrajectoryTrack est(noisy);
  const RpeResult base = rpe(est, truth);
  for (int i = 0; i < 5; ++i) {
    std::uniform_real_distribution<double> u(-3.0, 3.0);
    const Eigen::Matrix3d r = testing::quaternion_rotation(Eigen::Vector3d(u(rng), u(rng), u(rng)));
    const Eigen::Vector3d t(u(rng), u(rng), u(rng));
    const RpeResult moved =
        rpe(testing::transform_track(est, r, t), testing::transform_track(truth, r, t));
    CHECK(moved.trans_rmse == doctest::Approx(base.trans_rmse).epsilon(1e-9));
    CHECK(moved.rot_rmse == doctest::Approx(base.rot_rmse).epsilon(1e-6));
    CHECK(moved.pairs == base.pairs);
  }
}

TEST_CASE("relative_ate examples") {
  const TrajectoryTrack truth = figure8_truth();
  const AteResult same = relative_ate(truth, truth);
  CHECK(same.ate_xy_rmse < 1e-12);
  CHECK(same.relative_ate < 1e-12);

  const TrajectoryTrack turned =
      testing::transform_track(truth, yaw_matrix(std::numbers::pi / 2), Eigen::Vector3d::Zero());
  const AteResult aligned = relative_ate(turned, truth);
  CHECK(aligned.ate_xy_rmse < 1e-9);
  CHECK(std::abs(std::abs(aligned.yaw) - std::numbers::pi / 2) < 1e-9);

  const testing::ZigZagCase zz = testing::zigzag_case();
  const AteResult z = relative_ate(zz.estimate, zz.truth);
  CHECK(std::abs(z.path_length_xy - 10.0) < 1e-9);
  CHECK(std::abs(z.ate_xy_rmse - 0.1) < 1e-9);
  CHECK(std::abs(z.relative_ate - 0.01) < 1e-9);
}

TEST_CASE("relative_ate is invariant under z rotation and xy translation of the estimate") {
  const TrajectoryTrack truth = figure8_truth();
  std::vector<PoseSample> noisy = truth.samples();
  std::mt19937_64 rng(4);
  std::normal_distribution<double> g(0.0, 0.05);
  for (auto& p : noisy) {
    p.position += Eigen::Vector3d(g(rng), g(rng), 0.0);
  }
  const TrajectoryTrack est(noisy);
  const double base = relative_ate(est, truth).relative_ate;
  CHECK(base > 0.0);
  std::uniform_real_distribution<double> u(-10.0, 10.0);
  for (int i = 0; i < 10; ++i) {
    const TrajectoryTrack moved =
        testing::transform_track(est, yaw_matrix(u(rng)), Eigen::Vector3d(u(rng), u(rng), 0.0));
    CHECK(relative_ate(moved, truth).relative_ate == doctest::Approx(base).epsilon(1e-9));
  }
}

TEST_CASE("relative_ate errors and path length sampling") {
  const TrajectoryTrack one = testing::straight_track(1, 0.1, 1.0);
  CHECK_THROWS_AS(relative_ate(one, one), SpanError);
  const TrajectoryTrack parked = testing::straight_track(50, 0.1, 0.0);
  CHECK_THROWS_AS(relative_ate(parked, parked), UndefinedMetricError);

  // Back and forth within one second: 1 s sampling sees no motion.
  std::vector<PoseSample> s;
  for (int i = 0; i <= 20; ++i) {
    const double t = 0.05 * i;
    s.push_back({t, Eigen::Vector3d(std::sin(2.0 * std::numbers::pi * t), 0, 0),
                 Eigen::Matrix3d::Identity(), Eigen::Vector3d::Zero()});
  }
  CHECK(path_length_xy(TrajectoryTrack(s)) < 1e-12);
  CHECK(path_length_xy(TrajectoryTrack(s), 0.25) == doctest::Approx(4.0));
}

TEST_CASE("velocity_rmse pairs by nearest timestamp") {
  const TrajectoryTrack truth = testing::straight_track(101, 0.1, 1.0);
  const TrajectoryTrack faster = testing::straight_track(101, 0.1, 1.0, 1.1);
  CHECK(velocity_rmse(faster, truth) == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(pair_tracks(faster, truth).size() == 101);
  std::vector<PoseSample> late = faster.samples();
  for (auto& p : late) {
    p.timestamp += 100.0;
  }
  CHECK_THROWS_AS(velocity_rmse(TrajectoryTrack(late), truth), SpanError);
}

TEST_CASE("failure_rate examples") {
  std::vector<FrameOutcome> f(100, FrameOutcome{true, true});
  CHECK(failure_rate(f) == 0.0);
  for (int i = 0; i < 3; ++i) {
    f[i].converged = false;
  }
  f[50].gate_accepted = false;
  f[51].gate_accepted = false;
  CHECK(failure_rate(f) == doctest::Approx(0.05));
  CHECK(failure_rate(std::vector<FrameOutcome>(7, FrameOutcome{})) == 1.0);
  CHECK_THROWS_AS(failure_rate({}), SpanError);
}

TEST_CASE("evaluate fills a valid report") {
  const TrajectoryTrack truth = figure8_truth();
  const MetricReport m = evaluate(truth, truth, 0.25);
  CHECK(m.valid());
  CHECK(m.failure_rate == 0.25);
  CHECK(m.path_length_xy > 10.0);
  MetricReport bad = m;
  bad.failure_rate = 1.5;
  CHECK_FALSE(bad.valid());
  bad = m;
  bad.velocity_rmse = std::nan("");
  CHECK_FALSE(bad.valid());
}
