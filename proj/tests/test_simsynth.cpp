#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <numbers>

#include "hvio/dataset.hpp"
#include "hvio/simsynth.hpp"
#include "support/oracles.hpp"

using namespace hvio;

namespace {

constexpr double kPi = std::numbers::pi;

double mean_warp_error(const GrayImage& prev, const GrayImage& curr, const WarpMatrix& h,
                       int margin = 2) {
  double sum = 0.0;
  int n = 0;
  for (int y = margin; y < curr.height() - margin; ++y) {
    for (int x = margin; x < curr.width() - margin; ++x) {
      const Eigen::Vector2d q = warp_point(h, x, y);
      const auto v = sample_bilinear(prev, q.x(), q.y());
      if (!v) {
        continue;
      }
      sum += std::abs(*v - curr.at(x, y));
      ++n;
    }
  }
  REQUIRE(n > curr.width() * curr.height() / 2);
  return sum / n;
}

struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& name)
      : path(std::filesystem::temp_directory_path() / name) {
    std::filesystem::remove_all(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
};

}  // namespace

TEST_CASE("checker period in pixels follows similar triangles") {
  ScenarioSpec spec = testing::hover_spec();
  spec.texture.kind = TextureKind::checker;
  spec.texture.checker_period = 0.25;
  const Scenario sc(spec);
  const GrayImage img = render_frame(sc, sc.camera_pose(0.0));
  const int row = 100;
  std::vector<int> edges;
  for (int x = 1; x < img.width(); ++x) {
    if (img.at(x, row) != img.at(x - 1, row)) {
      edges.push_back(x);
    }
  }
  REQUIRE(edges.size() > 10);
  const double half_period_px = static_cast<double>(edges.back() - edges.front()) /
                                static_cast<double>(edges.size() - 1);
  const double expected = spec.camera.fx * spec.texture.checker_period / spec.trajectory.height;
  CHECK(2.0 * half_period_px == doctest::Approx(expected).epsilon(0.005));
}

TEST_CASE("rendering is deterministic") {
  const Scenario a(preset("p1-ideal"));
  const Scenario b(preset("p1-ideal"));
  const GrayImage ia = render_frame(a, a.camera_pose(3.2));
  const GrayImage ib = render_frame(b, b.camera_pose(3.2));
  CHECK(std::equal(ia.data().begin(), ia.data().end(), ib.data().begin()));

  ScenarioSpec other = preset("p1-ideal");
  other.seed = 99;
  const Scenario c(other);
  const GrayImage ic = render_frame(c, c.camera_pose(3.2));
  CHECK_FALSE(std::equal(ia.data().begin(), ia.data().end(), ic.data().begin()));
}

TEST_CASE("blank texture renders mid-grey") {
  const Scenario sc(preset("p3-notex"));
  const GrayImage img = render_frame(sc, sc.camera_pose(1.0));
  for (double v : img.data()) {
    CHECK(v == doctest::Approx(0.5).epsilon(1e-6));
  }
}

TEST_CASE("pure camera yaw matches the rotation homography") {
  const Scenario sc(testing::hover_spec());
  const CameraPose prev = sc.camera_pose(0.0);
  const double alpha = 0.05;
  const Eigen::Matrix3d rz = testing::quaternion_rotation(Eigen::Vector3d(0, 0, alpha));
  CameraPose curr = prev;
  curr.rotation = prev.rotation * rz;
  const GrayImage i0 = render_frame(sc, prev);
  const GrayImage i1 = render_frame(sc, curr);
  const CameraIntrinsics& k = sc.spec().camera;
  const WarpMatrix h = build_homography(k, WarpParams{Eigen::Vector3d::Zero(), Eigen::Vector3d(0, 0, alpha)},
                                        PlaneNormal{0.0, kPi / 2});
  CHECK(mean_warp_error(i0, i1, h) < 1e-3);
}

TEST_CASE("ground-truth inter-frame motion explains consecutive frames") {
  for (const char* name : {"p1-ideal", "p2-lowtex", "p5-aggressive", "p6-lowhz", "s1-slope"}) {
    const Scenario sc(preset(name));
    const auto truth = synthesize_ground_truth(sc);
    for (std::size_t i : {std::size_t{1}, truth.size() / 3, truth.size() - 1}) {
      const GrayImage prev = render_frame(sc, sc.camera_pose(truth[i - 1].timestamp));
      const GrayImage curr = render_frame(sc, sc.camera_pose(truth[i].timestamp));
      const WarpParams p{truth[i].inter_t, truth[i].inter_r};
      const WarpMatrix h =
          build_homography(sc.spec().camera, p, PlaneNormal::from_vector(truth[i].normal));
      CAPTURE(name);
      CAPTURE(i);
      CHECK(mean_warp_error(prev, curr, h) < 2e-3);
    }
  }
}

TEST_CASE("IMU synthesis examples") {
  const Scenario hover(testing::hover_spec());
  const ImuStreams s = synthesize_imu(hover);
  REQUIRE(s.imu.size() == 200);
  for (const ImuSample& m : s.imu) {
    CHECK((m.f_m - Eigen::Vector3d(0, 0, kGravity)).norm() < 1e-12);
    CHECK(m.omega_m.norm() < 1e-15);
  }

  ScenarioSpec circle = testing::hover_spec();
  circle.trajectory.kind = TrajectoryKind::circle;
  circle.trajectory.radius = 2.0;
  circle.trajectory.angular_rate = 0.5;
  circle.duration = 5.0;
  const ImuStreams c = synthesize_imu(Scenario(circle));
  for (std::size_t k = 0; k < c.imu.size(); k += 25) {
    const Eigen::Vector3d f = c.imu[k].f_m;
    CHECK(f.head<2>().norm() == doctest::Approx(2.0 * 0.5 * 0.5).epsilon(1e-9));
    CHECK(f.z() == doctest::Approx(kGravity).epsilon(1e-12));
  }
}

TEST_CASE("gyro readings match the derivative of the attitude") {
  const Scenario sc(preset("p5-aggressive"));
  const ImuStreams s = synthesize_imu(sc);
  const double h = 1e-4;
  for (std::size_t k = 10; k < s.imu.size(); k += 97) {
    const double t = s.imu[k].timestamp;
    const Eigen::Matrix3d r0 = sc.trajectory().at(t - h).rotation;
    const Eigen::Matrix3d r1 = sc.trajectory().at(t + h).rotation;
    const Eigen::Vector3d fd = matrix_to_rodrigues(r0.transpose() * r1) / (2 * h);
    CHECK((fd - s.imu[k].omega_m).norm() < 1e-6);
  }
}

TEST_CASE("integrating noise-free IMU reproduces the velocity to second order") {
  auto final_error = [](double rate) {
    ScenarioSpec spec = preset("p1-ideal");
    spec.duration = 10.0;
    spec.imu_rate = rate;
    const Scenario sc(spec);
    const ImuStreams s = synthesize_imu(sc);
    const Eigen::Vector3d g(0.0, 0.0, -kGravity);
    Eigen::Vector3d v = sc.trajectory().at(0.0).velocity;
    for (std::size_t k = 1; k < s.imu.size(); ++k) {
      const double dt = s.imu[k].timestamp - s.imu[k - 1].timestamp;
      const Eigen::Vector3d a0 = s.ahrs[k - 1].rotation * s.imu[k - 1].f_m + g;
      const Eigen::Vector3d a1 = s.ahrs[k].rotation * s.imu[k].f_m + g;
      v += 0.5 * dt * (a0 + a1);
    }
    return (v - sc.trajectory().at(s.imu.back().timestamp).velocity).norm();
  };
  const double coarse = final_error(200.0);
  const double fine = final_error(400.0);
  CHECK(coarse < 1e-4);
  CHECK(fine < coarse / 3.0);
}

TEST_CASE("range synthesis examples") {
  const auto level = synthesize_range(Scenario(testing::hover_spec()));
  REQUIRE(level.size() == 80);
  for (const RangeSample& r : level) {
    CHECK(r.range == doctest::Approx(2.0).epsilon(1e-12));
  }

  ScenarioSpec tilted = testing::hover_spec();
  tilted.trajectory.static_roll = 10.0 * kPi / 180.0;
  const Scenario sc(tilted);
  const auto ranges = synthesize_range(sc);
  const auto truth = synthesize_ground_truth(sc);
  for (const RangeSample& r : ranges) {
    CHECK(r.range == doctest::Approx(2.0 / std::cos(10.0 * kPi / 180.0)).epsilon(1e-12));
  }
  CHECK(ranges.front().range * truth.front().normal.z() == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("stream lengths and reproducibility") {
  CHECK(sample_count(1.0, 80.0) == 80);
  CHECK(sample_count(30.0, 200.0) == 6000);
  CHECK(sample_count(0.01, 80.0) == 1);

  const Scenario a(preset("p1-noisy"));
  const Scenario b(preset("p1-noisy"));
  const ImuStreams sa = synthesize_imu(a);
  const ImuStreams sb = synthesize_imu(b);
  REQUIRE(sa.imu.size() == sb.imu.size());
  bool identical = true;
  for (std::size_t k = 0; k < sa.imu.size(); ++k) {
    identical = identical && sa.imu[k].f_m == sb.imu[k].f_m && sa.imu[k].omega_m == sb.imu[k].omega_m;
  }
  CHECK(identical);

  ScenarioSpec other = preset("p1-noisy");
  other.seed = 2;
  const ImuStreams sc = synthesize_imu(Scenario(other));
  CHECK(sc.imu[5].f_m != sa.imu[5].f_m);
}

TEST_CASE("presets and validation") {
  CHECK_THROWS_AS(preset("p9-unknown"), ConfigError);
  const ScenarioSpec ideal = preset("p1-ideal");
  CHECK(ideal.width == 320);
  CHECK(ideal.height == 240);
  CHECK(ideal.camera.fx == 300.0);
  CHECK(ideal.image_rate == 80.0);
  CHECK(ideal.imu_rate == 200.0);
  CHECK(ideal.range_rate == 80.0);
  const ScenarioSpec low = preset("p6-lowhz");
  CHECK(low.image_rate == 20.0);
  CHECK(low.imu_rate == ideal.imu_rate);
  CHECK(low.range_rate == ideal.range_rate);
  const ScenarioSpec noisy = preset("p1-noisy");
  CHECK(noisy.noise.sigma_gyro == 0.02);
  CHECK(noisy.noise.sigma_accel == 1.0);
  CHECK(preset("s1-slope").slope_deg == 5.0);
  CHECK(preset("p2-lowtex").texture.contrast == 0.25);

  ScenarioSpec bad = ideal;
  bad.width = 0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = ideal;
  bad.image_rate = -1.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = ideal;
  bad.duration = 0.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("the figure-8 keeps the whole view on the ground plane") {
  for (const char* name : {"p1-ideal", "p5-aggressive", "s1-slope"}) {
    const Scenario sc(preset(name));
    const CameraIntrinsics& k = sc.spec().camera;
    const auto times = sc.frame_times();
    std::size_t on_texture = 0;
    for (double t : times) {
      const CameraPose pose = sc.camera_pose(t);
      bool all = true;
      for (double x : {0.0, sc.spec().width - 1.0}) {
        for (double y : {0.0, sc.spec().height - 1.0}) {
          const Eigen::Vector3d ray = pose.rotation * Eigen::Vector3d((x - k.cx) / k.fx, (y - k.cy) / k.fy, 1.0);
          all = all && sc.plane().normal_up.dot(ray) < 0.0;
        }
      }
      on_texture += all ? 1 : 0;
    }
    CAPTURE(name);
    CHECK(static_cast<double>(on_texture) >= 0.99 * static_cast<double>(times.size()));
  }
}

TEST_CASE("write_dataset round trip") {
  TempDir dir("hvio_test_dataset");
  ScenarioSpec spec = testing::hover_spec();
  spec.noise = SensorNoiseSpec::real_sensor();
  write_dataset(spec, dir.path);
  const Dataset d = load_dataset(dir.path);
  CHECK(d.frame_count() == 80);
  CHECK(d.imu.size() == 200);
  CHECK(d.truth.size() == 80);
  CHECK(std::filesystem::exists(dir.path / "frames" / "000079.pgm"));

  const Dataset mem = make_dataset(Scenario(spec));
  REQUIRE(mem.imu.size() == d.imu.size());
  for (std::size_t k = 0; k < d.imu.size(); ++k) {
    CHECK(d.imu[k].timestamp == mem.imu[k].timestamp);
    CHECK(d.imu[k].f_m == mem.imu[k].f_m);
    CHECK(d.imu[k].omega_m == mem.imu[k].omega_m);
    CHECK(d.ahrs[k].rotation == mem.ahrs[k].rotation);
  }
  for (std::size_t k = 0; k < d.truth.size(); ++k) {
    CHECK(d.truth[k].velocity_camera == mem.truth[k].velocity_camera);
    CHECK(d.truth[k].distance == mem.truth[k].distance);
    CHECK(d.truth[k].inter_t == mem.truth[k].inter_t);
  }
  CHECK(d.frame(40).to_bytes() == mem.frame(40).to_bytes());
  CHECK(d.meta.camera.fx == spec.camera.fx);
  CHECK(d.meta.extrinsics.r_ci == spec.extrinsics.r_ci);
}

TEST_CASE("write_dataset cleans up after a failure") {
  TempDir dir("hvio_test_blocked");
  // A directory where a frame file should go makes the write fail part-way.
  std::filesystem::create_directories(dir.path / "frames" / "000003.pgm");
  CHECK_THROWS_AS(write_dataset(testing::hover_spec(), dir.path), IoError);
  CHECK_FALSE(std::filesystem::exists(dir.path / "manifest.txt"));
  CHECK_FALSE(std::filesystem::exists(dir.path / "imu.csv"));
  CHECK_FALSE(std::filesystem::exists(dir.path / "frames"));
}
