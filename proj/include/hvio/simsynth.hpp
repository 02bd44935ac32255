#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "hvio/dataset.hpp"
#include "hvio/geometry.hpp"
#include "hvio/image.hpp"
#include "hvio/sensors.hpp"

namespace hvio {

enum class TextureKind { noise, checker };

/// Procedural ground texture. `noise` is a band-limited sum of plane waves stored in a
/// periodic raster and sampled bilinearly; `checker` is evaluated analytically.
/// `contrast` scales the deviation from mid-grey (0 gives a blank plane).
struct TextureSpec {
  TextureKind kind = TextureKind::noise;
  double contrast = 1.0;
  double checker_period = 0.25;  ///< m per black+white cycle
  double min_wavelength = 0.15;  ///< m
  double max_wavelength = 1.0;   ///< m
  int components = 48;
  double amplitude_exponent = 1.0;  ///< component amplitude ~ (wavelength / max)^exponent
  double tile_size = 4.0;  ///< m, period of the noise raster
  double texel = 0.004;    ///< m
};

enum class TrajectoryKind { hover, line, circle, figure8 };

struct TrajectorySpec {
  TrajectoryKind kind = TrajectoryKind::figure8;
  double height = 2.0;  ///< m above the origin of the ground plane
  double heading = 0.0; ///< rad, base yaw
  // hover
  double static_roll = 0.0;
  double static_pitch = 0.0;
  // line
  double speed = 1.0;
  // circle
  double radius = 2.0;
  double angular_rate = 0.5;
  // figure8: x = ax sin(w t), y = ay sin(2 w t)
  double amplitude_x = 3.0;
  double amplitude_y = 1.5;
  double period = 15.0;
  double height_amplitude = 0.2;
  double tilt_amplitude = 0.08;  ///< rad, roll/pitch excitation
  double yaw_amplitude = 0.3;    ///< rad
};

/// Additive white Gaussian sensor noise and a constant accelerometer bias.
struct SensorNoiseSpec {
  double sigma_accel = 0.0;  ///< m/s^2
  double sigma_gyro = 0.0;   ///< rad/s
  double sigma_ahrs = 0.0;   ///< rad, small-angle attitude noise
  double sigma_range = 0.0;  ///< m
  Eigen::Vector3d accel_bias = Eigen::Vector3d::Zero();

  /// Magnitudes of a real flight platform (gyro 0.02 rad/s, accel 1 m/s^2); attitude and
  /// range stay noise-free.
  static SensorNoiseSpec real_sensor();
};

struct ScenarioSpec {
  std::string name = "custom";
  TextureSpec texture;
  TrajectorySpec trajectory;
  double duration = 30.0;
  int width = 320;
  int height = 240;
  CameraIntrinsics camera{300.0, 300.0, 160.0, 120.0};
  Extrinsics extrinsics = Extrinsics::nadir();
  double image_rate = 80.0;
  double imu_rate = 200.0;
  double range_rate = 80.0;
  SensorNoiseSpec noise;
  double slope_deg = 0.0;  ///< ground tilt about the world y axis
  std::uint64_t seed = 1;

  /// Throws ConfigError naming the offending field.
  void validate() const;
};

/// Named presets: p1-ideal, p1-noisy, p2-lowtex, p3-notex, p5-aggressive, p6-lowhz, s1-slope.
/// Throws ConfigError for unknown names.
ScenarioSpec preset(const std::string& name);
std::vector<std::string> preset_names();

/// Kinematic state of the IMU/body frame.
struct BodyState {
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  Eigen::Vector3d velocity = Eigen::Vector3d::Zero();
  Eigen::Vector3d acceleration = Eigen::Vector3d::Zero();
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();  ///< IMU -> world
  Eigen::Vector3d omega_body = Eigen::Vector3d::Zero();
};

/// Camera pose: camera -> world rotation and camera centre in world coordinates.
struct CameraPose {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d center = Eigen::Vector3d::Zero();
};

/// Analytic trajectory: each of x, y, z, roll, pitch, yaw is an offset plus a linear rate plus
/// a sum of sinusoids, so every derivative is exact.
class Trajectory {
 public:
  struct Harmonic {
    double amplitude;
    double frequency;  ///< rad/s
    double phase;
  };
  struct Channel {
    double offset = 0.0;
    double rate = 0.0;
    std::vector<Harmonic> harmonics;

    double value(double t) const;
    double derivative(double t, int order) const;
  };

  explicit Trajectory(const TrajectorySpec& spec);
  Trajectory(Channel x, Channel y, Channel z, Channel roll, Channel pitch, Channel yaw);

  BodyState at(double t) const;

 private:
  Channel x_, y_, z_, roll_, pitch_, yaw_;
};

class Texture {
 public:
  Texture(const TextureSpec& spec, std::uint64_t seed);
  /// Intensity at in-plane coordinates (m).
  double sample(double u, double v) const;

 private:
  TextureSpec spec_;
  int size_ = 0;
  std::vector<float> raster_;
};

/// Ground plane through the world origin, tilted by slope_deg about the world y axis.
struct GroundPlane {
  Eigen::Vector3d normal_up = Eigen::Vector3d::UnitZ();
  Eigen::Vector3d axis_u = Eigen::Vector3d::UnitX();
  Eigen::Vector3d axis_v = Eigen::Vector3d::UnitY();

  static GroundPlane tilted(double slope_deg);
  double height_of(const Eigen::Vector3d& p) const { return normal_up.dot(p); }
};

/// Bundles a validated spec with its texture, trajectory and ground plane.
class Scenario {
 public:
  explicit Scenario(ScenarioSpec spec);

  const ScenarioSpec& spec() const { return spec_; }
  const Texture& texture() const { return texture_; }
  const Trajectory& trajectory() const { return trajectory_; }
  const GroundPlane& plane() const { return plane_; }

  CameraPose camera_pose(double t) const;
  std::vector<double> frame_times() const;
  GroundTruthSample ground_truth_at(double t, const GroundTruthSample* previous) const;

 private:
  ScenarioSpec spec_;
  Texture texture_;
  Trajectory trajectory_;
  GroundPlane plane_;
};

/// Ray-casts every pixel onto the ground plane. Pixels whose ray misses the plane are 0.5.
/// Throws Error when the camera is less than 0.1 m above the plane.
GrayImage render_frame(const Scenario& scenario, const CameraPose& pose, double timestamp = 0.0);

struct ImuStreams {
  std::vector<ImuSample> imu;
  std::vector<AhrsAttitude> ahrs;
};

ImuStreams synthesize_imu(const Scenario& scenario);
/// Range along the camera optical axis; samples whose beam misses the plane are dropped.
std::vector<RangeSample> synthesize_range(const Scenario& scenario);
std::vector<GroundTruthSample> synthesize_ground_truth(const Scenario& scenario);

/// Number of samples of a stream at `rate` over `duration` (timestamps k / rate < duration).
std::size_t sample_count(double duration, double rate);

/// In-memory dataset with 8-bit quantised frames rendered on demand.
Dataset make_dataset(const Scenario& scenario);

/// Writes the dataset to disk. On failure the partially written directory is removed.
void write_dataset(const ScenarioSpec& spec, const std::filesystem::path& out_dir);

}  // namespace hvio
