#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "hvio/geometry.hpp"
#include "hvio/image.hpp"
#include "hvio/sensors.hpp"

namespace hvio {

/// Ground-truth state at one image timestamp. Inter-frame quantities relate this frame to the
/// previous one (current camera frame -> previous camera frame) and are zero for frame 0.
struct GroundTruthSample {
  double timestamp = 0.0;
  Eigen::Vector3d position = Eigen::Vector3d::Zero();  ///< IMU origin, world frame, m
  Eigen::Matrix3d attitude = Eigen::Matrix3d::Identity();  ///< IMU -> world
  Eigen::Vector3d velocity_world = Eigen::Vector3d::Zero();
  Eigen::Vector3d velocity_body = Eigen::Vector3d::Zero();
  Eigen::Vector3d velocity_camera = Eigen::Vector3d::Zero();  ///< camera origin, camera frame
  double distance = 0.0;  ///< camera origin to ground plane, m
  Eigen::Vector3d normal = Eigen::Vector3d::UnitZ();  ///< true plane normal, camera frame
  Eigen::Vector3d inter_t = Eigen::Vector3d::Zero();  ///< unscaled translation t0 / d
  Eigen::Vector3d inter_r = Eigen::Vector3d::Zero();  ///< Rodrigues vector of R
};

struct DatasetMeta {
  std::string name;
  int width = 320;
  int height = 240;
  CameraIntrinsics camera;
  Extrinsics extrinsics = Extrinsics::nadir();
  double image_rate = 80.0;
  double imu_rate = 200.0;
  double range_rate = 80.0;
  std::uint64_t seed = 0;
};

/// Sensor streams of one flight. Frames are produced on demand by `frame_loader` so long
/// sequences never have to be resident in memory.
struct Dataset {
  DatasetMeta meta;
  std::vector<double> frame_times;
  std::vector<std::string> frame_files;  ///< relative paths; empty for in-memory datasets
  std::vector<ImuSample> imu;
  std::vector<AhrsAttitude> ahrs;
  std::vector<RangeSample> range;
  std::vector<GroundTruthSample> truth;  ///< empty when no ground truth is available
  std::function<GrayImage(std::size_t)> frame_loader;

  std::size_t frame_count() const { return frame_times.size(); }
  GrayImage frame(std::size_t i) const;
};

/// Fixed-point timestamp text with nine decimals.
std::string format_timestamp(double t);
/// Rounds t to the value that survives a format_timestamp / parse round trip.
double canonical_timestamp(double t);

/// Reads manifest.txt and every stream it names. Frames are loaded lazily.
Dataset load_dataset(const std::filesystem::path& dir);

/// Writes manifest, frames and CSV streams. `render` supplies frame i (8-bit content).
void write_dataset_files(const Dataset& data, const std::filesystem::path& dir);

/// Ground-truth CSV reader/writer, shared with the metrics command.
std::vector<GroundTruthSample> read_groundtruth_csv(const std::filesystem::path& path);
void write_groundtruth_csv(const std::filesystem::path& path,
                           const std::vector<GroundTruthSample>& truth);

}  // namespace hvio
