#pragma once

#include <optional>
#include <vector>

#include <Eigen/Core>

#include "hvio/common.hpp"

namespace hvio {

/// Raw accelerometer (specific force) and gyro readings in the IMU frame.
struct ImuSample {
  double timestamp = 0.0;
  Eigen::Vector3d f_m = Eigen::Vector3d::Zero();      ///< m/s^2
  Eigen::Vector3d omega_m = Eigen::Vector3d::Zero();  ///< rad/s
};

/// Orientation prior. `rotation` maps IMU-frame vectors into the world frame (z up), so the
/// gravity vector seen by the IMU is rotation^T * (0, 0, -g).
struct AhrsAttitude {
  double timestamp = 0.0;
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();

  Eigen::Vector3d gravity_in_imu(double g0 = kGravity) const {
    return rotation.transpose() * Eigen::Vector3d(0.0, 0.0, -g0);
  }
};

/// Rigid camera mount. r_ci rotates IMU-frame vectors into the camera frame; p_ic is the
/// camera origin relative to the IMU origin, expressed in the IMU frame.
struct Extrinsics {
  Eigen::Matrix3d r_ci = Eigen::Matrix3d::Identity();
  Eigen::Vector3d p_ic = Eigen::Vector3d::Zero();

  /// Camera looking straight down from a z-up IMU: image x is the vehicle's right (-y_imu),
  /// image y points backwards (-x_imu), optical axis is -z_imu.
  static Extrinsics nadir();
};

struct RangeSample {
  double timestamp = 0.0;
  double range = 0.0;  ///< m along the camera optical axis
};

/// True when R^T R = I and det R = +1 to the given tolerance.
bool is_rotation(const Eigen::Matrix3d& r, double tol = 1e-9);

/// Index of the sample nearest to t (earlier sample wins ties). Streams must be sorted.
template <typename Sample>
std::optional<std::size_t> nearest_index(const std::vector<Sample>& stream, double t) {
  if (stream.empty()) {
    return std::nullopt;
  }
  std::size_t lo = 0;
  std::size_t hi = stream.size();
  while (lo < hi) {
    const std::size_t mid = (lo + hi) / 2;
    if (stream[mid].timestamp < t) {
      lo = mid + 1;
    } else {
      hi = mid;
    }
  }
  if (lo == stream.size()) {
    return stream.size() - 1;
  }
  if (lo == 0) {
    return 0;
  }
  return (t - stream[lo - 1].timestamp <= stream[lo].timestamp - t) ? lo - 1 : lo;
}

}  // namespace hvio
