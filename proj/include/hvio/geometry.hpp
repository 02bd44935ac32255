#pragma once

#include <Eigen/Core>

#include "hvio/common.hpp"
#include "hvio/sensors.hpp"

namespace hvio {

/// Pinhole intrinsics in pixels. Pixel centres sit on integer coordinates.
struct CameraIntrinsics {
  double fx = 300.0;
  double fy = 300.0;
  double cx = 160.0;
  double cy = 120.0;

  /// Throws ConfigError unless fx > 0 and fy > 0.
  static CameraIntrinsics make(double fx, double fy, double cx, double cy);

  Eigen::Matrix3d matrix() const;
  Eigen::Matrix3d inverse() const;
  /// Intrinsics of the 2x2 box-downsampled image.
  CameraIntrinsics half() const;
};

/// Axis-angle rotation vector, wrapped so that its norm is at most pi.
class RodriguesVec {
 public:
  RodriguesVec() = default;
  explicit RodriguesVec(const Eigen::Vector3d& v);
  RodriguesVec(double rx, double ry, double rz) : RodriguesVec(Eigen::Vector3d(rx, ry, rz)) {}

  const Eigen::Vector3d& vector() const { return v_; }
  double angle() const { return v_.norm(); }

 private:
  Eigen::Vector3d v_ = Eigen::Vector3d::Zero();
};

/// Unit plane normal as azimuth theta and elevation phi:
/// n = (cos(phi) cos(theta), cos(phi) sin(theta), sin(phi)).
struct PlaneNormal {
  double theta = 0.0;
  double phi = 0.0;

  Eigen::Vector3d vector() const;
  /// Input is normalised first. Throws DimensionError for a zero vector.
  static PlaneNormal from_vector(const Eigen::Vector3d& n);
};

/// The six optimised warp parameters: unscaled translation t = t0 / d and rotation r.
struct WarpParams {
  Eigen::Vector3d t = Eigen::Vector3d::Zero();
  Eigen::Vector3d r = Eigen::Vector3d::Zero();

  Vector6d to_vector() const;
  static WarpParams from_vector(const Vector6d& p);
  bool finite() const { return t.allFinite() && r.allFinite(); }
};

/// Homography with h(2,2) normalised to one.
struct WarpMatrix {
  Eigen::Matrix3d h = Eigen::Matrix3d::Identity();
};

Eigen::Matrix3d skew(const Eigen::Vector3d& v);

Eigen::Matrix3d rodrigues_to_matrix(const RodriguesVec& r);
Eigen::Matrix3d rodrigues_to_matrix(const Eigen::Vector3d& r);
/// Inverse of rodrigues_to_matrix on rotations with angle < pi.
Eigen::Vector3d matrix_to_rodrigues(const Eigen::Matrix3d& rot);

/// Jacobian J with d(R(r) x) / dr = -[R(r) x]_x J(r) (left Jacobian of SO(3)).
Eigen::Matrix3d rotation_left_jacobian(const Eigen::Vector3d& r);

/// H = K (R(r) + t n^T) K^-1, normalised so h(2,2) = 1.
/// R and t map current-frame coordinates into the previous frame; n lives in the current frame.
/// Throws DegenerateWarpError when |det| < 1e-12.
WarpMatrix build_homography(const CameraIntrinsics& k, const WarpParams& p, const PlaneNormal& n);

/// Projective application with homogeneous division. Throws PointAtInfinityError.
Eigen::Vector2d warp_point(const WarpMatrix& h, double x, double y);

/// Parameters of the reverse motion (previous to current) together with the plane normal
/// expressed in the previous frame. Composing both homographies gives the identity.
struct InverseWarp {
  WarpParams params;
  PlaneNormal normal;
};
InverseWarp invert_warp(const WarpParams& p, const PlaneNormal& n);

/// World down-axis expressed in the camera frame, assuming horizontal ground.
PlaneNormal normal_from_attitude(const AhrsAttitude& attitude, const Extrinsics& extr);

/// Camera-to-world rotation for a given IMU attitude.
Eigen::Matrix3d camera_to_world(const AhrsAttitude& attitude, const Extrinsics& extr);

}  // namespace hvio
