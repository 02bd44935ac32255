#include "hvio/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <Eigen/Geometry>
#include <Eigen/LU>

namespace hvio {

Extrinsics Extrinsics::nadir() {
  Extrinsics e;
  e.r_ci << 0.0, -1.0, 0.0,  //
      -1.0, 0.0, 0.0,        //
      0.0, 0.0, -1.0;
  return e;
}

bool is_rotation(const Eigen::Matrix3d& r, double tol) {
  return (r.transpose() * r - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() <= tol &&
         std::abs(r.determinant() - 1.0) <= tol;
}

CameraIntrinsics CameraIntrinsics::make(double fx, double fy, double cx, double cy) {
  if (!(fx > 0.0)) {
    throw ConfigError("fx", "focal length must be positive");
  }
  if (!(fy > 0.0)) {
    throw ConfigError("fy", "focal length must be positive");
  }
  return CameraIntrinsics{fx, fy, cx, cy};
}

Eigen::Matrix3d CameraIntrinsics::matrix() const {
  Eigen::Matrix3d k;
  k << fx, 0.0, cx, 0.0, fy, cy, 0.0, 0.0, 1.0;
  return k;
}

Eigen::Matrix3d CameraIntrinsics::inverse() const {
  Eigen::Matrix3d k;
  k << 1.0 / fx, 0.0, -cx / fx, 0.0, 1.0 / fy, -cy / fy, 0.0, 0.0, 1.0;
  return k;
}

CameraIntrinsics CameraIntrinsics::half() const {
  // Coarse pixel i covers fine pixels 2i and 2i+1, centred at 2i + 0.5.
  return CameraIntrinsics{fx / 2.0, fy / 2.0, (cx - 0.5) / 2.0, (cy - 0.5) / 2.0};
}

RodriguesVec::RodriguesVec(const Eigen::Vector3d& v) : v_(v) {
  const double angle = v.norm();
  if (angle > std::numbers::pi) {
    const Eigen::Vector3d axis = v / angle;
    const double wrapped = std::fmod(angle, 2.0 * std::numbers::pi);
    v_ = wrapped > std::numbers::pi ? Eigen::Vector3d(-axis * (2.0 * std::numbers::pi - wrapped))
                                    : Eigen::Vector3d(axis * wrapped);
  }
}

Eigen::Vector3d PlaneNormal::vector() const {
  const double c = std::cos(phi);
  return {c * std::cos(theta), c * std::sin(theta), std::sin(phi)};
}

PlaneNormal PlaneNormal::from_vector(const Eigen::Vector3d& n) {
  const double norm = n.norm();
  if (!(norm > 0.0)) {
    throw DimensionError("plane normal must be non-zero");
  }
  const Eigen::Vector3d u = n / norm;
  return PlaneNormal{std::atan2(u.y(), u.x()), std::asin(std::clamp(u.z(), -1.0, 1.0))};
}

Vector6d WarpParams::to_vector() const {
  Vector6d p;
  p << t, r;
  return p;
}

WarpParams WarpParams::from_vector(const Vector6d& p) {
  return WarpParams{p.head<3>(), p.tail<3>()};
}

Eigen::Matrix3d skew(const Eigen::Vector3d& v) {
  Eigen::Matrix3d s;
  s << 0.0, -v.z(), v.y(), v.z(), 0.0, -v.x(), -v.y(), v.x(), 0.0;
  return s;
}

Eigen::Matrix3d rodrigues_to_matrix(const Eigen::Vector3d& r) {
  const double theta = r.norm();
  if (theta < 1e-8) {
    return Eigen::Matrix3d::Identity() + skew(r);
  }
  const Eigen::Matrix3d k = skew(r / theta);
  return Eigen::Matrix3d::Identity() + std::sin(theta) * k + (1.0 - std::cos(theta)) * k * k;
}

Eigen::Matrix3d rodrigues_to_matrix(const RodriguesVec& r) { return rodrigues_to_matrix(r.vector()); }

Eigen::Vector3d matrix_to_rodrigues(const Eigen::Matrix3d& rot) {
  const Eigen::AngleAxisd aa(rot);
  return aa.angle() * aa.axis();
}

Eigen::Matrix3d rotation_left_jacobian(const Eigen::Vector3d& r) {
  const double theta = r.norm();
  const Eigen::Matrix3d s = skew(r);
  if (theta < 1e-8) {
    return Eigen::Matrix3d::Identity() + 0.5 * s;
  }
  const double t2 = theta * theta;
  return Eigen::Matrix3d::Identity() + (1.0 - std::cos(theta)) / t2 * s +
         (theta - std::sin(theta)) / (t2 * theta) * s * s;
}

WarpMatrix build_homography(const CameraIntrinsics& k, const WarpParams& p, const PlaneNormal& n) {
  const Eigen::Matrix3d euclidean = rodrigues_to_matrix(p.r) + p.t * n.vector().transpose();
  if (std::abs(euclidean.determinant()) < 1e-12) {
    throw DegenerateWarpError("homography is singular (translation collapses the plane)");
  }
  Eigen::Matrix3d h = k.matrix() * euclidean * k.inverse();
  if (std::abs(h(2, 2)) < 1e-12) {
    throw DegenerateWarpError("homography cannot be normalised (h22 = 0)");
  }
  h /= h(2, 2);
  return WarpMatrix{h};
}

Eigen::Vector2d warp_point(const WarpMatrix& h, double x, double y) {
  const Eigen::Vector3d u = h.h * Eigen::Vector3d(x, y, 1.0);
  if (std::abs(u.z()) < 1e-12) {
    throw PointAtInfinityError("warped point is at infinity");
  }
  return {u.x() / u.z(), u.y() / u.z()};
}

InverseWarp invert_warp(const WarpParams& p, const PlaneNormal& n) {
  const Eigen::Matrix3d rot = rodrigues_to_matrix(p.r);
  const Eigen::Vector3d n_prev = rot * n.vector();
  const double scale = 1.0 + n_prev.dot(p.t);
  if (std::abs(scale) < 1e-12) {
    throw DegenerateWarpError("warp cannot be inverted");
  }
  InverseWarp inv;
  inv.params.r = -p.r;
  inv.params.t = -rot.transpose() * p.t / scale;
  inv.normal = PlaneNormal::from_vector(n_prev);
  return inv;
}

Eigen::Matrix3d camera_to_world(const AhrsAttitude& attitude, const Extrinsics& extr) {
  return attitude.rotation * extr.r_ci.transpose();
}

PlaneNormal normal_from_attitude(const AhrsAttitude& attitude, const Extrinsics& extr) {
  const Eigen::Vector3d down_world(0.0, 0.0, -1.0);
  return PlaneNormal::from_vector(extr.r_ci * attitude.rotation.transpose() * down_world);
}

}  // namespace hvio
