#pragma once

#include <optional>
#include <vector>

#include <Eigen/Core>

#include "hvio/common.hpp"
#include "hvio/geometry.hpp"
#include "hvio/sensors.hpp"

namespace hvio {

/// Filter state: camera-frame velocity, distance to the ground plane, IMU-frame accel bias.
struct EkfState {
  Eigen::Vector3d v = Eigen::Vector3d::Zero();
  double d = 1.0;
  Eigen::Vector3d b = Eigen::Vector3d::Zero();

  Vector7d to_vector() const;
  static EkfState from_vector(const Vector7d& x);
  bool finite() const { return v.allFinite() && std::isfinite(d) && b.allFinite(); }
};

using EkfCovariance = Matrix7d;

/// Symmetric to 1e-10 and eigenvalues >= -1e-10.
bool is_valid_covariance(const Matrix7d& sigma, double tol = 1e-10);

struct NoiseConfig {
  Eigen::Matrix3d cov_f = Eigen::Matrix3d::Identity() * 0.25;          ///< (m/s^2)^2
  Eigen::Matrix3d cov_omega = Eigen::Matrix3d::Identity() * 1e-4;      ///< (rad/s)^2
  Eigen::Matrix4d cov_z = Eigen::Vector4d(1e-3, 1e-3, 1e-3, 1e-4).asDiagonal();
};

/// One image-rate measurement: unscaled inter-frame translation plus an optional range reading.
struct FusionMeasurement {
  Eigen::Vector3d t_m = Eigen::Vector3d::Zero();
  std::optional<double> l_m;  ///< m; absent -> translation-only update
  double n_z = 1.0;
  double tau = 0.0;  ///< s since the previous image

  /// Throws ConfigError when tau <= 0, l_m <= 0 or |n_z| > 1.
  void validate() const;
};

struct FilterOptions {
  double g0 = kGravity;
  double d_min = 0.01;  ///< predicted distances are clamped here
  bool estimate_bias = true;
  bool gate_enabled = true;
  double gate_threshold = 16.27;
};

struct PredictResult {
  EkfState state;
  Matrix7d cov;
  bool clamped = false;  ///< predicted d was non-positive and got clamped to d_min
};

/// Partial derivatives of the prediction map w.r.t. the state (G, 7x7) and the raw
/// IMU inputs f_m, omega_m (V, 7x6).
struct PredictJacobians {
  Matrix7d g;
  Eigen::Matrix<double, 7, 6> v;
};

/// Deterministic part of the prediction (no clamping).
EkfState propagate_state(const EkfState& state, const ImuSample& imu, const AhrsAttitude& attitude,
                         const PlaneNormal& n, const Extrinsics& extr, double tau,
                         double g0 = kGravity);

PredictJacobians prediction_jacobians(const EkfState& state, const ImuSample& imu,
                                      const PlaneNormal& n, const Extrinsics& extr, double tau);

/// Camera-frame velocity derivative using f = f_m - b.
Eigen::Vector3d velocity_derivative(const EkfState& state, const ImuSample& imu,
                                    const AhrsAttitude& attitude, const Extrinsics& extr,
                                    double g0 = kGravity);

PredictResult predict(const EkfState& state, const Matrix7d& cov, const ImuSample& imu,
                      const AhrsAttitude& attitude, const PlaneNormal& n, const Extrinsics& extr,
                      double tau, const NoiseConfig& noise, const FilterOptions& opts = {});

/// Strict chi-square test: accept iff innovation^T S^-1 innovation < threshold.
bool chi2_gate(const Eigen::VectorXd& innovation, const Eigen::MatrixXd& innovation_cov,
               double threshold = 16.27);

struct UpdateResult {
  EkfState state;
  Matrix7d cov;
  Eigen::VectorXd innovation;      ///< 4 entries, or 3 for translation-only updates
  Eigen::MatrixXd innovation_cov;
  bool accepted = false;
  bool rejected_singular = false;  ///< S was not invertible
  bool rejected_gate = false;
};

/// Predicted measurement [v/d; d].
Eigen::Vector4d predicted_measurement(const EkfState& state);
/// Measurement Jacobian with rows d(v/d)/dx and d(d)/dx.
Eigen::Matrix<double, 4, 7> measurement_jacobian(const EkfState& state);

UpdateResult update(const EkfState& state, const Matrix7d& cov, const FusionMeasurement& meas,
                    const NoiseConfig& noise, const FilterOptions& opts = {});

/// Sequential filter driven by IMU samples and image-rate measurements.
/// IMU readings are held constant until the next sample arrives.
class FusionFilter {
 public:
  FusionFilter(const EkfState& init, const Matrix7d& cov0, const NoiseConfig& noise,
               const Extrinsics& extr, const FilterOptions& opts = {});

  /// Propagates to the sample's timestamp with the previously held reading, then holds it.
  /// Throws StreamError on non-monotonic timestamps.
  void add_imu(const ImuSample& imu, const AhrsAttitude& attitude);
  /// Propagates with the held reading up to time t (no-op before the first IMU sample).
  void propagate_to(double t);
  UpdateResult apply(const FusionMeasurement& meas);

  const EkfState& state() const { return state_; }
  const Matrix7d& covariance() const { return cov_; }
  double time() const { return time_; }
  bool clamped() const { return clamped_; }
  const std::optional<ImuSample>& held_imu() const { return imu_; }
  const std::optional<AhrsAttitude>& held_attitude() const { return attitude_; }

 private:
  EkfState state_;
  Matrix7d cov_;
  NoiseConfig noise_;
  Extrinsics extr_;
  FilterOptions opts_;
  std::optional<ImuSample> imu_;
  std::optional<AhrsAttitude> attitude_;
  double time_ = 0.0;
  bool started_ = false;
  bool clamped_ = false;
};

/// Image-timestamp measurement slot; an empty measurement means the frame produced nothing
/// (tracking failure) and the filter only predicts through it.
struct ImageMeasurement {
  double timestamp = 0.0;
  std::optional<FusionMeasurement> meas;
};

struct FilterSample {
  double timestamp = 0.0;
  EkfState state;
  Matrix7d cov;
  bool accepted = false;
};

/// Batch driver: predicts on every IMU sample and updates at every image timestamp.
/// The AHRS stream must share timestamps with the IMU stream.
std::vector<FilterSample> run_filter(const std::vector<ImuSample>& imu,
                                     const std::vector<AhrsAttitude>& ahrs,
                                     const std::vector<ImageMeasurement>& measurements,
                                     const EkfState& init, const Matrix7d& cov0,
                                     const NoiseConfig& noise, const Extrinsics& extr,
                                     const FilterOptions& opts = {});

/// Initial covariance from per-block variances (v, d, b).
Matrix7d initial_covariance(double var_v, double var_d, double var_b);

}  // namespace hvio
