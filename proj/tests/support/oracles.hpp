#pragma once

// Independent reference computations shared by the unit and acceptance suites.

#include <cstdint>
#include <random>

#include <Eigen/Core>

#include "hvio/align.hpp"
#include "hvio/evalkit.hpp"
#include "hvio/fusion.hpp"
#include "hvio/geometry.hpp"
#include "hvio/image.hpp"
#include "hvio/simsynth.hpp"

namespace hvio::testing {

/// Smooth sum of plane waves with wavelengths >= 10 px, values in [0.1, 0.9].
/// The pattern is evaluated at (x - shift_x, y).
GrayImage wave_image(int width, int height, std::uint64_t seed, double shift_x = 0.0);

/// Rotation matrix through the unit quaternion (cos(a/2), sin(a/2) axis).
Eigen::Matrix3d quaternion_rotation(const Eigen::Vector3d& r);

/// Static nadir camera 2 m above a noise-textured horizontal plane.
ScenarioSpec hover_spec(std::uint64_t seed = 7);

struct RenderedPair {
  GrayImage prev;
  GrayImage curr;
  WarpParams truth;
  PlaneNormal normal;  ///< true normal in the current camera frame
  CameraIntrinsics k;
};

/// Renders the previous frame at the scenario's t = 0 pose and the current frame at the pose
/// displaced by `truth` (current -> previous rotation R, unscaled translation t0 / d).
RenderedPair render_pair(const Scenario& scenario, const WarpParams& truth);

/// Uniform direction, uniform magnitude up to the given bounds.
WarpParams random_warp(std::mt19937_64& rng, double t_max = 0.05, double r_max = 0.02);

/// Frobenius relative error of the analytic photometric Jacobian against central differences.
/// Rows whose stencil crosses a bilinear cell boundary are skipped for that parameter, since
/// the residual is not differentiable there.
double photometric_jacobian_error(const GrayImage& prev, const GrayImage& curr,
                                  const PixelSet& pixels, const WarpParams& p,
                                  const CameraIntrinsics& k, const PlaneNormal& n,
                                  double h = 1e-7);

struct EkfJacobianError {
  double g = 0.0;
  double v = 0.0;
};

/// Relative errors of G and V against central differences of propagate_state.
EkfJacobianError ekf_jacobian_error(const EkfState& state, const ImuSample& imu,
                                    const AhrsAttitude& attitude, const PlaneNormal& n,
                                    const Extrinsics& extr, double tau);

struct EkfSweepCase {
  EkfState state;
  ImuSample imu;
  AhrsAttitude attitude;
  PlaneNormal normal;
  Extrinsics extr;
  double tau = 0.005;
};

EkfSweepCase random_ekf_case(std::mt19937_64& rng);

/// Random symmetric positive-definite 7x7 matrix with eigenvalues in [lo, hi].
Matrix7d random_spd(std::mt19937_64& rng, double lo, double hi);

/// Straight line along world x at `speed` m/s with identity attitude, samples t = i * dt.
/// Positions are scaled by `scale` and shifted by `offset`.
TrajectoryTrack straight_track(int samples, double dt, double speed, double scale = 1.0,
                               const Eigen::Vector3d& offset = Eigen::Vector3d::Zero());

/// Applies x -> R x + t to every position and R to every attitude.
TrajectoryTrack transform_track(const TrajectoryTrack& track, const Eigen::Matrix3d& r,
                                const Eigen::Vector3d& t);

struct ZigZagCase {
  TrajectoryTrack truth;     ///< 10 m along x
  TrajectoryTrack estimate;  ///< lateral offsets of +-0.1 m in the sign pattern + - - +
};

/// The sign pattern has zero mean and zero correlation with x, so the optimal alignment is the
/// identity and the xy RMSE is exactly 0.1 m.
ZigZagCase zigzag_case();

}  // namespace hvio::testing
