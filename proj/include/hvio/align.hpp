#pragma once

#include <cstddef>
#include <optional>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "hvio/common.hpp"
#include "hvio/fusion.hpp"
#include "hvio/geometry.hpp"
#include "hvio/image.hpp"

namespace hvio {

/// Gauss-Newton settings. `w_diag` is the diagonal of the penalty pulling the solution
/// towards the inertial prior, in intensity^2 per parameter unit^2.
struct AlignConfig {
  Vector6d w_diag = (Vector6d() << 0.0, 0.0, 0.0, 1e3, 1e3, 1e3).finished();
  int max_iters = 30;
  double step_tol = 1e-6;
  double cost_tol = 1e-7;
  std::size_t min_pixels = 100;
  double max_residual_drop_fraction = 0.5;
  bool pyramid = false;  ///< optional 2-level coarse-to-fine pass

  /// Throws ConfigError naming the first invalid field.
  void validate() const;
};

struct PixelSelection {
  std::size_t budget = 2000;
  double threshold = 0.005;  ///< intensity per pixel
};

struct AlignPrior {
  WarpParams p0;
};

enum class AlignFailure { too_few_pixels, diverged, max_iters };

std::string_view to_string(AlignFailure f);

struct AlignResult {
  WarpParams p;
  int iterations = 0;
  double final_cost = 0.0;  ///< photometric SSD plus prior penalty at p
  std::size_t pixels_used = 0;
  bool converged = false;
  std::optional<AlignFailure> failure_reason;
};

/// Stacked residuals I(warp(X'_j; p)) - I'(X'_j) over the pixels whose warp stays inside the
/// previous image, and their derivative with respect to p = [t; r].
struct PhotometricResiduals {
  Eigen::VectorXd residuals;
  Eigen::Matrix<double, Eigen::Dynamic, 6> jacobian;
  std::vector<std::size_t> kept_indices;  ///< positions into the input PixelSet
  std::size_t kept() const { return kept_indices.size(); }
};

/// Throws InsufficientOverlapError when fewer than `min_pixels` survive.
PhotometricResiduals photometric_residuals(const GrayImage& prev, const GrayImage& curr,
                                           const PixelSet& pixels, const WarpParams& p,
                                           const CameraIntrinsics& k, const PlaneNormal& n,
                                           std::size_t min_pixels = 1);

/// SSD photometric term (rescaled by total / kept pixels) plus (p - p0)^T W (p - p0).
/// std::nullopt when no pixel survives.
std::optional<double> alignment_cost(const GrayImage& prev, const GrayImage& curr,
                                     const PixelSet& pixels, const WarpParams& p,
                                     const AlignPrior& prior, const Vector6d& w_diag,
                                     const CameraIntrinsics& k, const PlaneNormal& n);

/// Forward-additive Gauss-Newton on the joint photometric + prior cost, starting from `start`
/// (defaults to the prior). Returns the lowest-cost iterate.
AlignResult gauss_newton_align(const GrayImage& prev, const GrayImage& curr,
                               const PixelSet& pixels, const AlignPrior& prior,
                               const AlignConfig& cfg, const CameraIntrinsics& k,
                               const PlaneNormal& n,
                               const std::optional<WarpParams>& start = std::nullopt);

/// Selects high-gradient pixels on `curr` and aligns, optionally coarse-to-fine.
AlignResult align_frames(const GrayImage& prev, const GrayImage& curr, const AlignPrior& prior,
                         const AlignConfig& cfg, const PixelSelection& selection,
                         const CameraIntrinsics& k, const PlaneNormal& n);

/// Initial guess: camera-frame relative rotation from the two AHRS attitudes, and
/// translation v * dt / d from the previous filter state when one is available.
AlignPrior prior_from_imu(const AhrsAttitude& ahrs_prev, const AhrsAttitude& ahrs_curr,
                          const std::optional<EkfState>& prev_state, double dt,
                          const Extrinsics& extr, bool use_velocity = true);

}  // namespace hvio
