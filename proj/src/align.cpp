#include "hvio/align.hpp"

#include <cmath>

#include <Eigen/Cholesky>
#include <Eigen/Geometry>

namespace hvio {

void AlignConfig::validate() const {
  if ((w_diag.array() < 0.0).any() || !w_diag.allFinite()) {
    throw ConfigError("w_diag", "penalty weights must be finite and non-negative");
  }
  if (max_iters < 1) {
    throw ConfigError("max_iters", "must be at least 1");
  }
  if (!(step_tol > 0.0)) {
    throw ConfigError("step_tol", "must be positive");
  }
  if (!(cost_tol > 0.0)) {
    throw ConfigError("cost_tol", "must be positive");
  }
  if (min_pixels < 1) {
    throw ConfigError("min_pixels", "must be at least 1");
  }
  if (!(max_residual_drop_fraction >= 0.0 && max_residual_drop_fraction <= 1.0)) {
    throw ConfigError("max_residual_drop_fraction", "must lie in [0, 1]");
  }
}

std::string_view to_string(AlignFailure f) {
  switch (f) {
    case AlignFailure::too_few_pixels:
      return "too_few_pixels";
    case AlignFailure::diverged:
      return "diverged";
    case AlignFailure::max_iters:
      return "max_iters";
  }
  return "unknown";
}

namespace {

using JacobianRow = Eigen::Matrix<double, 1, 6>;

constexpr double kStallBand = 1e-2;

// Plane-induced warp of normalised rays, with the pieces the analytic derivative needs.
class PlaneWarp {
 public:
  PlaneWarp(const CameraIntrinsics& k, const WarpParams& p, const PlaneNormal& n)
      : k_(k),
        rot_(rodrigues_to_matrix(p.r)),
        t_(p.t),
        n_(n.vector()),
        left_jac_(rotation_left_jacobian(p.r)) {}

  // Calls fn(index, residual, row) for every pixel whose warp lands inside `prev`.
  template <typename Fn>
  void for_each(const GrayImage& prev, const GrayImage& curr, const PixelSet& pixels,
                bool want_jacobian, Fn&& fn) const {
    for (std::size_t j = 0; j < pixels.coords.size(); ++j) {
      const Pixel& px = pixels.coords[j];
      const Eigen::Vector3d q((px.x - k_.cx) / k_.fx, (px.y - k_.cy) / k_.fy, 1.0);
      const Eigen::Vector3d rq = rot_ * q;
      const double nq = n_.dot(q);
      const Eigen::Vector3d m = rq + t_ * nq;
      if (!(m.z() > 1e-9)) {
        continue;
      }
      const double inv_z = 1.0 / m.z();
      // Offset form keeps the identity warp exact.
      const double x = px.x + k_.fx * (m.x() * inv_z - q.x());
      const double y = px.y + k_.fy * (m.y() * inv_z - q.y());
      const auto s = sample_bilinear_with_gradient(prev, x, y);
      if (!s) {
        continue;
      }
      const auto reference = sample_bilinear(curr, px.x, px.y);
      if (!reference) {
        continue;
      }
      const double residual = s->value - *reference;
      JacobianRow row = JacobianRow::Zero();
      if (want_jacobian) {
        const double a = s->dx * k_.fx * inv_z;
        const double b = s->dy * k_.fy * inv_z;
        const Eigen::Vector3d w(a, b, -(a * m.x() + b * m.y()) * inv_z);
        row.head<3>() = nq * w.transpose();
        row.tail<3>() = rq.cross(w).transpose() * left_jac_;
      }
      fn(j, residual, row);
    }
  }

 private:
  CameraIntrinsics k_;
  Eigen::Matrix3d rot_;
  Eigen::Vector3d t_;
  Eigen::Vector3d n_;
  Eigen::Matrix3d left_jac_;
};

// Photometric sums are rescaled by total / kept so that costs stay comparable when pixels
// leave the image between iterations.
struct NormalEquations {
  Matrix6d jtj = Matrix6d::Zero();
  Vector6d jtr = Vector6d::Zero();
  double ssd = 0.0;
  std::size_t kept = 0;
  std::vector<std::size_t> kept_indices;
};

NormalEquations accumulate(const GrayImage& prev, const GrayImage& curr, const PixelSet& pixels,
                           std::size_t total, const WarpParams& p, const CameraIntrinsics& k,
                           const PlaneNormal& n) {
  NormalEquations ne;
  PlaneWarp(k, p, n).for_each(prev, curr, pixels, true,
                              [&](std::size_t j, double r, const JacobianRow& row) {
                                ne.jtj.selfadjointView<Eigen::Upper>().rankUpdate(row.transpose());
                                ne.jtr += row.transpose() * r;
                                ne.ssd += r * r;
                                ne.kept_indices.push_back(j);
                                ++ne.kept;
                              });
  ne.jtj = ne.jtj.selfadjointView<Eigen::Upper>();
  if (ne.kept > 0) {
    const double scale = static_cast<double>(total) / static_cast<double>(ne.kept);
    ne.jtj *= scale;
    ne.jtr *= scale;
    ne.ssd *= scale;
  }
  return ne;
}

double penalty(const WarpParams& p, const AlignPrior& prior, const Vector6d& w_diag) {
  const Vector6d dp = p.to_vector() - prior.p0.to_vector();
  return dp.dot(w_diag.cwiseProduct(dp));
}

bool too_many_dropped(std::size_t kept, std::size_t total, const AlignConfig& cfg) {
  const double dropped = static_cast<double>(total - kept);
  return kept < cfg.min_pixels || dropped > cfg.max_residual_drop_fraction * total;
}

AlignResult failure(const AlignPrior& prior, AlignFailure reason, int iterations) {
  AlignResult r;
  r.p = prior.p0;
  r.iterations = iterations;
  r.converged = false;
  r.failure_reason = reason;
  return r;
}

}  // namespace

PhotometricResiduals photometric_residuals(const GrayImage& prev, const GrayImage& curr,
                                           const PixelSet& pixels, const WarpParams& p,
                                           const CameraIntrinsics& k, const PlaneNormal& n,
                                           std::size_t min_pixels) {
  if (prev.width() != curr.width() || prev.height() != curr.height()) {
    throw DimensionError("previous and current images differ in size");
  }
  std::vector<double> residuals;
  std::vector<JacobianRow> rows;
  PhotometricResiduals out;
  PlaneWarp(k, p, n).for_each(prev, curr, pixels, true,
                              [&](std::size_t j, double r, const JacobianRow& row) {
                                out.kept_indices.push_back(j);
                                residuals.push_back(r);
                                rows.push_back(row);
                              });
  if (out.kept() < min_pixels) {
    throw InsufficientOverlapError("only " + std::to_string(out.kept()) +
                                   " pixels remain inside the previous image");
  }
  out.residuals = Eigen::Map<const Eigen::VectorXd>(residuals.data(),
                                                    static_cast<Eigen::Index>(residuals.size()));
  out.jacobian.resize(static_cast<Eigen::Index>(rows.size()), 6);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.jacobian.row(static_cast<Eigen::Index>(i)) = rows[i];
  }
  return out;
}

std::optional<double> alignment_cost(const GrayImage& prev, const GrayImage& curr,
                                     const PixelSet& pixels, const WarpParams& p,
                                     const AlignPrior& prior, const Vector6d& w_diag,
                                     const CameraIntrinsics& k, const PlaneNormal& n) {
  double ssd = 0.0;
  std::size_t kept = 0;
  PlaneWarp(k, p, n).for_each(prev, curr, pixels, false,
                              [&](std::size_t, double r, const JacobianRow&) {
                                ssd += r * r;
                                ++kept;
                              });
  if (kept == 0) {
    return std::nullopt;
  }
  ssd *= static_cast<double>(pixels.size()) / static_cast<double>(kept);
  return ssd + penalty(p, prior, w_diag);
}

AlignResult gauss_newton_align(const GrayImage& prev, const GrayImage& curr,
                               const PixelSet& pixels, const AlignPrior& prior,
                               const AlignConfig& cfg, const CameraIntrinsics& k,
                               const PlaneNormal& n, const std::optional<WarpParams>& start) {
  cfg.validate();
  if (prev.width() != curr.width() || prev.height() != curr.height()) {
    throw DimensionError("previous and current images differ in size");
  }
  if (!prior.p0.finite()) {
    throw ConfigError("p0", "prior must be finite");
  }
  const std::size_t total = pixels.size();
  if (total == 0 || total < cfg.min_pixels) {
    return failure(prior, AlignFailure::too_few_pixels, 0);
  }

  const Matrix6d w = cfg.w_diag.asDiagonal();
  const Vector6d p0 = prior.p0.to_vector();

  WarpParams p = start.value_or(prior.p0);
  NormalEquations ne = accumulate(prev, curr, pixels, total, p, k, n);
  if (too_many_dropped(ne.kept, total, cfg)) {
    return failure(prior, AlignFailure::too_few_pixels, 0);
  }
  // Pixels outside the image at the start stay out, so the cost never jumps when one enters.
  PixelSet active;
  active.source_timestamp = pixels.source_timestamp;
  active.coords.reserve(ne.kept);
  for (std::size_t j : ne.kept_indices) {
    active.coords.push_back(pixels.coords[j]);
  }
  double cost = ne.ssd + penalty(p, prior, cfg.w_diag);

  AlignResult best;
  best.p = p;
  best.final_cost = cost;
  best.pixels_used = ne.kept;

  int increases = 0;
  int since_best = 0;
  double worst_since_best = 0.0;
  for (int it = 1; it <= cfg.max_iters; ++it) {
    const Vector6d pv = p.to_vector();
    const Matrix6d hessian = ne.jtj + w;
    const Vector6d rhs = -ne.jtr + w * (p0 - pv);
    const Eigen::LLT<Matrix6d> llt(hessian);
    if (llt.info() != Eigen::Success) {
      return failure(prior, AlignFailure::diverged, it);
    }
    const Vector6d step = llt.solve(rhs);
    if (!step.allFinite()) {
      return failure(prior, AlignFailure::diverged, it);
    }
    const WarpParams next = WarpParams::from_vector(pv + step);

    NormalEquations next_ne = accumulate(prev, curr, active, total, next, k, n);
    if (too_many_dropped(next_ne.kept, total, cfg)) {
      return failure(prior, AlignFailure::too_few_pixels, it);
    }
    const double next_cost = next_ne.ssd + penalty(next, prior, cfg.w_diag);
    if (next_cost < best.final_cost) {
      best.p = next;
      best.final_cost = next_cost;
      best.pixels_used = next_ne.kept;
      since_best = 0;
      worst_since_best = 0.0;
    } else {
      ++since_best;
      worst_since_best = std::max(worst_since_best, next_cost);
    }
    best.iterations = it;

    // Bouncing around the minimum at the interpolation noise floor counts as converged.
    if (since_best >= 3 && worst_since_best <= best.final_cost * (1.0 + kStallBand)) {
      best.converged = true;
      return best;
    }
    increases = next_cost > cost ? increases + 1 : 0;
    if (increases >= 3) {
      return failure(prior, AlignFailure::diverged, it);
    }
    const bool small_step = step.norm() < cfg.step_tol;
    const bool flat = std::abs(cost - next_cost) < cfg.cost_tol * std::max(cost, 1e-300);
    p = next;
    ne = std::move(next_ne);
    cost = next_cost;
    if (small_step || flat) {
      best.converged = true;
      return best;
    }
  }
  best.converged = false;
  best.failure_reason = AlignFailure::max_iters;
  return best;
}

AlignResult align_frames(const GrayImage& prev, const GrayImage& curr, const AlignPrior& prior,
                         const AlignConfig& cfg, const PixelSelection& selection,
                         const CameraIntrinsics& k, const PlaneNormal& n) {
  std::optional<WarpParams> start;
  if (cfg.pyramid) {
    const GrayImage prev_c = prev.downsample();
    const GrayImage curr_c = curr.downsample();
    const PixelSet coarse = select_pixels(gradient(curr_c), selection.budget, selection.threshold);
    const AlignResult r = gauss_newton_align(prev_c, curr_c, coarse, prior, cfg, k.half(), n);
    if (!r.failure_reason || r.failure_reason == AlignFailure::max_iters) {
      start = r.p;
    }
  }
  PixelSet pixels = select_pixels(gradient(curr), selection.budget, selection.threshold);
  pixels.source_timestamp = curr.timestamp();
  return gauss_newton_align(prev, curr, pixels, prior, cfg, k, n, start);
}

AlignPrior prior_from_imu(const AhrsAttitude& ahrs_prev, const AhrsAttitude& ahrs_curr,
                          const std::optional<EkfState>& prev_state, double dt,
                          const Extrinsics& extr, bool use_velocity) {
  if (!(dt > 0.0)) {
    throw ConfigError("dt", "inter-frame interval must be positive");
  }
  // Current camera frame -> previous camera frame.
  const Eigen::Matrix3d relative = extr.r_ci * ahrs_prev.rotation.transpose() *
                                   ahrs_curr.rotation * extr.r_ci.transpose();
  AlignPrior prior;
  prior.p0.r = matrix_to_rodrigues(relative);
  if (use_velocity && prev_state && prev_state->d > 0.0) {
    prior.p0.t = prev_state->v * dt / prev_state->d;
  }
  return prior;
}

}  // namespace hvio
