#include "hvio/fusion.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

namespace hvio {

Vector7d EkfState::to_vector() const {
  Vector7d x;
  x << v, d, b;
  return x;
}

EkfState EkfState::from_vector(const Vector7d& x) {
  return EkfState{x.head<3>(), x(3), x.tail<3>()};
}

bool is_valid_covariance(const Matrix7d& sigma, double tol) {
  if (!sigma.allFinite()) {
    return false;
  }
  if ((sigma - sigma.transpose()).cwiseAbs().maxCoeff() > tol) {
    return false;
  }
  const Eigen::SelfAdjointEigenSolver<Matrix7d> eig(sigma, Eigen::EigenvaluesOnly);
  return eig.eigenvalues().minCoeff() >= -tol;
}

void FusionMeasurement::validate() const {
  if (!(tau > 0.0)) {
    throw ConfigError("tau", "inter-image gap must be positive");
  }
  if (l_m && !(*l_m > 0.0)) {
    throw ConfigError("l_m", "range reading must be positive");
  }
  if (!(std::abs(n_z) <= 1.0)) {
    throw ConfigError("n_z", "normal z-component must lie in [-1, 1]");
  }
}

Eigen::Vector3d velocity_derivative(const EkfState& state, const ImuSample& imu,
                                    const AhrsAttitude& attitude, const Extrinsics& extr,
                                    double g0) {
  const Eigen::Vector3d& w = imu.omega_m;
  const Eigen::Vector3d lever = w.cross(w.cross(extr.p_ic));
  const Eigen::Vector3d f = imu.f_m - state.b;
  const Eigen::Vector3d w_cam = extr.r_ci * w;
  return extr.r_ci * (f + attitude.gravity_in_imu(g0) + lever) - w_cam.cross(state.v);
}

EkfState propagate_state(const EkfState& state, const ImuSample& imu, const AhrsAttitude& attitude,
                         const PlaneNormal& n, const Extrinsics& extr, double tau, double g0) {
  EkfState next = state;
  next.v = state.v + tau * velocity_derivative(state, imu, attitude, extr, g0);
  // Moving along the normal (towards the ground) shortens the distance.
  next.d = state.d - tau * state.v.dot(n.vector());
  next.b = state.b;
  return next;
}

PredictJacobians prediction_jacobians(const EkfState& state, const ImuSample& imu,
                                      const PlaneNormal& n, const Extrinsics& extr, double tau) {
  const Eigen::Matrix3d& rci = extr.r_ci;
  const Eigen::Vector3d& w = imu.omega_m;
  const Eigen::Vector3d& p = extr.p_ic;

  PredictJacobians jac;
  jac.g.setIdentity();
  jac.g.block<3, 3>(0, 0) -= tau * skew(rci * w);
  jac.g.block<3, 3>(0, 4) = -tau * rci;
  jac.g.block<1, 3>(3, 0) = -tau * n.vector().transpose();

  const Eigen::Matrix3d m = w.dot(p) * Eigen::Matrix3d::Identity() + w * p.transpose() -
                            2.0 * p * w.transpose();
  jac.v.setZero();
  jac.v.block<3, 3>(0, 0) = tau * rci;
  jac.v.block<3, 3>(0, 3) = tau * (rci * m + skew(state.v) * rci);
  return jac;
}

namespace {

Matrix7d symmetrized(const Matrix7d& m) { return 0.5 * (m + m.transpose()); }

void freeze_bias(EkfState& state, Matrix7d& cov) {
  state.b.setZero();
  cov.block<3, 7>(4, 0).setZero();
  cov.block<7, 3>(0, 4).setZero();
}

}  // namespace

PredictResult predict(const EkfState& state, const Matrix7d& cov, const ImuSample& imu,
                      const AhrsAttitude& attitude, const PlaneNormal& n, const Extrinsics& extr,
                      double tau, const NoiseConfig& noise, const FilterOptions& opts) {
  if (!(tau > 0.0)) {
    throw ConfigError("tau", "prediction step must be positive");
  }
  PredictResult out;
  out.state = propagate_state(state, imu, attitude, n, extr, tau, opts.g0);
  const PredictJacobians jac = prediction_jacobians(state, imu, n, extr, tau);
  Matrix6d q = Matrix6d::Zero();
  q.block<3, 3>(0, 0) = noise.cov_f;
  q.block<3, 3>(3, 3) = noise.cov_omega;
  out.cov = symmetrized(jac.g * cov * jac.g.transpose() + jac.v * q * jac.v.transpose());
  if (!opts.estimate_bias) {
    freeze_bias(out.state, out.cov);
  }
  if (out.state.d <= 0.0) {
    out.state.d = opts.d_min;
    out.clamped = true;
  }
  return out;
}

bool chi2_gate(const Eigen::VectorXd& innovation, const Eigen::MatrixXd& innovation_cov,
               double threshold) {
  const Eigen::LLT<Eigen::MatrixXd> llt(innovation_cov);
  if (llt.info() != Eigen::Success) {
    return false;
  }
  const double mahalanobis = innovation.dot(llt.solve(innovation));
  return mahalanobis < threshold;
}

Eigen::Vector4d predicted_measurement(const EkfState& state) {
  Eigen::Vector4d z;
  z << state.v / state.d, state.d;
  return z;
}

Eigen::Matrix<double, 4, 7> measurement_jacobian(const EkfState& state) {
  Eigen::Matrix<double, 4, 7> j = Eigen::Matrix<double, 4, 7>::Zero();
  j.block<3, 3>(0, 0) = Eigen::Matrix3d::Identity() / state.d;
  j.block<3, 1>(0, 3) = -state.v / (state.d * state.d);
  j(3, 3) = 1.0;
  return j;
}

UpdateResult update(const EkfState& state, const Matrix7d& cov, const FusionMeasurement& meas,
                    const NoiseConfig& noise, const FilterOptions& opts) {
  meas.validate();
  if (!(state.d > 0.0)) {
    throw ConfigError("d", "predicted plane distance must be positive");
  }
  const int rows = meas.l_m ? 4 : 3;
  Eigen::Vector4d z;
  z << meas.t_m / meas.tau, meas.l_m.value_or(0.0) * meas.n_z;

  const Eigen::MatrixXd j = measurement_jacobian(state).topRows(rows);
  const Eigen::VectorXd innovation = (z - predicted_measurement(state)).head(rows);
  const Eigen::MatrixXd r = noise.cov_z.topLeftCorner(rows, rows);
  const Eigen::MatrixXd s = j * cov * j.transpose() + r;

  UpdateResult out;
  out.state = state;
  out.cov = cov;
  out.innovation = innovation;
  out.innovation_cov = s;

  const Eigen::LLT<Eigen::MatrixXd> llt(s);
  if (llt.info() != Eigen::Success || !s.allFinite()) {
    out.rejected_singular = true;
    return out;
  }
  if (opts.gate_enabled && !chi2_gate(innovation, s, opts.gate_threshold)) {
    out.rejected_gate = true;
    return out;
  }
  // K = Sigma J^T S^-1, computed as (S^-1 J Sigma)^T since S and Sigma are symmetric.
  const Eigen::MatrixXd gain = llt.solve(j * cov).transpose();
  out.state = EkfState::from_vector(state.to_vector() + gain * innovation);
  out.cov = symmetrized((Matrix7d::Identity() - gain * j) * cov);
  if (!opts.estimate_bias) {
    freeze_bias(out.state, out.cov);
  }
  out.state.d = std::max(out.state.d, opts.d_min);
  out.accepted = true;
  return out;
}

FusionFilter::FusionFilter(const EkfState& init, const Matrix7d& cov0, const NoiseConfig& noise,
                           const Extrinsics& extr, const FilterOptions& opts)
    : state_(init), cov_(cov0), noise_(noise), extr_(extr), opts_(opts) {
  if (!(init.d > 0.0) || !init.finite()) {
    throw ConfigError("init", "initial state must be finite with positive distance");
  }
  if (!opts_.estimate_bias) {
    freeze_bias(state_, cov_);
  }
}

void FusionFilter::propagate_to(double t) {
  if (started_ && t < time_) {
    throw StreamError("filter time cannot move backwards");
  }
  if (!imu_ || !attitude_) {
    time_ = t;
    started_ = true;
    return;
  }
  const double tau = t - time_;
  if (tau > 0.0) {
    const PredictResult r = predict(state_, cov_, *imu_, *attitude_,
                                    normal_from_attitude(*attitude_, extr_), extr_, tau, noise_,
                                    opts_);
    state_ = r.state;
    cov_ = r.cov;
    clamped_ = clamped_ || r.clamped;
  }
  time_ = t;
  started_ = true;
}

void FusionFilter::add_imu(const ImuSample& imu, const AhrsAttitude& attitude) {
  if (started_ && imu.timestamp < time_) {
    throw StreamError("IMU sample is older than the filter time");
  }
  propagate_to(imu.timestamp);
  imu_ = imu;
  attitude_ = attitude;
}

UpdateResult FusionFilter::apply(const FusionMeasurement& meas) {
  UpdateResult r = update(state_, cov_, meas, noise_, opts_);
  if (r.accepted) {
    state_ = r.state;
    cov_ = r.cov;
  }
  return r;
}

std::vector<FilterSample> run_filter(const std::vector<ImuSample>& imu,
                                     const std::vector<AhrsAttitude>& ahrs,
                                     const std::vector<ImageMeasurement>& measurements,
                                     const EkfState& init, const Matrix7d& cov0,
                                     const NoiseConfig& noise, const Extrinsics& extr,
                                     const FilterOptions& opts) {
  if (imu.size() != ahrs.size()) {
    throw StreamError("IMU and AHRS streams must have matching samples");
  }
  for (std::size_t i = 1; i < imu.size(); ++i) {
    if (!(imu[i].timestamp > imu[i - 1].timestamp)) {
      throw StreamError("IMU timestamps are not strictly increasing");
    }
  }
  for (std::size_t i = 1; i < measurements.size(); ++i) {
    if (!(measurements[i].timestamp > measurements[i - 1].timestamp)) {
      throw StreamError("measurement timestamps are not strictly increasing");
    }
  }

  FusionFilter filter(init, cov0, noise, extr, opts);
  std::vector<FilterSample> track;
  track.reserve(measurements.size());
  std::size_t next_imu = 0;
  for (const auto& m : measurements) {
    while (next_imu < imu.size() && imu[next_imu].timestamp <= m.timestamp) {
      filter.add_imu(imu[next_imu], ahrs[next_imu]);
      ++next_imu;
    }
    filter.propagate_to(m.timestamp);
    bool accepted = false;
    if (m.meas) {
      accepted = filter.apply(*m.meas).accepted;
    }
    track.push_back({m.timestamp, filter.state(), filter.covariance(), accepted});
  }
  return track;
}

Matrix7d initial_covariance(double var_v, double var_d, double var_b) {
  Vector7d diag;
  diag << var_v, var_v, var_v, var_d, var_b, var_b, var_b;
  return diag.asDiagonal();
}

}  // namespace hvio
