#include "hvio/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <Eigen/Geometry>

namespace hvio {

namespace fs = std::filesystem;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string join_numbers(const Eigen::VectorXd& v) {
  std::string s;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    s += (i ? " " : "") + format_double(v[i]);
  }
  return s;
}

Eigen::Matrix3d matrix9(const Eigen::VectorXd& v) {
  Eigen::Matrix3d m;
  for (int i = 0; i < 9; ++i) {
    m(i / 3, i % 3) = v[i];
  }
  return m;
}

Eigen::VectorXd flatten(const Eigen::Matrix3d& m) {
  Eigen::VectorXd v(9);
  for (int i = 0; i < 9; ++i) {
    v[i] = m(i / 3, i % 3);
  }
  return v;
}

const std::set<std::string> kRunKeys = {
    "dataset.path",       "output.dir",         "align.max_iters",     "align.step_tol",
    "align.cost_tol",     "align.min_pixels",   "align.max_drop_fraction", "align.pyramid",
    "align.w_diag",       "align.velocity_prior", "pixels.budget",     "pixels.threshold",
    "noise.cov_f",        "noise.cov_omega",    "noise.cov_z",         "ekf.var_v",
    "ekf.var_d",          "ekf.var_b",          "ekf.estimate_bias",   "ekf.gate",
    "ekf.gate_threshold", "ekf.g0",             "ekf.d_min",           "extrinsics.r_ci",
    "extrinsics.p_ic"};

const std::set<std::string> kScenarioKeys = {
    "preset", "name", "seed", "duration", "slope_deg", "camera.width", "camera.height",
    "camera.fx", "camera.fy", "camera.cx", "camera.cy", "rates.image", "rates.imu",
    "rates.range", "extrinsics.r_ci", "extrinsics.p_ic", "texture.kind", "texture.contrast",
    "texture.checker_period", "texture.min_wavelength", "texture.max_wavelength",
    "texture.components", "texture.amplitude_exponent", "texture.tile_size", "texture.texel", "trajectory.kind",
    "trajectory.height", "trajectory.heading", "trajectory.roll", "trajectory.pitch",
    "trajectory.speed", "trajectory.radius", "trajectory.angular_rate", "trajectory.amplitude_x",
    "trajectory.amplitude_y", "trajectory.period", "trajectory.height_amplitude",
    "trajectory.tilt_amplitude", "trajectory.yaw_amplitude", "noise.accel", "noise.gyro",
    "noise.ahrs", "noise.range", "noise.accel_bias"};

Eigen::Matrix3d diag3(const KeyValueFile& kv, const std::string& key, const Eigen::Matrix3d& def) {
  if (!kv.has(key)) {
    return def;
  }
  const Eigen::VectorXd v = kv.get_vector(key, 3);
  if ((v.array() <= 0.0).any()) {
    throw ConfigError(key, "variances must be positive");
  }
  return v.asDiagonal();
}

double positive(const KeyValueFile& kv, const std::string& key, double def) {
  const double v = kv.get_double(key, def);
  if (!(v > 0.0) || !std::isfinite(v)) {
    throw ConfigError(key, "must be positive");
  }
  return v;
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path);
  if (!out) {
    throw IoError("cannot write " + path.string());
  }
  return out;
}

std::string bit(bool b) { return b ? "1" : "0"; }

}  // namespace

RunConfig RunConfig::from_keyvalue(const KeyValueFile& kv, const fs::path& base_dir) {
  kv.reject_unknown(kRunKeys);
  RunConfig c;
  const fs::path ds = kv.require("dataset.path");
  c.dataset = ds.is_absolute() ? ds : base_dir / ds;
  const fs::path out = kv.get_string("output.dir", "out");
  c.output_dir = out.is_absolute() ? out : base_dir / out;

  c.align.max_iters = kv.get_int("align.max_iters", c.align.max_iters);
  c.align.step_tol = kv.get_double("align.step_tol", c.align.step_tol);
  c.align.cost_tol = kv.get_double("align.cost_tol", c.align.cost_tol);
  const int min_px = kv.get_int("align.min_pixels", static_cast<int>(c.align.min_pixels));
  if (min_px < 1) {
    throw ConfigError("align.min_pixels", "must be at least 1");
  }
  c.align.min_pixels = static_cast<std::size_t>(min_px);
  c.align.max_residual_drop_fraction =
      kv.get_double("align.max_drop_fraction", c.align.max_residual_drop_fraction);
  c.align.pyramid = kv.get_bool("align.pyramid", c.align.pyramid);
  if (kv.has("align.w_diag")) {
    c.align.w_diag = kv.get_vector("align.w_diag", 6);
  }
  try {
    c.align.validate();
  } catch (const ConfigError& e) {
    throw ConfigError("align." + e.field(), e.what());
  }
  c.velocity_prior = kv.get_bool("align.velocity_prior", c.velocity_prior);

  const int budget = kv.get_int("pixels.budget", static_cast<int>(c.pixels.budget));
  if (budget < 1) {
    throw ConfigError("pixels.budget", "must be at least 1");
  }
  c.pixels.budget = static_cast<std::size_t>(budget);
  c.pixels.threshold = kv.get_double("pixels.threshold", c.pixels.threshold);
  if (!(c.pixels.threshold >= 0.0)) {
    throw ConfigError("pixels.threshold", "must be non-negative");
  }

  c.noise.cov_f = diag3(kv, "noise.cov_f", c.noise.cov_f);
  c.noise.cov_omega = diag3(kv, "noise.cov_omega", c.noise.cov_omega);
  if (kv.has("noise.cov_z")) {
    const Eigen::VectorXd z = kv.get_vector("noise.cov_z", 4);
    if ((z.array() <= 0.0).any()) {
      throw ConfigError("noise.cov_z", "variances must be positive");
    }
    c.noise.cov_z = z.asDiagonal();
  }

  c.var_v = positive(kv, "ekf.var_v", c.var_v);
  c.var_d = positive(kv, "ekf.var_d", c.var_d);
  c.var_b = positive(kv, "ekf.var_b", c.var_b);
  c.filter.estimate_bias = kv.get_bool("ekf.estimate_bias", c.filter.estimate_bias);
  c.filter.gate_enabled = kv.get_bool("ekf.gate", c.filter.gate_enabled);
  c.filter.gate_threshold = positive(kv, "ekf.gate_threshold", c.filter.gate_threshold);
  c.filter.g0 = positive(kv, "ekf.g0", c.filter.g0);
  c.filter.d_min = positive(kv, "ekf.d_min", c.filter.d_min);

  if (kv.has("extrinsics.r_ci") || kv.has("extrinsics.p_ic")) {
    Extrinsics e = Extrinsics::nadir();
    if (kv.has("extrinsics.r_ci")) {
      e.r_ci = matrix9(kv.get_vector("extrinsics.r_ci", 9));
      if (!is_rotation(e.r_ci, 1e-6)) {
        throw ConfigError("extrinsics.r_ci", "not a rotation matrix");
      }
    }
    if (kv.has("extrinsics.p_ic")) {
      e.p_ic = kv.get_vector("extrinsics.p_ic", 3);
    }
    c.extrinsics = e;
  }
  return c;
}

RunConfig RunConfig::load(const fs::path& path) {
  const KeyValueFile kv = KeyValueFile::load(path);
  RunConfig c = from_keyvalue(kv, path.parent_path());
  if (!fs::exists(c.dataset / "manifest.txt")) {
    throw ConfigError("dataset.path", "no dataset manifest at " + c.dataset.string());
  }
  return c;
}

KeyValueFile RunConfig::to_keyvalue() const {
  KeyValueFile kv;
  kv.set("dataset.path", dataset.string());
  kv.set("output.dir", output_dir.string());
  kv.set("align.max_iters", std::to_string(align.max_iters));
  kv.set("align.step_tol", format_double(align.step_tol));
  kv.set("align.cost_tol", format_double(align.cost_tol));
  kv.set("align.min_pixels", std::to_string(align.min_pixels));
  kv.set("align.max_drop_fraction", format_double(align.max_residual_drop_fraction));
  kv.set("align.pyramid", align.pyramid ? "true" : "false");
  kv.set("align.w_diag", join_numbers(align.w_diag));
  kv.set("align.velocity_prior", velocity_prior ? "true" : "false");
  kv.set("pixels.budget", std::to_string(pixels.budget));
  kv.set("pixels.threshold", format_double(pixels.threshold));
  kv.set("noise.cov_f", join_numbers(noise.cov_f.diagonal()));
  kv.set("noise.cov_omega", join_numbers(noise.cov_omega.diagonal()));
  kv.set("noise.cov_z", join_numbers(noise.cov_z.diagonal()));
  kv.set("ekf.var_v", format_double(var_v));
  kv.set("ekf.var_d", format_double(var_d));
  kv.set("ekf.var_b", format_double(var_b));
  kv.set("ekf.estimate_bias", filter.estimate_bias ? "true" : "false");
  kv.set("ekf.gate", filter.gate_enabled ? "true" : "false");
  kv.set("ekf.gate_threshold", format_double(filter.gate_threshold));
  kv.set("ekf.g0", format_double(filter.g0));
  kv.set("ekf.d_min", format_double(filter.d_min));
  if (extrinsics) {
    kv.set("extrinsics.r_ci", join_numbers(flatten(extrinsics->r_ci)));
    kv.set("extrinsics.p_ic", join_numbers(extrinsics->p_ic));
  }
  return kv;
}

ScenarioSpec scenario_from_keyvalue(const KeyValueFile& kv) {
  kv.reject_unknown(kScenarioKeys);
  ScenarioSpec s = kv.has("preset") ? preset(kv.require("preset")) : ScenarioSpec{};
  s.name = kv.get_string("name", s.name);
  s.seed = kv.get_uint64("seed", s.seed);
  s.duration = kv.get_double("duration", s.duration);
  s.slope_deg = kv.get_double("slope_deg", s.slope_deg);
  s.width = kv.get_int("camera.width", s.width);
  s.height = kv.get_int("camera.height", s.height);
  s.camera.fx = kv.get_double("camera.fx", s.camera.fx);
  s.camera.fy = kv.get_double("camera.fy", s.camera.fy);
  s.camera.cx = kv.get_double("camera.cx", s.camera.cx);
  s.camera.cy = kv.get_double("camera.cy", s.camera.cy);
  s.image_rate = kv.get_double("rates.image", s.image_rate);
  s.imu_rate = kv.get_double("rates.imu", s.imu_rate);
  s.range_rate = kv.get_double("rates.range", s.range_rate);
  if (kv.has("extrinsics.r_ci")) {
    s.extrinsics.r_ci = matrix9(kv.get_vector("extrinsics.r_ci", 9));
  }
  if (kv.has("extrinsics.p_ic")) {
    s.extrinsics.p_ic = kv.get_vector("extrinsics.p_ic", 3);
  }

  TextureSpec& t = s.texture;
  if (const auto kind = kv.get("texture.kind")) {
    if (*kind == "noise") {
      t.kind = TextureKind::noise;
    } else if (*kind == "checker") {
      t.kind = TextureKind::checker;
    } else {
      throw ConfigError("texture.kind", "expected 'noise' or 'checker', got '" + *kind + "'");
    }
  }
  t.contrast = kv.get_double("texture.contrast", t.contrast);
  t.checker_period = kv.get_double("texture.checker_period", t.checker_period);
  t.min_wavelength = kv.get_double("texture.min_wavelength", t.min_wavelength);
  t.max_wavelength = kv.get_double("texture.max_wavelength", t.max_wavelength);
  t.components = kv.get_int("texture.components", t.components);
  t.amplitude_exponent = kv.get_double("texture.amplitude_exponent", t.amplitude_exponent);
  t.tile_size = kv.get_double("texture.tile_size", t.tile_size);
  t.texel = kv.get_double("texture.texel", t.texel);

  TrajectorySpec& j = s.trajectory;
  if (const auto kind = kv.get("trajectory.kind")) {
    if (*kind == "hover") {
      j.kind = TrajectoryKind::hover;
    } else if (*kind == "line") {
      j.kind = TrajectoryKind::line;
    } else if (*kind == "circle") {
      j.kind = TrajectoryKind::circle;
    } else if (*kind == "figure8") {
      j.kind = TrajectoryKind::figure8;
    } else {
      throw ConfigError("trajectory.kind",
                        "expected hover, line, circle or figure8, got '" + *kind + "'");
    }
  }
  j.height = kv.get_double("trajectory.height", j.height);
  j.heading = kv.get_double("trajectory.heading", j.heading);
  j.static_roll = kv.get_double("trajectory.roll", j.static_roll);
  j.static_pitch = kv.get_double("trajectory.pitch", j.static_pitch);
  j.speed = kv.get_double("trajectory.speed", j.speed);
  j.radius = kv.get_double("trajectory.radius", j.radius);
  j.angular_rate = kv.get_double("trajectory.angular_rate", j.angular_rate);
  j.amplitude_x = kv.get_double("trajectory.amplitude_x", j.amplitude_x);
  j.amplitude_y = kv.get_double("trajectory.amplitude_y", j.amplitude_y);
  j.period = kv.get_double("trajectory.period", j.period);
  j.height_amplitude = kv.get_double("trajectory.height_amplitude", j.height_amplitude);
  j.tilt_amplitude = kv.get_double("trajectory.tilt_amplitude", j.tilt_amplitude);
  j.yaw_amplitude = kv.get_double("trajectory.yaw_amplitude", j.yaw_amplitude);

  SensorNoiseSpec& n = s.noise;
  n.sigma_accel = kv.get_double("noise.accel", n.sigma_accel);
  n.sigma_gyro = kv.get_double("noise.gyro", n.sigma_gyro);
  n.sigma_ahrs = kv.get_double("noise.ahrs", n.sigma_ahrs);
  n.sigma_range = kv.get_double("noise.range", n.sigma_range);
  if (kv.has("noise.accel_bias")) {
    n.accel_bias = kv.get_vector("noise.accel_bias", 3);
  }
  s.validate();
  return s;
}

KeyValueFile scenario_to_keyvalue(const ScenarioSpec& s) {
  static const char* kTraj[] = {"hover", "line", "circle", "figure8"};
  KeyValueFile kv;
  kv.set("name", s.name);
  kv.set("seed", std::to_string(s.seed));
  kv.set("duration", format_double(s.duration));
  kv.set("slope_deg", format_double(s.slope_deg));
  kv.set("camera.width", std::to_string(s.width));
  kv.set("camera.height", std::to_string(s.height));
  kv.set("camera.fx", format_double(s.camera.fx));
  kv.set("camera.fy", format_double(s.camera.fy));
  kv.set("camera.cx", format_double(s.camera.cx));
  kv.set("camera.cy", format_double(s.camera.cy));
  kv.set("rates.image", format_double(s.image_rate));
  kv.set("rates.imu", format_double(s.imu_rate));
  kv.set("rates.range", format_double(s.range_rate));
  kv.set("extrinsics.r_ci", join_numbers(flatten(s.extrinsics.r_ci)));
  kv.set("extrinsics.p_ic", join_numbers(s.extrinsics.p_ic));
  kv.set("texture.kind", s.texture.kind == TextureKind::noise ? "noise" : "checker");
  kv.set("texture.contrast", format_double(s.texture.contrast));
  kv.set("texture.checker_period", format_double(s.texture.checker_period));
  kv.set("texture.min_wavelength", format_double(s.texture.min_wavelength));
  kv.set("texture.max_wavelength", format_double(s.texture.max_wavelength));
  kv.set("texture.components", std::to_string(s.texture.components));
  kv.set("texture.amplitude_exponent", format_double(s.texture.amplitude_exponent));
  kv.set("texture.tile_size", format_double(s.texture.tile_size));
  kv.set("texture.texel", format_double(s.texture.texel));
  const TrajectorySpec& j = s.trajectory;
  kv.set("trajectory.kind", kTraj[static_cast<int>(j.kind)]);
  kv.set("trajectory.height", format_double(j.height));
  kv.set("trajectory.heading", format_double(j.heading));
  kv.set("trajectory.roll", format_double(j.static_roll));
  kv.set("trajectory.pitch", format_double(j.static_pitch));
  kv.set("trajectory.speed", format_double(j.speed));
  kv.set("trajectory.radius", format_double(j.radius));
  kv.set("trajectory.angular_rate", format_double(j.angular_rate));
  kv.set("trajectory.amplitude_x", format_double(j.amplitude_x));
  kv.set("trajectory.amplitude_y", format_double(j.amplitude_y));
  kv.set("trajectory.period", format_double(j.period));
  kv.set("trajectory.height_amplitude", format_double(j.height_amplitude));
  kv.set("trajectory.tilt_amplitude", format_double(j.tilt_amplitude));
  kv.set("trajectory.yaw_amplitude", format_double(j.yaw_amplitude));
  kv.set("noise.accel", format_double(s.noise.sigma_accel));
  kv.set("noise.gyro", format_double(s.noise.sigma_gyro));
  kv.set("noise.ahrs", format_double(s.noise.sigma_ahrs));
  kv.set("noise.range", format_double(s.noise.sigma_range));
  kv.set("noise.accel_bias", join_numbers(s.noise.accel_bias));
  return kv;
}

ScenarioSpec load_scenario(const std::string& preset_or_path) {
  const auto names = preset_names();
  if (std::find(names.begin(), names.end(), preset_or_path) != names.end()) {
    return preset(preset_or_path);
  }
  if (!fs::exists(preset_or_path)) {
    throw ConfigError("spec", "'" + preset_or_path + "' is neither a preset nor a file");
  }
  return scenario_from_keyvalue(KeyValueFile::load(preset_or_path));
}

TrackOutput run_tracking(const Dataset& data, const RunConfig& cfg) {
  cfg.align.validate();
  if (data.frame_count() < 2) {
    throw ConfigError("dataset", "need at least two frames");
  }
  if (data.imu.empty() || data.ahrs.size() != data.imu.size()) {
    throw StreamError("IMU and AHRS streams must be non-empty and of equal length");
  }
  const Extrinsics extr = cfg.extrinsics.value_or(data.meta.extrinsics);
  const CameraIntrinsics& k = data.meta.camera;
  const double range_tol = 0.5 / data.meta.range_rate + 1e-9;
  const auto range_at = [&](double t) -> std::optional<double> {
    const auto i = nearest_index(data.range, t);
    if (!i || std::abs(data.range[*i].timestamp - t) > range_tol || !(data.range[*i].range > 0.0)) {
      return std::nullopt;
    }
    return data.range[*i].range;
  };
  const auto ahrs_at = [&](double t) { return data.ahrs[*nearest_index(data.ahrs, t)]; };

  const double t0 = data.frame_times.front();
  EkfState init;
  init.d = 1.0;
  if (const auto l = range_at(t0)) {
    init.d = *l * normal_from_attitude(ahrs_at(t0), extr).vector().z();
  }
  FusionFilter filter(init, initial_covariance(cfg.var_v, cfg.var_d, cfg.var_b), cfg.noise, extr,
                      cfg.filter);

  std::size_t next_imu = 0;
  const auto advance = [&](double t) {
    while (next_imu < data.imu.size() && data.imu[next_imu].timestamp <= t) {
      filter.add_imu(data.imu[next_imu], data.ahrs[next_imu]);
      ++next_imu;
    }
    filter.propagate_to(t);
  };
  advance(t0);

  TrackOutput out;
  GrayImage prev = data.frame(0);
  AhrsAttitude prev_att = ahrs_at(t0);
  std::vector<VelocitySample> velocities;
  std::vector<AhrsAttitude> attitudes;
  for (std::size_t f = 1; f < data.frame_count(); ++f) {
    const double t = data.frame_times[f];
    const double dt = t - data.frame_times[f - 1];
    GrayImage curr = data.frame(f);
    const AhrsAttitude att = ahrs_at(t);
    const PlaneNormal n = normal_from_attitude(att, extr);
    const AlignPrior prior =
        prior_from_imu(prev_att, att, filter.state(), dt, extr, cfg.velocity_prior);

    const auto start = std::chrono::steady_clock::now();
    const AlignResult res = align_frames(prev, curr, prior, cfg.align, cfg.pixels, k, n);
    const auto stop = std::chrono::steady_clock::now();

    advance(t);
    FrameDiagnostics diag;
    diag.frame = f;
    diag.timestamp = t;
    diag.align = res;
    diag.align_seconds = std::chrono::duration<double>(stop - start).count();
    if (res.converged) {
      FusionMeasurement m;
      m.t_m = res.p.t;
      m.l_m = range_at(t);
      m.n_z = n.vector().z();
      m.tau = dt;
      diag.range_available = m.l_m.has_value();
      diag.gate_accepted = filter.apply(m).accepted;
    }
    out.diagnostics.push_back(diag);

    const EkfState& s = filter.state();
    TrackRow row;
    row.timestamp = t;
    row.v_camera = s.v;
    const Eigen::Vector3d omega =
        filter.held_imu() ? filter.held_imu()->omega_m : Eigen::Vector3d::Zero();
    row.v_body = extr.r_ci.transpose() * s.v - omega.cross(extr.p_ic);
    row.d = s.d;
    row.bias = s.b;
    row.trace_cov = filter.covariance().trace();
    row.converged = res.converged;
    row.accepted = diag.gate_accepted;
    row.attitude = att.rotation;
    out.rows.push_back(row);
    velocities.push_back({t, row.v_body});
    attitudes.push_back(att);

    prev = std::move(curr);
    prev_att = att;
  }
  out.distance_clamped = filter.clamped();

  Eigen::Vector3d p0 = Eigen::Vector3d::Zero();
  if (!data.truth.empty()) {
    const double t1 = out.rows.front().timestamp;
    const auto it = std::min_element(data.truth.begin(), data.truth.end(),
                                     [&](const GroundTruthSample& a, const GroundTruthSample& b) {
                                       return std::abs(a.timestamp - t1) < std::abs(b.timestamp - t1);
                                     });
    p0 = it->position;
  }
  const TrajectoryTrack dr = dead_reckon(velocities, attitudes, p0);
  for (std::size_t i = 0; i < out.rows.size(); ++i) {
    out.rows[i].position = dr[i].position;
  }
  if (!data.truth.empty()) {
    out.metrics = evaluate_rows(out.rows, data.truth);
  }
  return out;
}

TrajectoryTrack track_from_rows(const std::vector<TrackRow>& rows) {
  std::vector<PoseSample> s;
  s.reserve(rows.size());
  for (const auto& r : rows) {
    s.push_back({r.timestamp, r.position, r.attitude, r.v_body});
  }
  return TrajectoryTrack(std::move(s));
}

TrajectoryTrack track_from_truth(const std::vector<GroundTruthSample>& truth) {
  std::vector<PoseSample> s;
  s.reserve(truth.size());
  for (const auto& g : truth) {
    s.push_back({g.timestamp, g.position, g.attitude, g.velocity_body});
  }
  return TrajectoryTrack(std::move(s));
}

RunMetrics evaluate_rows(const std::vector<TrackRow>& rows,
                         const std::vector<GroundTruthSample>& truth) {
  RunMetrics m;
  MetricReport& r = m.report;
  const TrajectoryTrack est = track_from_rows(rows);
  const TrajectoryTrack gt = track_from_truth(truth);
  std::vector<FrameOutcome> outcomes;
  for (const auto& row : rows) {
    outcomes.push_back({row.converged, row.accepted});
  }
  r.failure_rate = rows.empty() ? kNaN : failure_rate(outcomes);
  try {
    const RpeResult p = rpe(est, gt, 1.0);
    r.rpe_trans_rmse = p.trans_rmse;
    r.rpe_rot_rmse = p.rot_rmse;
  } catch (const Error& e) {
    r.rpe_trans_rmse = r.rpe_rot_rmse = kNaN;
    m.notes.push_back(std::string("rpe: ") + e.what());
  }
  try {
    const AteResult a = relative_ate(est, gt);
    r.ate_xy_rmse = a.ate_xy_rmse;
    r.relative_ate = a.relative_ate;
    r.path_length_xy = a.path_length_xy;
  } catch (const UndefinedMetricError& e) {
    r.relative_ate = kNaN;
    r.path_length_xy = 0.0;
    const auto pairs = pair_tracks(est, gt);
    double sum = 0.0;
    for (const auto& [i, j] : pairs) {
      sum += (est[i].position.head<2>() - gt[j].position.head<2>()).squaredNorm();
    }
    r.ate_xy_rmse = pairs.empty() ? kNaN : std::sqrt(sum / static_cast<double>(pairs.size()));
    m.notes.push_back(std::string("relative_ate: ") + e.what());
  } catch (const Error& e) {
    r.ate_xy_rmse = r.relative_ate = r.path_length_xy = kNaN;
    m.notes.push_back(std::string("relative_ate: ") + e.what());
  }
  try {
    r.velocity_rmse = velocity_rmse(est, gt);
  } catch (const Error& e) {
    r.velocity_rmse = kNaN;
    m.notes.push_back(std::string("velocity_rmse: ") + e.what());
  }
  return m;
}

void write_track_csv(const fs::path& path, const std::vector<TrackRow>& rows) {
  std::ofstream out = open_out(path);
  out << "timestamp,vc_x,vc_y,vc_z,vb_x,vb_y,vb_z,d,b_x,b_y,b_z,trace_cov,converged,accepted,"
         "p_x,p_y,p_z,q_w,q_x,q_y,q_z\n";
  for (const auto& r : rows) {
    const Eigen::Quaterniond q(r.attitude);
    out << format_timestamp(r.timestamp);
    for (double v : {r.v_camera.x(), r.v_camera.y(), r.v_camera.z(), r.v_body.x(), r.v_body.y(),
                     r.v_body.z(), r.d, r.bias.x(), r.bias.y(), r.bias.z(), r.trace_cov}) {
      out << ',' << format_double(v);
    }
    out << ',' << bit(r.converged) << ',' << bit(r.accepted);
    for (double v : {r.position.x(), r.position.y(), r.position.z(), q.w(), q.x(), q.y(), q.z()}) {
      out << ',' << format_double(v);
    }
    out << '\n';
  }
}

std::vector<TrackRow> read_track_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw IoError("cannot open " + path.string());
  }
  std::string line;
  std::getline(in, line);
  if (line.rfind("timestamp,vc_x", 0) != 0) {
    throw IoError(path.string() + ": not a track CSV");
  }
  std::vector<TrackRow> rows;
  int number = 1;
  while (std::getline(in, line)) {
    ++number;
    if (line.empty()) {
      continue;
    }
    std::vector<double> v;
    std::istringstream cells(line);
    std::string cell;
    while (std::getline(cells, cell, ',')) {
      char* end = nullptr;
      v.push_back(std::strtod(cell.c_str(), &end));
      if (cell.empty() || *end != '\0') {
        throw IoError(path.string() + ":" + std::to_string(number) + ": bad number '" + cell + "'");
      }
    }
    if (v.size() != 21) {
      throw IoError(path.string() + ":" + std::to_string(number) + ": expected 21 columns");
    }
    TrackRow r;
    r.timestamp = v[0];
    r.v_camera = {v[1], v[2], v[3]};
    r.v_body = {v[4], v[5], v[6]};
    r.d = v[7];
    r.bias = {v[8], v[9], v[10]};
    r.trace_cov = v[11];
    r.converged = v[12] != 0.0;
    r.accepted = v[13] != 0.0;
    r.position = {v[14], v[15], v[16]};
    r.attitude = Eigen::Quaterniond(v[17], v[18], v[19], v[20]).normalized().toRotationMatrix();
    rows.push_back(r);
  }
  return rows;
}

void write_diagnostics_csv(const fs::path& path, const std::vector<FrameDiagnostics>& diagnostics) {
  std::ofstream out = open_out(path);
  out << "frame,timestamp,iterations,final_cost,pixels_used,converged,failure_reason,"
         "range_available,gate_accepted\n";
  for (const auto& d : diagnostics) {
    out << d.frame << ',' << format_timestamp(d.timestamp) << ',' << d.align.iterations << ','
        << format_double(d.align.final_cost) << ',' << d.align.pixels_used << ','
        << bit(d.align.converged) << ','
        << (d.align.failure_reason ? to_string(*d.align.failure_reason) : "none") << ','
        << bit(d.range_available) << ',' << bit(d.gate_accepted) << '\n';
  }
}

void write_metrics_csv(const fs::path& path, const MetricReport& m) {
  std::ofstream out = open_out(path);
  out << "rpe_trans_rmse,rpe_rot_rmse,ate_xy_rmse,relative_ate,velocity_rmse,failure_rate,"
         "path_length_xy\n";
  out << format_double(m.rpe_trans_rmse) << ',' << format_double(m.rpe_rot_rmse) << ','
      << format_double(m.ate_xy_rmse) << ',' << format_double(m.relative_ate) << ','
      << format_double(m.velocity_rmse) << ',' << format_double(m.failure_rate) << ','
      << format_double(m.path_length_xy) << '\n';
}

std::string format_metrics_table(const RunMetrics& m) {
  const MetricReport& r = m.report;
  std::ostringstream out;
  char buf[96];
  const std::pair<const char*, double> items[] = {
      {"rpe_trans_rmse [m]", r.rpe_trans_rmse}, {"rpe_rot_rmse [rad]", r.rpe_rot_rmse},
      {"ate_xy_rmse [m]", r.ate_xy_rmse},       {"relative_ate", r.relative_ate},
      {"velocity_rmse [m/s]", r.velocity_rmse}, {"failure_rate", r.failure_rate},
      {"path_length_xy [m]", r.path_length_xy}};
  for (const auto& [name, value] : items) {
    std::snprintf(buf, sizeof(buf), "%-22s %12.6f\n", name, value);
    out << buf;
  }
  for (const auto& note : m.notes) {
    out << "note: " << note << '\n';
  }
  return out.str();
}

void write_outputs(const TrackOutput& out, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) {
    throw IoError("cannot create " + dir.string() + ": " + ec.message());
  }
  write_track_csv(dir / "track.csv", out.rows);
  write_diagnostics_csv(dir / "diagnostics.csv", out.diagnostics);
  if (out.metrics) {
    write_metrics_csv(dir / "metrics.csv", out.metrics->report);
  }
}

BenchReport run_bench(const Dataset& data, const RunConfig& cfg, int reps) {
  if (reps < 1) {
    throw ConfigError("reps", "must be at least 1");
  }
  if (data.frame_count() < 100) {
    throw ConfigError("dataset", "benchmark needs at least 100 frames");
  }
  BenchReport report;
  std::vector<double> rates;
  for (int r = 0; r < reps; ++r) {
    const TrackOutput out = run_tracking(data, cfg);
    report.frames_processed.push_back(out.diagnostics.size());
    for (const auto& d : out.diagnostics) {
      rates.push_back(1.0 / std::max(d.align_seconds, 1e-9));
    }
  }
  double sum = 0.0;
  for (double x : rates) {
    sum += x;
  }
  report.mean_hz = sum / static_cast<double>(rates.size());
  double var = 0.0;
  for (double x : rates) {
    var += (x - report.mean_hz) * (x - report.mean_hz);
  }
  report.sigma_hz = std::sqrt(var / static_cast<double>(rates.size()));
  const auto [lo, hi] = std::minmax_element(rates.begin(), rates.end());
  report.min_hz = *lo;
  report.max_hz = *hi;
  return report;
}

}  // namespace hvio
