#include "hvio/simsynth.hpp"

#include <cmath>
#include <memory>
#include <numbers>
#include <random>

#include <Eigen/Geometry>

namespace hvio {

namespace {

constexpr double kPi = std::numbers::pi;

Eigen::Matrix3d rot_x(double a) {
  return Eigen::AngleAxisd(a, Eigen::Vector3d::UnitX()).toRotationMatrix();
}
Eigen::Matrix3d rot_y(double a) {
  return Eigen::AngleAxisd(a, Eigen::Vector3d::UnitY()).toRotationMatrix();
}
Eigen::Matrix3d rot_z(double a) {
  return Eigen::AngleAxisd(a, Eigen::Vector3d::UnitZ()).toRotationMatrix();
}

// Independent, reproducible generator per stream.
std::mt19937_64 stream_rng(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream)};
  return std::mt19937_64(seq);
}

Eigen::Vector3d gaussian3(std::mt19937_64& rng, double sigma) {
  if (sigma <= 0.0) {
    return Eigen::Vector3d::Zero();
  }
  std::normal_distribution<double> dist(0.0, sigma);
  const double a = dist(rng);
  const double b = dist(rng);
  const double c = dist(rng);
  return {a, b, c};
}

}  // namespace

SensorNoiseSpec SensorNoiseSpec::real_sensor() {
  SensorNoiseSpec n;
  n.sigma_accel = 1.0;
  n.sigma_gyro = 0.02;
  return n;
}

void ScenarioSpec::validate() const {
  if (!(duration > 0.0)) {
    throw ConfigError("duration", "must be positive");
  }
  if (!(image_rate > 0.0)) {
    throw ConfigError("image_rate", "must be positive");
  }
  if (!(imu_rate > 0.0)) {
    throw ConfigError("imu_rate", "must be positive");
  }
  if (!(range_rate > 0.0)) {
    throw ConfigError("range_rate", "must be positive");
  }
  if (width < 64 || height < 64) {
    throw ConfigError("resolution", "must be at least 64x64");
  }
  if (!(camera.fx > 0.0) || !(camera.fy > 0.0)) {
    throw ConfigError("camera", "focal lengths must be positive");
  }
  if (!is_rotation(extrinsics.r_ci, 1e-9)) {
    throw ConfigError("r_ci", "camera rotation must be orthonormal");
  }
  if (!(texture.contrast >= 0.0 && texture.contrast <= 1.0)) {
    throw ConfigError("contrast", "must lie in [0, 1]");
  }
  if (texture.kind == TextureKind::noise) {
    if (!(texture.min_wavelength > 0.0 && texture.max_wavelength >= texture.min_wavelength)) {
      throw ConfigError("wavelength", "need 0 < min_wavelength <= max_wavelength");
    }
    if (texture.components < 1) {
      throw ConfigError("components", "must be at least 1");
    }
    if (!std::isfinite(texture.amplitude_exponent)) {
      throw ConfigError("amplitude_exponent", "must be finite");
    }
    if (!(texture.texel > 0.0 && texture.tile_size > 4.0 * texture.texel)) {
      throw ConfigError("texel", "texel must be positive and much smaller than the tile");
    }
  } else if (!(texture.checker_period > 0.0)) {
    throw ConfigError("checker_period", "must be positive");
  }
  if (!(std::abs(slope_deg) < 60.0)) {
    throw ConfigError("slope_deg", "must lie in (-60, 60)");
  }
  if (!(trajectory.height > 0.1)) {
    throw ConfigError("height", "camera must fly at least 0.1 m above the plane");
  }
  if (trajectory.kind == TrajectoryKind::figure8 && !(trajectory.period > 0.0)) {
    throw ConfigError("period", "must be positive");
  }
  for (double s : {noise.sigma_accel, noise.sigma_gyro, noise.sigma_ahrs, noise.sigma_range}) {
    if (!(s >= 0.0)) {
      throw ConfigError("noise", "standard deviations must be non-negative");
    }
  }
}

std::vector<std::string> preset_names() {
  return {"p1-ideal", "p1-noisy", "p2-lowtex", "p3-notex", "p5-aggressive", "p6-lowhz",
          "s1-slope"};
}

ScenarioSpec preset(const std::string& name) {
  ScenarioSpec s;
  s.name = name;
  if (name == "p1-ideal") {
    return s;
  }
  if (name == "p1-noisy") {
    s.noise = SensorNoiseSpec::real_sensor();
    return s;
  }
  if (name == "p2-lowtex") {
    s.texture.contrast = 0.25;
    return s;
  }
  if (name == "p3-notex") {
    s.texture.contrast = 0.0;
    return s;
  }
  if (name == "p5-aggressive") {
    s.trajectory.period = 7.5;
    s.trajectory.tilt_amplitude = 0.25;
    s.trajectory.yaw_amplitude = 0.8;
    return s;
  }
  if (name == "p6-lowhz") {
    s.image_rate = 20.0;
    return s;
  }
  if (name == "s1-slope") {
    s.slope_deg = 5.0;
    return s;
  }
  throw ConfigError("preset", "unknown preset '" + name + "'");
}

double Trajectory::Channel::value(double t) const {
  double v = offset + rate * t;
  for (const auto& h : harmonics) {
    v += h.amplitude * std::sin(h.frequency * t + h.phase);
  }
  return v;
}

double Trajectory::Channel::derivative(double t, int order) const {
  double v = order == 1 ? rate : 0.0;
  for (const auto& h : harmonics) {
    v += h.amplitude * std::pow(h.frequency, order) *
         std::sin(h.frequency * t + h.phase + order * kPi / 2.0);
  }
  return v;
}

Trajectory::Trajectory(Channel x, Channel y, Channel z, Channel roll, Channel pitch, Channel yaw)
    : x_(std::move(x)),
      y_(std::move(y)),
      z_(std::move(z)),
      roll_(std::move(roll)),
      pitch_(std::move(pitch)),
      yaw_(std::move(yaw)) {}

Trajectory::Trajectory(const TrajectorySpec& s) {
  z_.offset = s.height;
  yaw_.offset = s.heading;
  switch (s.kind) {
    case TrajectoryKind::hover:
      roll_.offset = s.static_roll;
      pitch_.offset = s.static_pitch;
      break;
    case TrajectoryKind::line:
      x_.rate = s.speed;
      break;
    case TrajectoryKind::circle:
      x_.harmonics = {{s.radius, s.angular_rate, kPi / 2.0}};
      y_.harmonics = {{s.radius, s.angular_rate, 0.0}};
      yaw_.offset = s.heading + kPi / 2.0;
      yaw_.rate = s.angular_rate;
      break;
    case TrajectoryKind::figure8: {
      const double w = 2.0 * kPi / s.period;
      x_.harmonics = {{s.amplitude_x, w, 0.0}};
      y_.harmonics = {{s.amplitude_y, 2.0 * w, 0.0}};
      z_.harmonics = {{s.height_amplitude, w, kPi / 3.0}};
      roll_.harmonics = {{-s.tilt_amplitude, 2.0 * w, 0.0}};
      pitch_.harmonics = {{s.tilt_amplitude, w, 0.0}};
      yaw_.harmonics = {{s.yaw_amplitude, w, 0.0}};
      break;
    }
  }
}

BodyState Trajectory::at(double t) const {
  BodyState b;
  b.position = {x_.value(t), y_.value(t), z_.value(t)};
  b.velocity = {x_.derivative(t, 1), y_.derivative(t, 1), z_.derivative(t, 1)};
  b.acceleration = {x_.derivative(t, 2), y_.derivative(t, 2), z_.derivative(t, 2)};
  const double phi = roll_.value(t);
  const double theta = pitch_.value(t);
  const double psi = yaw_.value(t);
  b.rotation = rot_z(psi) * rot_y(theta) * rot_x(phi);
  const double dphi = roll_.derivative(t, 1);
  const double dtheta = pitch_.derivative(t, 1);
  const double dpsi = yaw_.derivative(t, 1);
  const double sphi = std::sin(phi), cphi = std::cos(phi);
  const double sth = std::sin(theta), cth = std::cos(theta);
  b.omega_body = {dphi - dpsi * sth, dtheta * cphi + dpsi * cth * sphi,
                  -dtheta * sphi + dpsi * cth * cphi};
  return b;
}

Texture::Texture(const TextureSpec& spec, std::uint64_t seed) : spec_(spec) {
  if (spec.kind != TextureKind::noise) {
    return;
  }
  size_ = static_cast<int>(std::lround(spec.tile_size / spec.texel));
  raster_.assign(static_cast<std::size_t>(size_) * size_, 0.5f);
  if (spec.contrast == 0.0) {
    return;
  }
  struct Wave {
    int m, n;
    double phase;
    double weight;
  };
  std::mt19937_64 rng = stream_rng(seed, 100);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<Wave> waves;
  for (int k = 0; k < spec.components; ++k) {
    const double lambda =
        spec.min_wavelength * std::pow(spec.max_wavelength / spec.min_wavelength, unit(rng));
    const double dir = 2.0 * kPi * unit(rng);
    const double cycles = spec.tile_size / lambda;
    int m = static_cast<int>(std::lround(cycles * std::cos(dir)));
    int n = static_cast<int>(std::lround(cycles * std::sin(dir)));
    if (m == 0 && n == 0) {
      m = 1;
    }
    waves.push_back({m, n, 2.0 * kPi * unit(rng),
                     std::pow(lambda / spec.max_wavelength, spec.amplitude_exponent)});
  }
  // Wave phases are integer multiples of 2 pi / size, so each wave is a table lookup.
  const double step = 2.0 * kPi / size_;
  const auto wrap = [this](long k) { return static_cast<int>(((k % size_) + size_) % size_); };
  std::vector<double> field(raster_.size(), 0.0);
  std::vector<double> table(static_cast<std::size_t>(size_));
  for (const auto& w : waves) {
    for (int k = 0; k < size_; ++k) {
      table[k] = w.weight * std::sin(step * k + w.phase);
    }
    const int dm = wrap(w.m);
    for (int j = 0; j < size_; ++j) {
      int idx = wrap(static_cast<long>(w.n) * j);
      double* row = field.data() + static_cast<std::size_t>(j) * size_;
      for (int i = 0; i < size_; ++i) {
        row[i] += table[idx];
        idx += dm;
        if (idx >= size_) {
          idx -= size_;
        }
      }
    }
  }
  double peak = 0.0;
  for (double v : field) {
    peak = std::max(peak, std::abs(v));
  }
  // Peak deviation 0.45 at full contrast, so the texture never clips.
  const double scale = peak > 0.0 ? 0.45 * spec.contrast / peak : 0.0;
  for (std::size_t idx = 0; idx < field.size(); ++idx) {
    raster_[idx] = static_cast<float>(0.5 + scale * field[idx]);
  }
}

double Texture::sample(double u, double v) const {
  if (spec_.kind == TextureKind::checker) {
    const double half = 0.5 * spec_.checker_period;
    const long parity = static_cast<long>(std::floor(u / half)) + static_cast<long>(std::floor(v / half));
    const double sign = (parity % 2 == 0) ? 1.0 : -1.0;
    return 0.5 + sign * 0.45 * spec_.contrast;
  }
  const double gu = u / spec_.texel;
  const double gv = v / spec_.texel;
  const double fu_all = gu - size_ * std::floor(gu / size_);
  const double fv_all = gv - size_ * std::floor(gv / size_);
  int i0 = static_cast<int>(fu_all);
  int j0 = static_cast<int>(fv_all);
  const double fu = fu_all - i0;
  const double fv = fv_all - j0;
  i0 %= size_;
  j0 %= size_;
  const int i1 = (i0 + 1) % size_;
  const int j1 = (j0 + 1) % size_;
  const auto at = [&](int i, int j) {
    return static_cast<double>(raster_[static_cast<std::size_t>(j) * size_ + i]);
  };
  const double top = (1.0 - fu) * at(i0, j0) + fu * at(i1, j0);
  const double bottom = (1.0 - fu) * at(i0, j1) + fu * at(i1, j1);
  return (1.0 - fv) * top + fv * bottom;
}

GroundPlane GroundPlane::tilted(double slope_deg) {
  const Eigen::Matrix3d r = rot_y(slope_deg * kPi / 180.0);
  return GroundPlane{r * Eigen::Vector3d::UnitZ(), r * Eigen::Vector3d::UnitX(),
                     Eigen::Vector3d::UnitY()};
}

Scenario::Scenario(ScenarioSpec spec)
    : spec_((spec.validate(), std::move(spec))),
      texture_(spec_.texture, spec_.seed),
      trajectory_(spec_.trajectory),
      plane_(GroundPlane::tilted(spec_.slope_deg)) {}

CameraPose Scenario::camera_pose(double t) const {
  const BodyState b = trajectory_.at(t);
  CameraPose pose;
  pose.rotation = b.rotation * spec_.extrinsics.r_ci.transpose();
  pose.center = b.position + b.rotation * spec_.extrinsics.p_ic;
  return pose;
}

std::size_t sample_count(double duration, double rate) {
  return static_cast<std::size_t>(std::floor(duration * rate - 1e-9)) + 1;
}

std::vector<double> Scenario::frame_times() const {
  const std::size_t n = sample_count(spec_.duration, spec_.image_rate);
  std::vector<double> times(n);
  for (std::size_t k = 0; k < n; ++k) {
    times[k] = canonical_timestamp(static_cast<double>(k) / spec_.image_rate);
  }
  return times;
}

GroundTruthSample Scenario::ground_truth_at(double t, const GroundTruthSample* previous) const {
  const BodyState b = trajectory_.at(t);
  const CameraPose pose = camera_pose(t);
  GroundTruthSample g;
  g.timestamp = t;
  g.position = b.position;
  g.attitude = b.rotation;
  g.velocity_world = b.velocity;
  g.velocity_body = b.rotation.transpose() * b.velocity;
  const Eigen::Vector3d cam_velocity_world =
      b.velocity + b.rotation * b.omega_body.cross(spec_.extrinsics.p_ic);
  g.velocity_camera = pose.rotation.transpose() * cam_velocity_world;
  g.distance = plane_.height_of(pose.center);
  g.normal = pose.rotation.transpose() * (-plane_.normal_up);
  if (previous != nullptr) {
    const CameraPose prev = camera_pose(previous->timestamp);
    const Eigen::Matrix3d rel = prev.rotation.transpose() * pose.rotation;
    g.inter_r = matrix_to_rodrigues(rel);
    g.inter_t = prev.rotation.transpose() * (pose.center - prev.center) / g.distance;
  }
  return g;
}

GrayImage render_frame(const Scenario& scenario, const CameraPose& pose, double timestamp) {
  const ScenarioSpec& spec = scenario.spec();
  const GroundPlane& plane = scenario.plane();
  const double height = plane.height_of(pose.center);
  if (!(height > 0.1)) {
    throw Error("camera must be more than 0.1 m above the ground plane");
  }
  const CameraIntrinsics& k = spec.camera;
  const Eigen::Vector3d n_cam = pose.rotation.transpose() * plane.normal_up;
  const Eigen::Vector3d u_cam = pose.rotation.transpose() * plane.axis_u;
  const Eigen::Vector3d v_cam = pose.rotation.transpose() * plane.axis_v;
  const double u0 = plane.axis_u.dot(pose.center);
  const double v0 = plane.axis_v.dot(pose.center);

  std::vector<double> data(static_cast<std::size_t>(spec.width) * spec.height);
  for (int y = 0; y < spec.height; ++y) {
    for (int x = 0; x < spec.width; ++x) {
      const Eigen::Vector3d ray((x - k.cx) / k.fx, (y - k.cy) / k.fy, 1.0);
      const double denom = n_cam.dot(ray);
      double value = 0.5;
      if (denom < -1e-12) {
        const double s = height / -denom;
        value = scenario.texture().sample(u0 + s * u_cam.dot(ray), v0 + s * v_cam.dot(ray));
      }
      data[static_cast<std::size_t>(y) * spec.width + x] = std::clamp(value, 0.0, 1.0);
    }
  }
  return GrayImage(spec.width, spec.height, std::move(data), timestamp);
}

ImuStreams synthesize_imu(const Scenario& scenario) {
  const ScenarioSpec& spec = scenario.spec();
  const std::size_t n = sample_count(spec.duration, spec.imu_rate);
  std::mt19937_64 rng = stream_rng(spec.seed, 1);
  const Eigen::Vector3d g_world(0.0, 0.0, -kGravity);
  ImuStreams out;
  out.imu.reserve(n);
  out.ahrs.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double t = canonical_timestamp(static_cast<double>(k) / spec.imu_rate);
    const BodyState b = scenario.trajectory().at(t);
    ImuSample s;
    s.timestamp = t;
    s.f_m = b.rotation.transpose() * (b.acceleration - g_world) + spec.noise.accel_bias +
            gaussian3(rng, spec.noise.sigma_accel);
    s.omega_m = b.omega_body + gaussian3(rng, spec.noise.sigma_gyro);
    AhrsAttitude a;
    a.timestamp = t;
    a.rotation = b.rotation;
    if (spec.noise.sigma_ahrs > 0.0) {
      a.rotation = b.rotation * rodrigues_to_matrix(gaussian3(rng, spec.noise.sigma_ahrs));
    }
    out.imu.push_back(s);
    out.ahrs.push_back(a);
  }
  return out;
}

std::vector<RangeSample> synthesize_range(const Scenario& scenario) {
  const ScenarioSpec& spec = scenario.spec();
  const std::size_t n = sample_count(spec.duration, spec.range_rate);
  std::mt19937_64 rng = stream_rng(spec.seed, 2);
  std::normal_distribution<double> noise(0.0, std::max(spec.noise.sigma_range, 0.0));
  std::vector<RangeSample> out;
  out.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double t = canonical_timestamp(static_cast<double>(k) / spec.range_rate);
    const CameraPose pose = scenario.camera_pose(t);
    const Eigen::Vector3d beam = pose.rotation.col(2);
    const double denom = scenario.plane().normal_up.dot(beam);
    const double height = scenario.plane().height_of(pose.center);
    // Draw even for dropped samples so the noise sequence does not depend on geometry.
    const double e = spec.noise.sigma_range > 0.0 ? noise(rng) : 0.0;
    if (!(denom < -1e-9) || !(height > 0.0)) {
      continue;
    }
    out.push_back({t, height / -denom + e});
  }
  return out;
}

std::vector<GroundTruthSample> synthesize_ground_truth(const Scenario& scenario) {
  const std::vector<double> times = scenario.frame_times();
  std::vector<GroundTruthSample> truth;
  truth.reserve(times.size());
  for (double t : times) {
    truth.push_back(scenario.ground_truth_at(t, truth.empty() ? nullptr : &truth.back()));
  }
  return truth;
}

Dataset make_dataset(const Scenario& scenario) {
  const auto shared = std::make_shared<const Scenario>(scenario);
  const ScenarioSpec& spec = shared->spec();
  Dataset d;
  d.meta.name = spec.name;
  d.meta.width = spec.width;
  d.meta.height = spec.height;
  d.meta.camera = spec.camera;
  d.meta.extrinsics = spec.extrinsics;
  d.meta.image_rate = spec.image_rate;
  d.meta.imu_rate = spec.imu_rate;
  d.meta.range_rate = spec.range_rate;
  d.meta.seed = spec.seed;
  d.frame_times = shared->frame_times();
  ImuStreams imu = synthesize_imu(*shared);
  d.imu = std::move(imu.imu);
  d.ahrs = std::move(imu.ahrs);
  d.range = synthesize_range(*shared);
  d.truth = synthesize_ground_truth(*shared);
  for (std::size_t i = 0; i < d.frame_times.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "frames/%06zu.pgm", i);
    d.frame_files.emplace_back(name);
  }
  const std::vector<double> times = d.frame_times;
  d.frame_loader = [shared, times](std::size_t i) {
    const GrayImage img = render_frame(*shared, shared->camera_pose(times.at(i)), times[i]);
    const auto bytes = img.to_bytes();
    return GrayImage::from_bytes(img.width(), img.height(), bytes, times[i]);
  };
  return d;
}

void write_dataset(const ScenarioSpec& spec, const std::filesystem::path& out_dir) {
  const Scenario scenario(spec);
  const bool existed = std::filesystem::exists(out_dir);
  try {
    write_dataset_files(make_dataset(scenario), out_dir);
  } catch (...) {
    std::error_code ec;
    if (!existed) {
      std::filesystem::remove_all(out_dir, ec);
    } else {
      for (const char* f : {"manifest.txt", "frames.csv", "imu.csv", "ahrs.csv", "range.csv",
                            "groundtruth.csv"}) {
        std::filesystem::remove(out_dir / f, ec);
      }
      std::filesystem::remove_all(out_dir / "frames", ec);
    }
    throw;
  }
}

}  // namespace hvio
