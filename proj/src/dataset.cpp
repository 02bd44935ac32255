#include "hvio/dataset.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "hvio/keyvalue.hpp"

namespace hvio {

namespace fs = std::filesystem;

namespace {

constexpr const char* kFormat = "hvio-dataset-1";

const std::vector<std::string> kImuColumns = {"timestamp", "f_x", "f_y", "f_z",
                                              "w_x",       "w_y", "w_z"};
const std::vector<std::string> kAhrsColumns = {"timestamp", "r00", "r01", "r02", "r10",
                                               "r11",       "r12", "r20", "r21", "r22"};
const std::vector<std::string> kRangeColumns = {"timestamp", "range"};
const std::vector<std::string> kTruthColumns = {
    "timestamp", "p_x",  "p_y",  "p_z",  "r00",  "r01",  "r02",  "r10",  "r11",  "r12",
    "r20",       "r21",  "r22",  "vw_x", "vw_y", "vw_z", "vb_x", "vb_y", "vb_z", "vc_x",
    "vc_y",      "vc_z", "d",    "n_x",  "n_y",  "n_z",  "t_x",  "t_y",  "t_z",  "rv_x",
    "rv_y",      "rv_z"};

std::string join(const std::vector<std::string>& cols) {
  std::string s;
  for (std::size_t i = 0; i < cols.size(); ++i) {
    s += (i ? "," : "") + cols[i];
  }
  return s;
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) {
    out.push_back(cell);
  }
  if (!line.empty() && line.back() == ',') {
    out.emplace_back();
  }
  return out;
}

std::ifstream open_in(const fs::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw IoError("cannot open " + path.string());
  }
  return in;
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path);
  if (!out) {
    throw IoError("cannot write " + path.string());
  }
  return out;
}

void expect_header(std::istream& in, const fs::path& path, const std::vector<std::string>& cols) {
  std::string line;
  if (!std::getline(in, line)) {
    throw IoError(path.string() + ": missing header row");
  }
  if (!line.empty() && line.back() == '\r') {
    line.pop_back();
  }
  if (line != join(cols)) {
    throw IoError(path.string() + ": unexpected header '" + line + "', expected '" + join(cols) +
                  "'");
  }
}

// Numeric table with a fixed header.
std::vector<std::vector<double>> read_table(const fs::path& path,
                                            const std::vector<std::string>& cols) {
  std::ifstream in = open_in(path);
  expect_header(in, path, cols);
  std::vector<std::vector<double>> rows;
  std::string line;
  int number = 1;
  while (std::getline(in, line)) {
    ++number;
    if (!line.empty() && line.back() == '\r') {
      line.pop_back();
    }
    if (line.empty()) {
      continue;
    }
    const auto cells = split(line);
    if (cells.size() != cols.size()) {
      throw IoError(path.string() + ":" + std::to_string(number) + ": expected " +
                    std::to_string(cols.size()) + " columns");
    }
    std::vector<double> row;
    row.reserve(cells.size());
    for (const auto& c : cells) {
      char* end = nullptr;
      const double v = std::strtod(c.c_str(), &end);
      if (c.empty() || end != c.c_str() + c.size()) {
        throw IoError(path.string() + ":" + std::to_string(number) + ": bad number '" + c + "'");
      }
      row.push_back(v);
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

void write_row(std::ostream& out, double t, std::initializer_list<double> values) {
  out << format_timestamp(t);
  for (double v : values) {
    out << ',' << format_double(v);
  }
  out << '\n';
}

template <typename Sample>
void check_sorted(const std::vector<Sample>& s, const std::string& name) {
  for (std::size_t i = 1; i < s.size(); ++i) {
    if (!(s[i].timestamp > s[i - 1].timestamp)) {
      throw StreamError(name + " timestamps must strictly increase (row " + std::to_string(i) +
                        ")");
    }
  }
}

Eigen::Matrix3d matrix_from(const std::vector<double>& row, std::size_t offset) {
  Eigen::Matrix3d m;
  for (int i = 0; i < 9; ++i) {
    m(i / 3, i % 3) = row[offset + i];
  }
  return m;
}

}  // namespace

GrayImage Dataset::frame(std::size_t i) const {
  if (i >= frame_count()) {
    throw IoError("frame index " + std::to_string(i) + " out of range");
  }
  if (!frame_loader) {
    throw IoError("dataset has no frame source");
  }
  return frame_loader(i);
}

std::string format_timestamp(double t) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.9f", t);
  return buf;
}

double canonical_timestamp(double t) { return std::strtod(format_timestamp(t).c_str(), nullptr); }

std::vector<GroundTruthSample> read_groundtruth_csv(const fs::path& path) {
  std::vector<GroundTruthSample> out;
  for (const auto& r : read_table(path, kTruthColumns)) {
    GroundTruthSample g;
    g.timestamp = r[0];
    g.position = {r[1], r[2], r[3]};
    g.attitude = matrix_from(r, 4);
    g.velocity_world = {r[13], r[14], r[15]};
    g.velocity_body = {r[16], r[17], r[18]};
    g.velocity_camera = {r[19], r[20], r[21]};
    g.distance = r[22];
    g.normal = {r[23], r[24], r[25]};
    g.inter_t = {r[26], r[27], r[28]};
    g.inter_r = {r[29], r[30], r[31]};
    out.push_back(g);
  }
  check_sorted(out, "groundtruth");
  return out;
}

void write_groundtruth_csv(const fs::path& path, const std::vector<GroundTruthSample>& truth) {
  std::ofstream out = open_out(path);
  out << join(kTruthColumns) << '\n';
  for (const auto& g : truth) {
    const auto& a = g.attitude;
    write_row(out, g.timestamp,
              {g.position.x(), g.position.y(), g.position.z(), a(0, 0), a(0, 1), a(0, 2), a(1, 0),
               a(1, 1), a(1, 2), a(2, 0), a(2, 1), a(2, 2), g.velocity_world.x(),
               g.velocity_world.y(), g.velocity_world.z(), g.velocity_body.x(),
               g.velocity_body.y(), g.velocity_body.z(), g.velocity_camera.x(),
               g.velocity_camera.y(), g.velocity_camera.z(), g.distance, g.normal.x(),
               g.normal.y(), g.normal.z(), g.inter_t.x(), g.inter_t.y(), g.inter_t.z(),
               g.inter_r.x(), g.inter_r.y(), g.inter_r.z()});
  }
  if (!out) {
    throw IoError("write failed: " + path.string());
  }
}

void write_dataset_files(const Dataset& data, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir / "frames", ec);
  if (ec) {
    throw IoError("cannot create " + (dir / "frames").string() + ": " + ec.message());
  }
  const DatasetMeta& m = data.meta;

  KeyValueFile kv;
  kv.set("format", kFormat);
  kv.set("name", m.name);
  kv.set("seed", std::to_string(m.seed));
  kv.set("camera.width", std::to_string(m.width));
  kv.set("camera.height", std::to_string(m.height));
  kv.set("camera.fx", format_double(m.camera.fx));
  kv.set("camera.fy", format_double(m.camera.fy));
  kv.set("camera.cx", format_double(m.camera.cx));
  kv.set("camera.cy", format_double(m.camera.cy));
  std::string r_ci;
  for (int i = 0; i < 9; ++i) {
    r_ci += (i ? " " : "") + format_double(m.extrinsics.r_ci(i / 3, i % 3));
  }
  kv.set("extrinsics.r_ci", r_ci);
  kv.set("extrinsics.p_ic", format_double(m.extrinsics.p_ic.x()) + " " +
                                format_double(m.extrinsics.p_ic.y()) + " " +
                                format_double(m.extrinsics.p_ic.z()));
  kv.set("rates.image", format_double(m.image_rate));
  kv.set("rates.imu", format_double(m.imu_rate));
  kv.set("rates.range", format_double(m.range_rate));
  kv.set("files.frames", "frames.csv");
  kv.set("files.imu", "imu.csv");
  kv.set("files.ahrs", "ahrs.csv");
  kv.set("files.range", "range.csv");
  if (!data.truth.empty()) {
    kv.set("files.groundtruth", "groundtruth.csv");
  }
  kv.set("counts.frames", std::to_string(data.frame_count()));
  {
    std::ofstream out = open_out(dir / "manifest.txt");
    out << "# hvio dataset manifest\n" << kv.serialize();
  }

  {
    std::ofstream out = open_out(dir / "frames.csv");
    out << "timestamp,file\n";
    for (std::size_t i = 0; i < data.frame_count(); ++i) {
      char name[32];
      std::snprintf(name, sizeof(name), "frames/%06zu.pgm", i);
      out << format_timestamp(data.frame_times[i]) << ',' << name << '\n';
      write_pgm(dir / name, data.frame(i));
    }
  }
  {
    std::ofstream out = open_out(dir / "imu.csv");
    out << join(kImuColumns) << '\n';
    for (const auto& s : data.imu) {
      write_row(out, s.timestamp,
                {s.f_m.x(), s.f_m.y(), s.f_m.z(), s.omega_m.x(), s.omega_m.y(), s.omega_m.z()});
    }
  }
  {
    std::ofstream out = open_out(dir / "ahrs.csv");
    out << join(kAhrsColumns) << '\n';
    for (const auto& s : data.ahrs) {
      const auto& r = s.rotation;
      write_row(out, s.timestamp,
                {r(0, 0), r(0, 1), r(0, 2), r(1, 0), r(1, 1), r(1, 2), r(2, 0), r(2, 1), r(2, 2)});
    }
  }
  {
    std::ofstream out = open_out(dir / "range.csv");
    out << join(kRangeColumns) << '\n';
    for (const auto& s : data.range) {
      write_row(out, s.timestamp, {s.range});
    }
  }
  if (!data.truth.empty()) {
    write_groundtruth_csv(dir / "groundtruth.csv", data.truth);
  }
}

Dataset load_dataset(const fs::path& dir) {
  const fs::path manifest = dir / "manifest.txt";
  if (!fs::exists(manifest)) {
    throw ConfigError("dataset", "no manifest.txt in " + dir.string());
  }
  const KeyValueFile kv = KeyValueFile::load(manifest);
  if (kv.get_string("format", "") != kFormat) {
    throw ConfigError("format", "unsupported dataset format in " + manifest.string());
  }
  Dataset d;
  DatasetMeta& m = d.meta;
  m.name = kv.get_string("name", "");
  m.seed = kv.get_uint64("seed", 0);
  m.width = kv.get_int("camera.width", 0);
  m.height = kv.get_int("camera.height", 0);
  m.camera = CameraIntrinsics::make(kv.require_double("camera.fx"), kv.require_double("camera.fy"),
                                    kv.require_double("camera.cx"), kv.require_double("camera.cy"));
  const Eigen::VectorXd r = kv.get_vector("extrinsics.r_ci", 9);
  for (int i = 0; i < 9; ++i) {
    m.extrinsics.r_ci(i / 3, i % 3) = r[i];
  }
  if (!is_rotation(m.extrinsics.r_ci, 1e-6)) {
    throw ConfigError("extrinsics.r_ci", "not a rotation matrix");
  }
  m.extrinsics.p_ic = kv.get_vector("extrinsics.p_ic", 3);
  m.image_rate = kv.require_double("rates.image");
  m.imu_rate = kv.require_double("rates.imu");
  m.range_rate = kv.require_double("rates.range");

  const fs::path frames_csv = dir / kv.require("files.frames");
  {
    std::ifstream in = open_in(frames_csv);
    expect_header(in, frames_csv, {"timestamp", "file"});
    std::string line;
    while (std::getline(in, line)) {
      if (!line.empty() && line.back() == '\r') {
        line.pop_back();
      }
      if (line.empty()) {
        continue;
      }
      const auto cells = split(line);
      if (cells.size() != 2) {
        throw IoError(frames_csv.string() + ": expected 2 columns");
      }
      d.frame_times.push_back(std::strtod(cells[0].c_str(), nullptr));
      d.frame_files.push_back(cells[1]);
    }
  }
  for (std::size_t i = 1; i < d.frame_times.size(); ++i) {
    if (!(d.frame_times[i] > d.frame_times[i - 1])) {
      throw StreamError("frame timestamps must strictly increase");
    }
  }
  if (kv.has("counts.frames") &&
      static_cast<std::size_t>(kv.get_int("counts.frames", 0)) != d.frame_count()) {
    throw IoError("manifest frame count does not match frames.csv");
  }

  for (const auto& row : read_table(dir / kv.require("files.imu"), kImuColumns)) {
    d.imu.push_back({row[0], {row[1], row[2], row[3]}, {row[4], row[5], row[6]}});
  }
  for (const auto& row : read_table(dir / kv.require("files.ahrs"), kAhrsColumns)) {
    d.ahrs.push_back({row[0], matrix_from(row, 1)});
  }
  for (const auto& row : read_table(dir / kv.require("files.range"), kRangeColumns)) {
    d.range.push_back({row[0], row[1]});
  }
  check_sorted(d.imu, "imu");
  check_sorted(d.ahrs, "ahrs");
  check_sorted(d.range, "range");
  if (const auto gt = kv.get("files.groundtruth"); gt && fs::exists(dir / *gt)) {
    d.truth = read_groundtruth_csv(dir / *gt);
  }

  const std::vector<std::string> files = d.frame_files;
  const std::vector<double> times = d.frame_times;
  const int w = m.width;
  const int h = m.height;
  d.frame_loader = [dir, files, times, w, h](std::size_t i) {
    GrayImage img = read_pgm(dir / files.at(i), times.at(i));
    if (img.width() != w || img.height() != h) {
      throw DimensionError("frame " + files[i] + " does not match the manifest resolution");
    }
    return img;
  };
  return d;
}

}  // namespace hvio
