#include "hvio/image.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>

namespace hvio {

GrayImage::GrayImage(int width, int height, std::vector<double> data, double timestamp)
    : width_(width), height_(height), data_(std::move(data)), timestamp_(timestamp) {
  if (width < 1 || height < 1) {
    throw DimensionError("image dimensions must be positive");
  }
  if (data_.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
    throw DimensionError("image data length does not match width * height");
  }
  for (double v : data_) {
    if (!(v >= 0.0 && v <= 1.0)) {
      throw DimensionError("image intensity outside [0, 1]");
    }
  }
}

GrayImage GrayImage::filled(int width, int height, double value, double timestamp) {
  return GrayImage(width, height,
                   std::vector<double>(static_cast<std::size_t>(width) * height, value),
                   timestamp);
}

GrayImage GrayImage::from_bytes(int width, int height, std::span<const std::uint8_t> bytes,
                                double timestamp) {
  std::vector<double> data(bytes.size());
  std::transform(bytes.begin(), bytes.end(), data.begin(),
                 [](std::uint8_t b) { return static_cast<double>(b) / 255.0; });
  return GrayImage(width, height, std::move(data), timestamp);
}

std::vector<std::uint8_t> GrayImage::to_bytes() const {
  std::vector<std::uint8_t> out(data_.size());
  std::transform(data_.begin(), data_.end(), out.begin(), [](double v) {
    return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
  });
  return out;
}

GrayImage GrayImage::downsample() const {
  const int w = width_ / 2;
  const int h = height_ / 2;
  if (w < 1 || h < 1) {
    throw DimensionError("image too small to downsample");
  }
  std::vector<double> out(static_cast<std::size_t>(w) * h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      out[static_cast<std::size_t>(y) * w + x] =
          0.25 * (at(2 * x, 2 * y) + at(2 * x + 1, 2 * y) + at(2 * x, 2 * y + 1) +
                  at(2 * x + 1, 2 * y + 1));
    }
  }
  return GrayImage(w, h, std::move(out), timestamp_);
}

double GradientField::magnitude(int x, int y) const {
  const std::size_t i = static_cast<std::size_t>(y) * width + x;
  return std::hypot(gx[i], gy[i]);
}

namespace {

// Cell origin and fractional offsets; the last row/column reuse the previous cell so the
// far border is reachable with fraction 1.
struct Cell {
  int x0, y0;
  double fx, fy;
};

std::optional<Cell> locate(const GrayImage& img, double x, double y) {
  const double xmax = img.width() - 1;
  const double ymax = img.height() - 1;
  if (!(x >= 0.0 && x <= xmax && y >= 0.0 && y <= ymax)) {
    return std::nullopt;
  }
  int x0 = static_cast<int>(x);
  int y0 = static_cast<int>(y);
  x0 = std::min(x0, std::max(img.width() - 2, 0));
  y0 = std::min(y0, std::max(img.height() - 2, 0));
  return Cell{x0, y0, x - x0, y - y0};
}

}  // namespace

std::optional<double> sample_bilinear(const GrayImage& img, double x, double y) {
  const auto cell = locate(img, x, y);
  if (!cell) {
    return std::nullopt;
  }
  const auto [x0, y0, fx, fy] = *cell;
  // Degenerate 1-pixel-wide images only ever hit fraction 0.
  const int x1 = std::min(x0 + 1, img.width() - 1);
  const int y1 = std::min(y0 + 1, img.height() - 1);
  const double top = (1.0 - fx) * img.at(x0, y0) + fx * img.at(x1, y0);
  const double bottom = (1.0 - fx) * img.at(x0, y1) + fx * img.at(x1, y1);
  return (1.0 - fy) * top + fy * bottom;
}

std::optional<IntensitySample> sample_bilinear_with_gradient(const GrayImage& img, double x,
                                                             double y) {
  if (img.width() < 2 || img.height() < 2) {
    throw DimensionError("bilinear gradient needs at least a 2x2 image");
  }
  const auto cell = locate(img, x, y);
  if (!cell) {
    return std::nullopt;
  }
  const auto [x0, y0, fx, fy] = *cell;
  const double i00 = img.at(x0, y0);
  const double i10 = img.at(x0 + 1, y0);
  const double i01 = img.at(x0, y0 + 1);
  const double i11 = img.at(x0 + 1, y0 + 1);
  const double top = (1.0 - fx) * i00 + fx * i10;
  const double bottom = (1.0 - fx) * i01 + fx * i11;
  IntensitySample s;
  s.value = (1.0 - fy) * top + fy * bottom;
  s.dx = (1.0 - fy) * (i10 - i00) + fy * (i11 - i01);
  s.dy = bottom - top;
  return s;
}

GradientField gradient(const GrayImage& img) {
  const int w = img.width();
  const int h = img.height();
  if (w < 3 || h < 3) {
    throw DimensionError("gradient requires an image of at least 3x3 pixels");
  }
  GradientField field;
  field.width = w;
  field.height = h;
  field.gx.resize(static_cast<std::size_t>(w) * h);
  field.gy.resize(static_cast<std::size_t>(w) * h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * w + x;
      if (x == 0) {
        field.gx[i] = img.at(1, y) - img.at(0, y);
      } else if (x == w - 1) {
        field.gx[i] = img.at(w - 1, y) - img.at(w - 2, y);
      } else {
        field.gx[i] = 0.5 * (img.at(x + 1, y) - img.at(x - 1, y));
      }
      if (y == 0) {
        field.gy[i] = img.at(x, 1) - img.at(x, 0);
      } else if (y == h - 1) {
        field.gy[i] = img.at(x, h - 1) - img.at(x, h - 2);
      } else {
        field.gy[i] = 0.5 * (img.at(x, y + 1) - img.at(x, y - 1));
      }
    }
  }
  return field;
}

PixelSet select_pixels(const GradientField& field, std::size_t budget, double threshold) {
  if (budget < 1) {
    throw ConfigError("budget", "pixel budget must be at least 1");
  }
  struct Candidate {
    double magnitude;
    std::size_t index;
  };
  std::vector<Candidate> candidates;
  const int w = field.width;
  const int h = field.height;
  for (int y = 1; y < h - 1; ++y) {
    for (int x = 1; x < w - 1; ++x) {
      const double m = field.magnitude(x, y);
      if (m >= threshold) {
        candidates.push_back({m, static_cast<std::size_t>(y) * w + x});
      }
    }
  }
  const auto stronger = [](const Candidate& a, const Candidate& b) {
    return a.magnitude != b.magnitude ? a.magnitude > b.magnitude : a.index < b.index;
  };
  if (candidates.size() > budget) {
    std::nth_element(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(budget),
                     candidates.end(), stronger);
    candidates.resize(budget);
  }
  std::sort(candidates.begin(), candidates.end(),
            [](const Candidate& a, const Candidate& b) { return a.index < b.index; });

  PixelSet set;
  set.coords.reserve(candidates.size());
  for (const auto& c : candidates) {
    set.coords.push_back({static_cast<double>(c.index % w), static_cast<double>(c.index / w)});
  }
  return set;
}

namespace {

std::string next_token(std::istream& in) {
  std::string token;
  while (in) {
    int c = in.peek();
    if (c == '#') {
      std::string comment;
      std::getline(in, comment);
    } else if (std::isspace(c)) {
      in.get();
    } else {
      break;
    }
  }
  in >> token;
  return token;
}

}  // namespace

GrayImage read_pgm(const std::filesystem::path& path, double timestamp) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError("cannot open " + path.string());
  }
  if (next_token(in) != "P5") {
    throw IoError(path.string() + ": not a binary PGM (P5)");
  }
  int width = 0;
  int height = 0;
  int maxval = 0;
  try {
    width = std::stoi(next_token(in));
    height = std::stoi(next_token(in));
    maxval = std::stoi(next_token(in));
  } catch (const std::exception&) {
    throw IoError(path.string() + ": malformed PGM header");
  }
  if (width < 1 || height < 1 || maxval < 1 || maxval > 255) {
    throw IoError(path.string() + ": unsupported PGM dimensions or depth");
  }
  in.get();  // single whitespace before the raster
  std::vector<std::uint8_t> bytes(static_cast<std::size_t>(width) * height);
  in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (in.gcount() != static_cast<std::streamsize>(bytes.size())) {
    throw IoError(path.string() + ": truncated PGM raster");
  }
  std::vector<double> data(bytes.size());
  for (std::size_t i = 0; i < bytes.size(); ++i) {
    data[i] = static_cast<double>(bytes[i]) / maxval;
  }
  return GrayImage(width, height, std::move(data), timestamp);
}

void write_pgm(const std::filesystem::path& path, const GrayImage& img) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw IoError("cannot write " + path.string());
  }
  out << "P5\n" << img.width() << ' ' << img.height() << "\n255\n";
  const auto bytes = img.to_bytes();
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) {
    throw IoError("failed writing " + path.string());
  }
}

}  // namespace hvio
