#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "hvio/common.hpp"

namespace hvio {

/// Row-major grayscale raster with intensities in [0, 1].
class GrayImage {
 public:
  GrayImage() = default;
  /// Throws DimensionError if data.size() != width * height or a value is outside [0, 1].
  GrayImage(int width, int height, std::vector<double> data, double timestamp = 0.0);

  static GrayImage filled(int width, int height, double value, double timestamp = 0.0);
  /// 8-bit samples are mapped to [0, 1] by dividing by 255.
  static GrayImage from_bytes(int width, int height, std::span<const std::uint8_t> bytes,
                              double timestamp = 0.0);

  int width() const { return width_; }
  int height() const { return height_; }
  double timestamp() const { return timestamp_; }
  std::span<const double> data() const { return data_; }

  double at(int x, int y) const { return data_[static_cast<std::size_t>(y) * width_ + x]; }

  /// Rounds every sample to the nearest 8-bit level.
  std::vector<std::uint8_t> to_bytes() const;

  /// 2x2 box-filtered half-resolution copy.
  GrayImage downsample() const;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<double> data_;
  double timestamp_ = 0.0;
};

/// Central-difference image derivatives (intensity per pixel).
struct GradientField {
  int width = 0;
  int height = 0;
  std::vector<double> gx;
  std::vector<double> gy;

  double magnitude(int x, int y) const;
};

struct Pixel {
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const Pixel&, const Pixel&) = default;
};

/// Evaluation pixels chosen on one image. Coordinates stay at least one pixel inside the border.
struct PixelSet {
  std::vector<Pixel> coords;
  double source_timestamp = 0.0;

  std::size_t size() const { return coords.size(); }
  bool empty() const { return coords.empty(); }
};

struct IntensitySample {
  double value = 0.0;
  double dx = 0.0;  ///< derivative of the bilinear interpolant along x
  double dy = 0.0;
};

/// Bilinear interpolation. std::nullopt when (x, y) is outside [0, w-1] x [0, h-1].
std::optional<double> sample_bilinear(const GrayImage& img, double x, double y);

/// Bilinear value together with the exact gradient of the interpolating surface.
std::optional<IntensitySample> sample_bilinear_with_gradient(const GrayImage& img, double x,
                                                             double y);

/// Central differences in the interior, one-sided on the border.
/// Throws DimensionError for images smaller than 3x3.
GradientField gradient(const GrayImage& img);

/// Up to `budget` interior pixels with gradient magnitude >= threshold, strongest first with
/// row-major tie-break. The returned set is ordered row-major.
PixelSet select_pixels(const GradientField& field, std::size_t budget, double threshold);

/// Binary 8-bit PGM (P5).
GrayImage read_pgm(const std::filesystem::path& path, double timestamp = 0.0);
void write_pgm(const std::filesystem::path& path, const GrayImage& img);

}  // namespace hvio
