#pragma once

#include <stdexcept>
#include <string>

#include <Eigen/Core>

namespace hvio {

using Vector6d = Eigen::Matrix<double, 6, 1>;
using Vector7d = Eigen::Matrix<double, 7, 1>;
using Matrix6d = Eigen::Matrix<double, 6, 6>;
using Matrix7d = Eigen::Matrix<double, 7, 7>;

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Image or matrix dimensions do not satisfy an operation's precondition.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// The warp matrix collapsed (|det H| below tolerance).
class DegenerateWarpError : public Error {
 public:
  using Error::Error;
};

/// Homogeneous coordinate vanished while applying a warp.
class PointAtInfinityError : public Error {
 public:
  using Error::Error;
};

/// Too few evaluation pixels survived the warp.
class InsufficientOverlapError : public Error {
 public:
  using Error::Error;
};

/// Sensor streams are out of order or otherwise malformed.
class StreamError : public Error {
 public:
  using Error::Error;
};

/// Two tracks could not be paired by timestamp.
class PairingError : public Error {
 public:
  using Error::Error;
};

/// Tracks do not overlap enough for the requested metric.
class SpanError : public Error {
 public:
  using Error::Error;
};

/// A metric is undefined for the given input (e.g. zero path length).
class UndefinedMetricError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration or scenario file. Carries the offending field.
class ConfigError : public Error {
 public:
  ConfigError(std::string field, const std::string& what)
      : Error(field.empty() ? what : field + ": " + what), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

/// File system or parse failure while reading or writing datasets.
class IoError : public Error {
 public:
  using Error::Error;
};

inline constexpr double kGravity = 9.81;

}  // namespace hvio
