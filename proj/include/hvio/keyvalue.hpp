#pragma once

#include <cstdint>
#include <filesystem>
#include <istream>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "hvio/common.hpp"

namespace hvio {

/// Flat `key = value` file with `[section]` headers. Keys are addressed as "section.key".
/// '#' starts a comment. Typed getters throw ConfigError naming the key.
class KeyValueFile {
 public:
  static KeyValueFile parse(std::istream& in, const std::string& source = "<input>");
  static KeyValueFile parse_string(const std::string& text, const std::string& source = "<input>");
  /// Throws ConfigError when the file cannot be opened.
  static KeyValueFile load(const std::filesystem::path& path);

  bool has(const std::string& key) const;
  std::optional<std::string> get(const std::string& key) const;
  std::string get_string(const std::string& key, const std::string& fallback) const;
  std::string require(const std::string& key) const;
  double get_double(const std::string& key, double fallback) const;
  double require_double(const std::string& key) const;
  int get_int(const std::string& key, int fallback) const;
  std::uint64_t get_uint64(const std::string& key, std::uint64_t fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  /// Whitespace- or comma-separated list of exactly n numbers.
  Eigen::VectorXd get_vector(const std::string& key, int n) const;

  void set(const std::string& key, const std::string& value);
  const std::vector<std::pair<std::string, std::string>>& entries() const { return entries_; }
  /// Throws ConfigError for the first key outside `allowed`.
  void reject_unknown(const std::set<std::string>& allowed) const;
  std::string serialize() const;
  const std::string& source() const { return source_; }

 private:
  std::vector<std::pair<std::string, std::string>> entries_;
  std::string source_;
};

/// Shortest text that parses back to exactly the same double.
std::string format_double(double x);

}  // namespace hvio
