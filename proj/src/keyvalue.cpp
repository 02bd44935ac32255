#include "hvio/keyvalue.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace hvio {

namespace {

std::string trim(const std::string& s) {
  const auto first = std::find_if_not(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); });
  const auto last = std::find_if_not(s.rbegin(), s.rend(), [](unsigned char c) { return std::isspace(c); }).base();
  return first < last ? std::string(first, last) : std::string();
}

std::optional<double> parse_number(const std::string& text) {
  const std::string s = trim(text);
  if (s.empty()) {
    return std::nullopt;
  }
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size()) {
    return std::nullopt;
  }
  return v;
}

}  // namespace

std::string format_double(double x) {
  char buf[32];
  for (int precision = 15; precision <= 17; ++precision) {
    std::snprintf(buf, sizeof(buf), "%.*g", precision, x);
    if (std::strtod(buf, nullptr) == x) {
      break;
    }
  }
  return buf;
}

KeyValueFile KeyValueFile::parse(std::istream& in, const std::string& source) {
  KeyValueFile kv;
  kv.source_ = source;
  std::string section;
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    const auto hash = line.find('#');
    if (hash != std::string::npos) {
      line.erase(hash);
    }
    line = trim(line);
    if (line.empty()) {
      continue;
    }
    const std::string where = source + ":" + std::to_string(number);
    if (line.front() == '[') {
      if (line.back() != ']') {
        throw ConfigError(where, "unterminated section header");
      }
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(where, "expected 'key = value'");
    }
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) {
      throw ConfigError(where, "empty key");
    }
    const std::string full = section.empty() ? key : section + "." + key;
    if (kv.has(full)) {
      throw ConfigError(full, "duplicate key at " + where);
    }
    kv.entries_.emplace_back(full, trim(line.substr(eq + 1)));
  }
  return kv;
}

KeyValueFile KeyValueFile::parse_string(const std::string& text, const std::string& source) {
  std::istringstream in(text);
  return parse(in, source);
}

KeyValueFile KeyValueFile::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError(path.string(), "cannot open file");
  }
  return parse(in, path.string());
}

bool KeyValueFile::has(const std::string& key) const { return get(key).has_value(); }

std::optional<std::string> KeyValueFile::get(const std::string& key) const {
  for (const auto& [k, v] : entries_) {
    if (k == key) {
      return v;
    }
  }
  return std::nullopt;
}

std::string KeyValueFile::get_string(const std::string& key, const std::string& fallback) const {
  return get(key).value_or(fallback);
}

std::string KeyValueFile::require(const std::string& key) const {
  const auto v = get(key);
  if (!v) {
    throw ConfigError(key, "missing required key in " + source_);
  }
  return *v;
}

double KeyValueFile::get_double(const std::string& key, double fallback) const {
  const auto v = get(key);
  if (!v) {
    return fallback;
  }
  const auto x = parse_number(*v);
  if (!x) {
    throw ConfigError(key, "expected a number, got '" + *v + "'");
  }
  return *x;
}

double KeyValueFile::require_double(const std::string& key) const {
  require(key);
  return get_double(key, 0.0);
}

int KeyValueFile::get_int(const std::string& key, int fallback) const {
  const auto v = get(key);
  if (!v) {
    return fallback;
  }
  int x = 0;
  const auto [ptr, ec] = std::from_chars(v->data(), v->data() + v->size(), x);
  if (ec != std::errc() || ptr != v->data() + v->size()) {
    throw ConfigError(key, "expected an integer, got '" + *v + "'");
  }
  return x;
}

std::uint64_t KeyValueFile::get_uint64(const std::string& key, std::uint64_t fallback) const {
  const auto v = get(key);
  if (!v) {
    return fallback;
  }
  std::uint64_t x = 0;
  const auto [ptr, ec] = std::from_chars(v->data(), v->data() + v->size(), x);
  if (ec != std::errc() || ptr != v->data() + v->size()) {
    throw ConfigError(key, "expected a non-negative integer, got '" + *v + "'");
  }
  return x;
}

bool KeyValueFile::get_bool(const std::string& key, bool fallback) const {
  const auto v = get(key);
  if (!v) {
    return fallback;
  }
  if (*v == "true" || *v == "1" || *v == "yes" || *v == "on") {
    return true;
  }
  if (*v == "false" || *v == "0" || *v == "no" || *v == "off") {
    return false;
  }
  throw ConfigError(key, "expected a boolean, got '" + *v + "'");
}

Eigen::VectorXd KeyValueFile::get_vector(const std::string& key, int n) const {
  std::string text = require(key);
  std::replace(text.begin(), text.end(), ',', ' ');
  std::istringstream in(text);
  std::vector<double> values;
  std::string token;
  while (in >> token) {
    const auto x = parse_number(token);
    if (!x) {
      throw ConfigError(key, "expected numbers, got '" + token + "'");
    }
    values.push_back(*x);
  }
  if (static_cast<int>(values.size()) != n) {
    throw ConfigError(key, "expected " + std::to_string(n) + " numbers, got " +
                               std::to_string(values.size()));
  }
  return Eigen::Map<Eigen::VectorXd>(values.data(), n);
}

void KeyValueFile::set(const std::string& key, const std::string& value) {
  for (auto& [k, v] : entries_) {
    if (k == key) {
      v = value;
      return;
    }
  }
  entries_.emplace_back(key, value);
}

void KeyValueFile::reject_unknown(const std::set<std::string>& allowed) const {
  for (const auto& [k, v] : entries_) {
    if (!allowed.count(k)) {
      throw ConfigError(k, "unknown key in " + source_);
    }
  }
}

std::string KeyValueFile::serialize() const {
  std::ostringstream out;
  std::string section;
  for (const auto& [k, v] : entries_) {
    const auto dot = k.find('.');
    const std::string s = dot == std::string::npos ? "" : k.substr(0, dot);
    const std::string name = dot == std::string::npos ? k : k.substr(dot + 1);
    if (s != section) {
      out << "\n[" << s << "]\n";
      section = s;
    }
    out << name << " = " << v << "\n";
  }
  return out.str();
}

}  // namespace hvio
