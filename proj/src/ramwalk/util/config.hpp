#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>

namespace ramwalk::util {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Plain-text key/value configuration with optional [section] headers:
//
//   # comment
//   [generate]
//   height = 16
//
// Keys before any header belong to the "" section. Lookups fall back from the
// requested section to the "" section, then to the supplied default.
class KeyValueConfig {
 public:
  static KeyValueConfig parse(const std::string& text);
  static KeyValueConfig load(const std::string& path);

  void set(const std::string& section, const std::string& key, const std::string& value);
  bool has(const std::string& section, const std::string& key) const;

  std::string get_string(const std::string& section, const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& section, const std::string& key, double fallback) const;
  std::int64_t get_int(const std::string& section, const std::string& key, std::int64_t fallback) const;
  bool get_bool(const std::string& section, const std::string& key, bool fallback) const;

  // Canonical text form: sections and keys sorted.
  std::string dump() const;

  const std::map<std::string, std::map<std::string, std::string>>& sections() const { return values_; }

 private:
  const std::string* find(const std::string& section, const std::string& key) const;
  std::map<std::string, std::map<std::string, std::string>> values_;
};

}  // namespace ramwalk::util
