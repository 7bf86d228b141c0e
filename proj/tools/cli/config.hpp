#pragma once

#include <istream>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace gsfcli {

/// Malformed configuration; the message names the offending key or line.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Flat `section.key = value` configuration. Lines starting with `#` and
/// blank lines are ignored; lists are comma separated.
class Config {
 public:
  static Config parse(std::istream& in, const std::string& source = "<config>");
  static Config load(const std::string& path);

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  void set(const std::string& key, const std::string& value) { values_[key] = value; }

  std::string str(const std::string& key, const std::string& fallback) const;
  std::string str(const std::string& key) const;
  /// One of `choices`, or a ConfigError naming the key.
  std::string choice(const std::string& key, const std::string& fallback, const std::vector<std::string>& choices) const;
  double num(const std::string& key, double fallback) const;
  double num(const std::string& key) const;
  std::optional<double> opt_num(const std::string& key) const;
  double positive(const std::string& key, double fallback) const;
  long integer(const std::string& key, long fallback, long lo, long hi) const;
  bool flag(const std::string& key, bool fallback) const;
  std::vector<double> list(const std::string& key) const;
  std::vector<double> list(const std::string& key, const std::vector<double>& fallback) const;

  /// Rejects every key not in `allowed`.
  void require_known(const std::set<std::string>& allowed) const;

  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

double parse_number(const std::string& key, const std::string& text);

}  // namespace gsfcli
