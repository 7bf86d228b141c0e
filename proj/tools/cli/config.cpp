#include "cli/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace gsfcli {

namespace {

std::string trim(const std::string& s) {
  auto b = std::find_if_not(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); });
  auto e = std::find_if_not(s.rbegin(), s.rend(), [](unsigned char c) { return std::isspace(c); }).base();
  return b < e ? std::string(b, e) : std::string();
}

bool valid_key(const std::string& k) {
  if (k.empty() || k.front() == '.' || k.back() == '.') return false;
  return std::all_of(k.begin(), k.end(), [](unsigned char c) { return std::isalnum(c) || c == '_' || c == '.'; });
}

}  // namespace

double parse_number(const std::string& key, const std::string& text) {
  const std::string t = trim(text);
  double v = 0.0;
  const char* first = t.data();
  const char* last = t.data() + t.size();
  if (!t.empty() && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (t.empty() || ec != std::errc() || ptr != last || !std::isfinite(v)) {
    throw ConfigError("key '" + key + "': expected a finite number, got '" + t + "'");
  }
  return v;
}

Config Config::parse(std::istream& in, const std::string& source) {
  Config c;
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const std::string t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(source + ":" + std::to_string(n) + ": expected 'key = value'");
    }
    const std::string key = trim(t.substr(0, eq)), value = trim(t.substr(eq + 1));
    if (!valid_key(key)) throw ConfigError(source + ":" + std::to_string(n) + ": invalid key '" + key + "'");
    if (value.empty()) throw ConfigError("key '" + key + "': empty value");
    if (c.values_.count(key)) throw ConfigError("key '" + key + "': given more than once");
    c.values_[key] = value;
  }
  return c;
}

Config Config::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path + "'");
  return parse(in, path);
}

std::string Config::str(const std::string& key, const std::string& fallback) const {
  auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

std::string Config::str(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("missing required key '" + key + "'");
  return it->second;
}

std::string Config::choice(const std::string& key, const std::string& fallback,
                           const std::vector<std::string>& choices) const {
  const std::string v = has(key) ? str(key) : fallback;
  if (std::find(choices.begin(), choices.end(), v) == choices.end()) {
    std::string all;
    for (const auto& c : choices) all += (all.empty() ? "" : ", ") + c;
    throw ConfigError("key '" + key + "': unknown value '" + v + "' (expected one of " + all + ")");
  }
  return v;
}

double Config::num(const std::string& key, double fallback) const {
  return has(key) ? parse_number(key, values_.at(key)) : fallback;
}

double Config::num(const std::string& key) const { return parse_number(key, str(key)); }

std::optional<double> Config::opt_num(const std::string& key) const {
  if (!has(key)) return std::nullopt;
  return num(key);
}

double Config::positive(const std::string& key, double fallback) const {
  const double v = num(key, fallback);
  if (!(v > 0.0)) throw ConfigError("key '" + key + "': must be positive");
  return v;
}

long Config::integer(const std::string& key, long fallback, long lo, long hi) const {
  if (!has(key)) return fallback;
  const double v = num(key);
  if (v != std::floor(v) || v < static_cast<double>(lo) || v > static_cast<double>(hi)) {
    throw ConfigError("key '" + key + "': expected an integer in [" + std::to_string(lo) + ", " + std::to_string(hi) +
                      "]");
  }
  return static_cast<long>(v);
}

bool Config::flag(const std::string& key, bool fallback) const {
  if (!has(key)) return fallback;
  const std::string v = str(key);
  if (v == "true" || v == "yes" || v == "1") return true;
  if (v == "false" || v == "no" || v == "0") return false;
  throw ConfigError("key '" + key + "': expected true or false, got '" + v + "'");
}

std::vector<double> Config::list(const std::string& key) const {
  std::vector<double> out;
  std::stringstream ss(str(key));
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_number(key, item));
  if (out.empty()) throw ConfigError("key '" + key + "': empty list");
  return out;
}

std::vector<double> Config::list(const std::string& key, const std::vector<double>& fallback) const {
  return has(key) ? list(key) : fallback;
}

void Config::require_known(const std::set<std::string>& allowed) const {
  for (const auto& [k, v] : values_) {
    if (!allowed.count(k)) throw ConfigError("unknown key '" + k + "'");
  }
}

}  // namespace gsfcli
