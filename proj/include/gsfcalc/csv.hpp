#pragma once

#include <cstdio>
#include <ostream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "gsfcalc/gen_num.hpp"

namespace gsfc::csv {

/// Round-trippable, locale-independent rendering of a double.
inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline void write_row(std::ostream& os, const std::vector<std::string>& cells) {
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) os << ',';
    os << cells[i];
  }
  os << '\n';
}

/// One row per grid level: k, eps, rho, then one column per named number.
inline void write_gen_nums(std::ostream& os, const std::vector<std::pair<std::string, GenNum>>& cols) {
  if (cols.empty()) return;
  std::vector<std::string> header{"k", "eps", "rho"};
  for (const auto& c : cols) header.push_back(c.first);
  write_row(os, header);
  const GenNum& first = cols.front().second;
  for (const auto& c : cols) first.require_same_gauge(c.second);
  const Gauge& g = first.gauge();
  for (std::size_t k = 0; k < g.size(); ++k) {
    std::vector<std::string> row{std::to_string(k + 1), num(g.eps(k)), num(g.rho(k))};
    for (const auto& c : cols) row.push_back(num(c.second[k]));
    write_row(os, row);
  }
}

inline void write_gauge(std::ostream& os, const Gauge& g) {
  write_row(os, {"k", "eps", "rho", "log_rho"});
  for (std::size_t k = 0; k < g.size(); ++k) {
    write_row(os, {std::to_string(k + 1), num(g.eps(k)), num(g.rho(k)), num(g.log_rho(k))});
  }
}

}  // namespace gsfc::csv
