#pragma once

#include <cmath>
#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "gsfcalc/error.hpp"

namespace gsfc {

/// Finite sample of the index set (0,1]: strictly decreasing ε values.
class EpsGrid {
 public:
  static constexpr std::size_t min_levels = 8;

  /// ε_k = eps0 · ratio^(k-1), k = 1..levels. The default is ε_k = 2^-k, k = 1..20.
  static EpsGrid geometric(double eps0 = 0.5, double ratio = 0.5, std::size_t levels = 20) {
    if (!(eps0 > 0.0 && eps0 <= 1.0) || !(ratio > 0.0 && ratio < 1.0)) {
      throw ConstructionError("geometric grid needs eps0 in (0,1] and ratio in (0,1)");
    }
    std::vector<double> v(levels);
    for (std::size_t k = 0; k < levels; ++k) v[k] = eps0 * std::pow(ratio, static_cast<double>(k));
    return EpsGrid(std::move(v));
  }

  explicit EpsGrid(std::vector<double> eps) : eps_(std::move(eps)) {
    if (eps_.size() < min_levels) {
      throw ConstructionError("eps grid needs at least " + std::to_string(min_levels) + " levels");
    }
    for (std::size_t k = 0; k < eps_.size(); ++k) {
      if (!(eps_[k] > 0.0 && eps_[k] <= 1.0)) throw ConstructionError("eps values must lie in (0,1]");
      if (k > 0 && !(eps_[k] < eps_[k - 1])) throw ConstructionError("eps values must be strictly decreasing");
    }
  }

  std::size_t size() const { return eps_.size(); }
  double operator[](std::size_t k) const { return eps_[k]; }
  std::span<const double> values() const { return eps_; }

  /// The tail is the second half of the grid; every asymptotic verdict is a fit over it.
  std::size_t tail_size() const { return eps_.size() / 2; }
  std::size_t tail_begin() const { return eps_.size() - tail_size(); }

  bool operator==(const EpsGrid&) const = default;

 private:
  std::vector<double> eps_;
};

/// How ρ_ε is obtained from ε.
struct GaugeSpec {
  enum class Kind { identity, power, exp, table };
  Kind kind = Kind::identity;
  double power = 1.0;          // for Kind::power
  std::vector<double> table;   // for Kind::table, one positive ρ per grid level

  static GaugeSpec identity() { return {}; }
  static GaugeSpec power_of(double p) { return {Kind::power, p, {}}; }
  static GaugeSpec exponential() { return {Kind::exp, 1.0, {}}; }
  static GaugeSpec explicit_table(std::vector<double> rho) { return {Kind::table, 1.0, std::move(rho)}; }
};

/// Fixed thresholds of the finite-grid asymptotic tests.
struct AsymptoticPolicy {
  static constexpr int m_max = 8;        // negligibility panel {1..m_max}
  static constexpr double slack = 0.5;   // added to the moderateness exponent
  static constexpr int m_slack = 8;      // order relations tolerate ρ^m_slack
};

/// A gauge ρ sampled on an ε-grid.
///
/// ρ is stored as log ρ: the exponential gauge e^{-1/ε} underflows double
/// precision long before the end of the default grid, while its logarithm
/// stays perfectly representable.
class Gauge {
 public:
  Gauge(EpsGrid grid, std::vector<double> log_rho, std::string name)
      : grid_(std::move(grid)), log_rho_(std::move(log_rho)), name_(std::move(name)) {
    if (log_rho_.size() != grid_.size()) throw ConstructionError("rho table length differs from grid length");
    for (std::size_t k = 0; k < log_rho_.size(); ++k) {
      if (!std::isfinite(log_rho_[k])) throw ConstructionError("rho values must be positive and finite");
      if (k > 0 && log_rho_[k] > log_rho_[k - 1]) throw ConstructionError("rho must be non-increasing along the grid");
    }
    if (!(log_rho_.back() < log_rho_.front())) throw ConstructionError("rho must decrease towards 0 along the grid");
  }

  const EpsGrid& grid() const { return grid_; }
  std::size_t size() const { return grid_.size(); }
  double eps(std::size_t k) const { return grid_[k]; }
  double log_rho(std::size_t k) const { return log_rho_[k]; }
  /// ρ_ε itself; may underflow to 0 for very fast gauges.
  double rho(std::size_t k) const { return std::exp(log_rho_[k]); }
  /// ρ_ε^p computed in log space.
  double rho_pow(std::size_t k, double p) const { return std::exp(p * log_rho_[k]); }
  std::span<const double> log_rho_values() const { return log_rho_; }
  const std::string& name() const { return name_; }

  std::size_t tail_begin() const { return grid_.tail_begin(); }

  bool same_as(const Gauge& o) const { return this == &o || (grid_ == o.grid_ && log_rho_ == o.log_rho_); }

 private:
  EpsGrid grid_;
  std::vector<double> log_rho_;
  std::string name_;
};

using GaugePtr = std::shared_ptr<const Gauge>;

inline GaugePtr make_gauge(const EpsGrid& grid, const GaugeSpec& spec) {
  std::vector<double> lr(grid.size());
  std::string name;
  switch (spec.kind) {
    case GaugeSpec::Kind::identity:
      for (std::size_t k = 0; k < grid.size(); ++k) lr[k] = std::log(grid[k]);
      name = "identity";
      break;
    case GaugeSpec::Kind::power:
      if (!(spec.power > 0.0)) throw ConstructionError("power gauge needs p > 0");
      for (std::size_t k = 0; k < grid.size(); ++k) lr[k] = spec.power * std::log(grid[k]);
      name = "power";
      break;
    case GaugeSpec::Kind::exp:
      for (std::size_t k = 0; k < grid.size(); ++k) lr[k] = -1.0 / grid[k];
      name = "exp";
      break;
    case GaugeSpec::Kind::table:
      if (spec.table.size() != grid.size()) throw ConstructionError("rho table length differs from grid length");
      for (std::size_t k = 0; k < grid.size(); ++k) {
        if (!(spec.table[k] > 0.0)) throw ConstructionError("rho table entries must be positive");
        lr[k] = std::log(spec.table[k]);
      }
      name = "table";
      break;
  }
  return std::make_shared<const Gauge>(grid, std::move(lr), std::move(name));
}

inline GaugePtr default_gauge() { return make_gauge(EpsGrid::geometric(), GaugeSpec::identity()); }

}  // namespace gsfc
