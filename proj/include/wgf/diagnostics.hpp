#pragma once

// Error norms, observed convergence orders and run audits.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "wgf/grid.hpp"

namespace wgf {

using ExactFunction = std::function<double(const Point&)>;

inline double error_inf(const Field& numeric, const ExactFunction& exact) {
  double e = 0.0;
  for (std::size_t i = 0; i < numeric.size(); ++i)
    e = std::max(e, std::abs(numeric[i] - exact(numeric.grid.center(i))));
  return e;
}

/// (δx^d Σ diff²)^{1/2} over every cell.
inline double error_l2(const Field& numeric, const ExactFunction& exact) {
  double s = 0.0;
  for (std::size_t i = 0; i < numeric.size(); ++i) {
    const double d = numeric[i] - exact(numeric.grid.center(i));
    s += d * d;
  }
  return std::sqrt(s * numeric.grid.cell_volume());
}

/// Pairs (δt, e); returns one order per consecutive pair.
inline std::vector<double> observed_order(const std::vector<std::pair<double, double>>& errors) {
  for (const auto& [dt, e] : errors) {
    if (!(e > 0.0)) throw std::invalid_argument("observed_order needs positive errors");
    if (!(dt > 0.0)) throw std::invalid_argument("observed_order needs positive step sizes");
  }
  std::vector<double> orders;
  for (std::size_t k = 0; k + 1 < errors.size(); ++k) {
    const auto& [dt0, e0] = errors[k];
    const auto& [dt1, e1] = errors[k + 1];
    if (dt0 == dt1) throw std::invalid_argument("observed_order needs distinct step sizes");
    orders.push_back(std::log(e0 / e1) / std::log(dt0 / dt1));
  }
  return orders;
}

struct TraceRecord {
  int step = 0;
  double time = 0.0;
  double mass = 0.0;
  double energy_original = 0.0;
  std::optional<double> energy_modified;
  double min_rho = 0.0;
  int newton_iterations = 0;
  std::optional<double> r;
  std::optional<double> r_drift;
  double floor_mass = 0.0;  // mass added by lifting the step's root to ε

  /// energy_modified when present, otherwise the original energy.
  double monitored_energy() const { return energy_modified.value_or(energy_original); }
};

class RunTrace {
 public:
  void append(TraceRecord rec) {
    if (!records_.empty() && rec.step <= records_.back().step)
      throw std::invalid_argument("trace steps must increase strictly");
    records_.push_back(std::move(rec));
  }
  const std::vector<TraceRecord>& records() const { return records_; }
  bool empty() const { return records_.empty(); }
  std::size_t size() const { return records_.size(); }
  const TraceRecord& back() const { return records_.back(); }

 private:
  std::vector<TraceRecord> records_;
};

struct AuditExpectations {
  std::optional<double> max_mass_drift;  // absolute, per step
  std::optional<double> min_rho;
  std::optional<double> energy_relative_tolerance = 1e-8;
  std::optional<int> max_newton_iterations = 50;
  std::optional<double> max_window_mean;  // applied to every window after the first
  bool expect_mass_increase = false;
  int window = 50;
};

struct AuditReport {
  double max_mass_drift = 0.0;  // net of floor lifts
  double floor_mass = 0.0;      // total over the run
  double min_rho = std::numeric_limits<double>::infinity();
  double max_energy_jump = -std::numeric_limits<double>::infinity();
  double initial_energy = 0.0;
  int max_newton_iterations = 0;
  std::vector<double> newton_window_means;
  bool mass_strictly_increasing = true;
  std::vector<std::string> violations;

  bool passed() const { return violations.empty(); }
};

inline AuditReport audit(const RunTrace& trace, const AuditExpectations& ex = {}) {
  if (trace.empty()) throw std::invalid_argument("cannot audit an empty trace");
  if (ex.window < 1) throw std::invalid_argument("audit window must be positive");
  const auto& recs = trace.records();
  AuditReport rep;
  rep.initial_energy = recs.front().monitored_energy();
  for (const auto& r : recs) rep.min_rho = std::min(rep.min_rho, r.min_rho);

  double win_sum = 0.0;
  int win_count = 0;
  for (std::size_t k = 1; k < recs.size(); ++k) {
    const auto& a = recs[k - 1];
    const auto& b = recs[k];
    rep.max_mass_drift = std::max(rep.max_mass_drift, std::abs(b.mass - a.mass - b.floor_mass));
    rep.floor_mass += b.floor_mass;
    if (!(b.mass > a.mass)) rep.mass_strictly_increasing = false;
    rep.max_energy_jump = std::max(rep.max_energy_jump, b.monitored_energy() - a.monitored_energy());
    rep.max_newton_iterations = std::max(rep.max_newton_iterations, b.newton_iterations);
    win_sum += b.newton_iterations;
    if (++win_count == ex.window) {
      rep.newton_window_means.push_back(win_sum / win_count);
      win_sum = 0.0;
      win_count = 0;
    }
  }
  if (win_count > 0) rep.newton_window_means.push_back(win_sum / win_count);
  if (recs.size() < 2) {
    rep.max_energy_jump = 0.0;
    rep.mass_strictly_increasing = false;
  }

  auto flag = [&](std::string msg) { rep.violations.push_back(std::move(msg)); };
  if (ex.max_mass_drift && rep.max_mass_drift > *ex.max_mass_drift)
    flag("mass drift " + std::to_string(rep.max_mass_drift) + " exceeds " +
         std::to_string(*ex.max_mass_drift));
  if (ex.min_rho && rep.min_rho < *ex.min_rho)
    flag("min density " + std::to_string(rep.min_rho) + " below " + std::to_string(*ex.min_rho));
  if (ex.energy_relative_tolerance) {
    const double tol = *ex.energy_relative_tolerance * std::abs(rep.initial_energy);
    if (rep.max_energy_jump > tol)
      flag("energy increased by " + std::to_string(rep.max_energy_jump) + " (tolerance " +
           std::to_string(tol) + ")");
  }
  if (ex.max_newton_iterations && rep.max_newton_iterations > *ex.max_newton_iterations)
    flag("Newton needed " + std::to_string(rep.max_newton_iterations) + " iterations");
  if (ex.max_window_mean)
    for (std::size_t w = 1; w < rep.newton_window_means.size(); ++w)
      if (rep.newton_window_means[w] > *ex.max_window_mean)
        flag("Newton window " + std::to_string(w) + " mean " +
             std::to_string(rep.newton_window_means[w]) + " exceeds " +
             std::to_string(*ex.max_window_mean));
  if (ex.expect_mass_increase && !rep.mass_strictly_increasing)
    flag("mass is not strictly increasing");
  return rep;
}

}  // namespace wgf
