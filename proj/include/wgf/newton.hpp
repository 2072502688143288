#pragma once

// Damped Newton for the per-step systems: fraction-to-boundary damping keeps
// iterates strictly positive and residual backtracking enforces descent in
// the max-norm. The ε floor is applied to the initial guess and to the
// converged root; roots that dip below ε are lifted there and counted.

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "wgf/grid.hpp"
#include "wgf/sparse.hpp"

namespace wgf {

struct NewtonConfig {
  double tol_residual = 1e-12;  // relative to max(1, ‖R(x⁰)‖∞)
  double tol_step = 1e-12;      // componentwise, relative to |x_i|
  double tol_stall = 1e-8;      // a stalled line search with corrections this small has converged
  int max_iter = 50;
  double theta_boundary = 0.9;
  double backtrack_factor = 0.5;
  int max_backtracks = 30;
  double floor = 1e-6;

  void validate() const {
    if (!(tol_residual > 0 && tol_step > 0 && tol_stall > 0 && max_iter > 0 && max_backtracks >= 0 && floor > 0))
      throw std::invalid_argument("newton settings must be positive");
    if (!(theta_boundary > 0 && theta_boundary < 1))
      throw std::invalid_argument("newton.theta_boundary must lie in (0, 1)");
    if (!(backtrack_factor > 0 && backtrack_factor < 1))
      throw std::invalid_argument("newton.backtrack_factor must lie in (0, 1)");
  }
};

struct SolveReport {
  int iterations = 0;
  std::vector<double> residual_history;  // ‖R‖∞, starting at x⁰
  std::vector<int> backtrack_counts;
  std::vector<double> step_lengths;
  bool converged = false;
  std::string message;
  std::size_t clamped_cells = 0;  // root components lifted to the floor
  double lifted_mass = 0.0;       // ∫ of that lift

  double final_residual() const {
    return residual_history.empty() ? 0.0 : residual_history.back();
  }
};

using ResidualFn = std::function<Field(const Field&)>;
using JacobianFn = std::function<SparseOperator(const Field&)>;

/// Largest λ ≤ 1 keeping x + λd ≥ (1 − θ)x wherever d < 0.
inline double fraction_to_boundary(const std::vector<double>& x, const std::vector<double>& d,
                                   double theta) {
  double lambda = 1.0;
  for (std::size_t i = 0; i < x.size(); ++i)
    if (d[i] < 0.0) lambda = std::min(lambda, theta * x[i] / -d[i]);
  return lambda;
}

inline std::pair<Field, SolveReport> newton_solve(const ResidualFn& residual,
                                                  const JacobianFn& jacobian, const Field& x0,
                                                  const NewtonConfig& cfg) {
  cfg.validate();
  SolveReport rep;
  Field x = map(x0, [&](double v) { return std::max(v, cfg.floor); });
  Field R = residual(x);
  double rnorm = max_abs(R.values);
  rep.residual_history.push_back(rnorm);
  const double threshold = cfg.tol_residual * std::max(1.0, rnorm);
  LinearSolver solver;

  auto finish = [&](bool ok, std::string msg) {
    rep.converged = ok;
    rep.message = std::move(msg);
    for (double& v : x.values)
      if (v < cfg.floor) {
        rep.lifted_mass += cfg.floor - v;
        v = cfg.floor;
        ++rep.clamped_cells;
      }
    rep.lifted_mass *= x.grid.cell_volume();
    return std::make_pair(x, rep);
  };

  if (!std::isfinite(rnorm)) return finish(false, "initial residual is not finite");
  if (rnorm <= threshold) return finish(true, "initial guess satisfies tolerance");

  for (int it = 1; it <= cfg.max_iter; ++it) {
    const SparseOperator J = jacobian(x);
    std::vector<double> rhs(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) rhs[i] = -R[i];
    const std::vector<double> d = solver.solve(J, rhs);
    double lambda = fraction_to_boundary(x.values, d, cfg.theta_boundary);
    double drel = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) drel = std::max(drel, std::abs(d[i]) / x[i]);

    bool accepted = false;
    int backtracks = 0;
    Field trial(x.grid);
    Field Rt;
    double tnorm = 0.0;
    for (; backtracks <= cfg.max_backtracks; ++backtracks) {
      for (std::size_t i = 0; i < x.size(); ++i) trial[i] = x[i] + lambda * d[i];
      Rt = residual(trial);
      tnorm = max_abs(Rt.values);
      if (std::isfinite(tnorm) && tnorm < rnorm) {
        accepted = true;
        break;
      }
      lambda *= cfg.backtrack_factor;
    }
    rep.iterations = it;
    rep.backtrack_counts.push_back(accepted ? backtracks : backtracks - 1);
    if (!accepted) {
      // No descent possible: only acceptable when the Newton correction is
      // already at round-off level.
      if (drel <= cfg.tol_stall)
        return finish(true, "converged: residual at round-off floor");
      return finish(false, "backtracking stalled at iteration " + std::to_string(it) +
                               " with residual " + std::to_string(rnorm));
    }
    const bool slow = tnorm > 0.5 * rnorm;
    x = std::move(trial);
    R = std::move(Rt);
    rnorm = tnorm;
    rep.residual_history.push_back(rnorm);
    rep.step_lengths.push_back(lambda);
    if (rnorm <= threshold) return finish(true, "converged: residual tolerance");
    if (lambda == 1.0 && drel <= cfg.tol_step)
      return finish(true, "converged: step tolerance");
    if (slow && drel <= cfg.tol_stall)
      return finish(true, "converged: residual at round-off floor");
  }
  return finish(false, "maximum Newton iterations exceeded with residual " +
                           std::to_string(rnorm));
}

/// Max over random directions of ‖J·d − central FD‖∞ / ‖J·d‖∞. Direction
/// components scale with |x_i| so that positive states stay positive.
inline double jacobian_fd_check(const ResidualFn& residual, const JacobianFn& jacobian,
                                const Field& x, double h = 1e-6, int directions = 5,
                                unsigned seed = 7) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  const SparseOperator J = jacobian(x);
  double worst = 0.0;
  for (int k = 0; k < directions; ++k) {
    std::vector<double> dir(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) dir[i] = uni(rng) * std::abs(x[i]);
    Field xp = x, xm = x;
    for (std::size_t i = 0; i < x.size(); ++i) {
      xp[i] += h * dir[i];
      xm[i] -= h * dir[i];
    }
    const Field Rp = residual(xp), Rm = residual(xm);
    const std::vector<double> Jd = J.apply(dir);
    double diff = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i)
      diff = std::max(diff, std::abs(Jd[i] - (Rp[i] - Rm[i]) / (2.0 * h)));
    const double scale = std::max(max_abs(Jd), 1e-300);
    worst = std::max(worst, diff / scale);
  }
  return worst;
}

}  // namespace wgf
