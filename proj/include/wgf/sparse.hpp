#pragma once

// Grid-structured sparse operators: a diagonal plus one band per neighbour
// direction (tridiagonal in 1D, pentadiagonal in 2D), with an optional
// rank-one term u·wᵀ. The banded part is factorized with a sparse direct LU
// and the rank-one part is folded in by Sherman–Morrison.

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseLU>

#include <array>
#include <cmath>
#include <limits>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "wgf/grid.hpp"

namespace wgf {

/// Linear-algebra failure, distinct from Newton nonconvergence.
class LinearSolveError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RankOne {
  std::vector<double> u;
  std::vector<double> w;
};

struct SparseOperator {
  Grid grid;
  std::vector<double> diag;
  /// band[d][i] is the entry (i, grid.neighbor(i, d)); ignored where there is
  /// no neighbour.
  std::array<std::vector<double>, 4> band;
  std::optional<RankOne> rank_one;
  /// Optional positive d with banded part = S·diag(d), S symmetric positive
  /// definite. Enables a Cholesky-type factorization of S.
  std::vector<double> column_scale;

  SparseOperator() = default;
  explicit SparseOperator(const Grid& g) : grid(g), diag(g.size(), 0.0) {
    for (int d = 0; d < directions(); ++d) band[d].assign(g.size(), 0.0);
  }

  std::size_t size() const { return diag.size(); }
  int directions() const { return grid.dim == 1 ? 2 : 4; }

  static SparseOperator identity(const Grid& g) {
    SparseOperator op(g);
    std::fill(op.diag.begin(), op.diag.end(), 1.0);
    return op;
  }

  std::vector<double> apply(const std::vector<double>& x) const {
    std::vector<double> y(size(), 0.0);
    for (std::size_t i = 0; i < size(); ++i) {
      double s = diag[i] * x[i];
      for (int d = 0; d < directions(); ++d) {
        const int nb = grid.neighbor(i, d);
        if (nb >= 0) s += band[d][i] * x[nb];
      }
      y[i] = s;
    }
    if (rank_one) {
      double wx = 0.0;
      for (std::size_t i = 0; i < size(); ++i) wx += rank_one->w[i] * x[i];
      for (std::size_t i = 0; i < size(); ++i) y[i] += rank_one->u[i] * wx;
    }
    return y;
  }

  /// |A|·|x| entrywise, used for the round-off bound on residuals.
  std::vector<double> apply_abs(const std::vector<double>& x) const {
    std::vector<double> y(size(), 0.0);
    for (std::size_t i = 0; i < size(); ++i) {
      double s = std::abs(diag[i] * x[i]);
      for (int d = 0; d < directions(); ++d) {
        const int nb = grid.neighbor(i, d);
        if (nb >= 0) s += std::abs(band[d][i] * x[nb]);
      }
      y[i] = s;
    }
    if (rank_one) {
      double wx = 0.0;
      for (std::size_t i = 0; i < size(); ++i) wx += std::abs(rank_one->w[i] * x[i]);
      for (std::size_t i = 0; i < size(); ++i) y[i] += std::abs(rank_one->u[i]) * wx;
    }
    return y;
  }

  Eigen::SparseMatrix<double> banded_matrix() const {
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(size() * (1 + directions()));
    for (std::size_t i = 0; i < size(); ++i) {
      trip.emplace_back(static_cast<int>(i), static_cast<int>(i), diag[i]);
      for (int d = 0; d < directions(); ++d) {
        const int nb = grid.neighbor(i, d);
        if (nb >= 0) trip.emplace_back(static_cast<int>(i), nb, band[d][i]);
      }
    }
    const auto n = static_cast<Eigen::Index>(size());
    Eigen::SparseMatrix<double> A(n, n);
    A.setFromTriplets(trip.begin(), trip.end());
    A.makeCompressed();
    return A;
  }
};

namespace detail {

inline double norm2(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

inline bool finite(const std::vector<double>& v) {
  for (double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

}  // namespace detail

/// Reusable factorization. Operators carrying a column scale are factorized
/// through the symmetric part with sparse LDLᵀ; everything else, and any
/// symmetric attempt that fails, goes through sparse LU. Symbolic analyses
/// are kept while the grid (and hence the sparsity pattern) stays the same.
class LinearSolver {
 public:
  double relative_tolerance = 1e-12;
  int max_refinements = 5;

  std::vector<double> solve(const SparseOperator& op, const std::vector<double>& rhs) {
    if (rhs.size() != op.size()) throw std::invalid_argument("rhs length mismatch");
    if (!op.column_scale.empty()) {
      try {
        factorize(op, true);
        std::vector<double> x = apply_inverse(op, rhs);
        refine(op, rhs, x);
        return x;
      } catch (const LinearSolveError&) {
        // fall through to LU
      }
    }
    factorize(op, false);
    std::vector<double> x = apply_inverse(op, rhs);
    refine(op, rhs, x);
    return x;
  }

 private:
  using SpMat = Eigen::SparseMatrix<double>;
  Eigen::SimplicialLDLT<SpMat, Eigen::Lower, Eigen::AMDOrdering<int>> ldlt_;
  Eigen::SparseLU<SpMat, Eigen::COLAMDOrdering<int>> lu_;
  std::optional<Grid> ldlt_pattern_, lu_pattern_;
  bool symmetric_ = false;
  std::vector<double> z_;  // M⁻¹u for the current factorization
  double denom_ = 1.0;     // 1 + wᵀM⁻¹u

  static SpMat symmetric_part(const SparseOperator& op) {
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(op.size() * (1 + op.directions()));
    const auto& d = op.column_scale;
    for (std::size_t i = 0; i < op.size(); ++i) {
      if (!(d[i] > 0.0)) throw LinearSolveError("column scale must be positive");
      const int ii = static_cast<int>(i);
      trip.emplace_back(ii, ii, op.diag[i] / d[i]);
      for (int k = 0; k < op.directions(); ++k) {
        const int nb = op.grid.neighbor(i, k);
        if (nb >= 0) trip.emplace_back(ii, nb, op.band[k][i] / d[nb]);
      }
    }
    const auto n = static_cast<Eigen::Index>(op.size());
    SpMat S(n, n);
    S.setFromTriplets(trip.begin(), trip.end());
    S.makeCompressed();
    return S;
  }

  void factorize(const SparseOperator& op, bool symmetric) {
    symmetric_ = symmetric;
    if (symmetric) {
      const SpMat S = symmetric_part(op);
      if (!ldlt_pattern_ || !(*ldlt_pattern_ == op.grid)) {
        ldlt_.analyzePattern(S);
        ldlt_pattern_ = op.grid;
      }
      ldlt_.factorize(S);
      if (ldlt_.info() != Eigen::Success) throw LinearSolveError("LDLT factorization failed");
      if (!(ldlt_.vectorD().minCoeff() > 0.0))
        throw LinearSolveError("symmetric part is not positive definite");
    } else {
      const SpMat A = op.banded_matrix();
      if (!lu_pattern_ || !(*lu_pattern_ == op.grid)) {
        lu_.analyzePattern(A);
        lu_pattern_ = op.grid;
      }
      lu_.factorize(A);
      if (lu_.info() != Eigen::Success)
        throw LinearSolveError("sparse LU factorization failed: " + lu_.lastErrorMessage());
    }
    if (op.rank_one) {
      const auto& [u, w] = *op.rank_one;
      if (u.size() != op.size() || w.size() != op.size())
        throw std::invalid_argument("rank-one vectors have the wrong length");
      z_ = banded_solve(op, u);
      double wz = 0.0;
      for (std::size_t i = 0; i < z_.size(); ++i) wz += w[i] * z_[i];
      denom_ = 1.0 + wz;
      if (!(std::abs(denom_) > 1e-14 * (1.0 + std::abs(wz))))
        throw LinearSolveError("Sherman-Morrison denominator vanishes (1 + w^T A^-1 u = " +
                               std::to_string(denom_) + ")");
    }
  }

  std::vector<double> banded_solve(const SparseOperator& op, const std::vector<double>& b) {
    const auto n = static_cast<Eigen::Index>(b.size());
    if (!symmetric_) {
      Eigen::Map<const Eigen::VectorXd> bb(b.data(), n);
      Eigen::VectorXd x = lu_.solve(bb);
      if (lu_.info() != Eigen::Success) throw LinearSolveError("sparse LU solve failed");
      return {x.data(), x.data() + x.size()};
    }
    // A = S·diag(d): solve S·y = b, then x = y/d.
    Eigen::Map<const Eigen::VectorXd> bb(b.data(), n);
    const Eigen::VectorXd y = ldlt_.solve(bb);
    if (ldlt_.info() != Eigen::Success) throw LinearSolveError("LDLT solve failed");
    std::vector<double> x(b.size());
    for (std::size_t i = 0; i < b.size(); ++i) x[i] = y[i] / op.column_scale[i];
    return x;
  }

  // (M + uwᵀ)⁻¹b = M⁻¹b − M⁻¹u·(wᵀM⁻¹b)/(1 + wᵀM⁻¹u)
  std::vector<double> apply_inverse(const SparseOperator& op, const std::vector<double>& b) {
    std::vector<double> x = banded_solve(op, b);
    if (op.rank_one) {
      const auto& w = op.rank_one->w;
      double wx = 0.0;
      for (std::size_t i = 0; i < x.size(); ++i) wx += w[i] * x[i];
      for (std::size_t i = 0; i < x.size(); ++i) x[i] -= z_[i] * (wx / denom_);
    }
    return x;
  }

  // Iterative refinement until the relative residual contract holds. When
  // cond(A)·eps exceeds the target the residual stalls at the level of
  // rounding in A·x itself; that floor is accepted.
  void refine(const SparseOperator& op, const std::vector<double>& rhs, std::vector<double>& x) {
    const double bnorm = detail::norm2(rhs);
    double prev = std::numeric_limits<double>::infinity();
    for (int it = 0;; ++it) {
      if (!detail::finite(x)) throw LinearSolveError("linear solve produced non-finite values");
      std::vector<double> r = op.apply(x);
      for (std::size_t i = 0; i < r.size(); ++i) r[i] = rhs[i] - r[i];
      const double rn = detail::norm2(r);
      if (rn <= relative_tolerance * bnorm || rn == 0.0) return;
      std::vector<double> scale = op.apply_abs(x);
      for (std::size_t i = 0; i < scale.size(); ++i) scale[i] += std::abs(rhs[i]);
      const double floor = 64.0 * std::numeric_limits<double>::epsilon() * detail::norm2(scale);
      if (rn <= floor && (rn >= 0.5 * prev || it == max_refinements)) return;
      if (it == max_refinements)
        throw LinearSolveError("linear solve residual " + std::to_string(rn / bnorm) +
                               " exceeds tolerance (singular or ill-conditioned operator)");
      prev = rn;
      const std::vector<double> dx = apply_inverse(op, r);
      for (std::size_t i = 0; i < x.size(); ++i) x[i] += dx[i];
    }
  }
};

inline std::vector<double> linear_solve(const SparseOperator& op, const std::vector<double>& rhs) {
  LinearSolver solver;
  return solver.solve(op, rhs);
}

}  // namespace wgf
