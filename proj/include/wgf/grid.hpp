#pragma once

// Cell-centred tensor grids in 1D/2D and the discrete operators every scheme
// shares: midpoint integration, the L2 inner product, face averaging and the
// weighted divergence-gradient ∇·(m∇u) with zero-flux (Neumann) or periodic
// boundaries.

#include <array>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace wgf {

enum class Boundary { Neumann, Periodic };

inline std::string to_string(Boundary bc) {
  return bc == Boundary::Neumann ? "neumann" : "periodic";
}

using Point = std::array<double, 2>;

/// Neighbour directions in the order used by the Jacobian bands.
enum Direction : int { West = 0, East = 1, South = 2, North = 3 };

struct Grid {
  int dim = 1;
  int cells = 2;  // per axis
  double spacing = 0.5;
  Point origin{0.0, 0.0};
  Boundary bc = Boundary::Neumann;

  std::size_t size() const {
    return dim == 1 ? static_cast<std::size_t>(cells)
                    : static_cast<std::size_t>(cells) * cells;
  }
  double extent() const { return spacing * cells; }
  double cell_volume() const { return dim == 1 ? spacing : spacing * spacing; }
  double domain_measure() const {
    return dim == 1 ? extent() : extent() * extent();
  }

  int index(int j, int k = 0) const { return j + cells * k; }
  int col(std::size_t i) const { return static_cast<int>(i % cells); }
  int row(std::size_t i) const { return static_cast<int>(i / cells); }

  /// Centre of flat cell i; the second coordinate is 0 in 1D.
  Point center(std::size_t i) const {
    Point p{origin[0] + (col(i) + 0.5) * spacing, 0.0};
    if (dim == 2) p[1] = origin[1] + (row(i) + 0.5) * spacing;
    return p;
  }

  /// Flat index of the neighbour in direction d, or -1 across a Neumann wall.
  int neighbor(std::size_t i, int d) const {
    if (dim == 1 && d >= South) return -1;
    int j = col(i), k = row(i);
    int dj = d == West ? -1 : d == East ? 1 : 0;
    int dk = d == South ? -1 : d == North ? 1 : 0;
    j += dj;
    k += dk;
    if (bc == Boundary::Periodic) {
      j = (j + cells) % cells;
      k = (k + cells) % cells;
    } else if (j < 0 || j >= cells || k < 0 || k >= cells) {
      return -1;
    }
    return index(j, k);
  }

  /// Number of faces normal to one axis, per grid line.
  int faces_per_line() const {
    return bc == Boundary::Periodic ? cells : cells - 1;
  }

  friend bool operator==(const Grid&, const Grid&) = default;
};

/// Rejects cells_per_axis < 2, nonpositive extent and dim outside {1, 2}.
inline Grid build_grid(int dim, int cells_per_axis, double extent,
                       Point origin = {0.0, 0.0},
                       Boundary bc = Boundary::Neumann) {
  if (dim != 1 && dim != 2)
    throw std::invalid_argument("grid dimension must be 1 or 2");
  if (cells_per_axis < 2)
    throw std::invalid_argument("grid needs at least 2 cells per axis");
  if (!(extent > 0.0) || !std::isfinite(extent))
    throw std::invalid_argument("grid extent must be positive");
  Grid g;
  g.dim = dim;
  g.cells = cells_per_axis;
  g.spacing = extent / cells_per_axis;
  g.origin = origin;
  if (dim == 1) g.origin[1] = 0.0;
  g.bc = bc;
  return g;
}

struct Field {
  Grid grid;
  std::vector<double> values;

  Field() = default;
  explicit Field(const Grid& g, double fill = 0.0)
      : grid(g), values(g.size(), fill) {}
  Field(const Grid& g, std::vector<double> v) : grid(g), values(std::move(v)) {
    if (values.size() != grid.size())
      throw std::invalid_argument("field length does not match grid");
  }

  std::size_t size() const { return values.size(); }
  double& operator[](std::size_t i) { return values[i]; }
  double operator[](std::size_t i) const { return values[i]; }
  auto begin() const { return values.begin(); }
  auto end() const { return values.end(); }
};

/// Samples f at every cell centre.
template <class F>
Field sample(const Grid& g, F&& f) {
  Field out(g);
  for (std::size_t i = 0; i < g.size(); ++i) out[i] = f(g.center(i));
  return out;
}

template <class F>
Field map(const Field& a, F&& f) {
  Field out(a.grid);
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = f(a[i]);
  return out;
}

inline void require_same_grid(const Field& a, const Field& b) {
  if (!(a.grid == b.grid) || a.size() != b.size())
    throw std::invalid_argument("fields live on different grids");
}

inline bool all_finite(const Field& f) {
  for (double v : f.values)
    if (!std::isfinite(v)) return false;
  return true;
}

inline double min_value(const Field& f) {
  double m = f.values.empty() ? 0.0 : f.values.front();
  for (double v : f.values) m = v < m ? v : m;
  return m;
}

inline double max_abs(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::abs(x) > m ? std::abs(x) : m;
  return m;
}

/// Midpoint quadrature δx^d Σ f.
inline double integrate(const Field& f) {
  double s = 0.0;
  for (double v : f.values) s += v;
  return s * f.grid.cell_volume();
}

inline double inner(const Field& a, const Field& b) {
  require_same_grid(a, b);
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s * a.grid.cell_volume();
}

/// Per-face coefficients. Face x[j + nf*k] sits between cells (j, k) and
/// (j+1, k); face y[j + M*k] between (j, k) and (j, k+1), where nf is
/// faces_per_line() and the last face wraps when the grid is periodic.
struct FaceCoefficients {
  Grid grid;
  std::vector<double> x;
  std::vector<double> y;
};

inline FaceCoefficients face_average(const Field& f) {
  const Grid& g = f.grid;
  const int M = g.cells, nf = g.faces_per_line();
  FaceCoefficients out{g, {}, {}};
  const int lines = g.dim == 1 ? 1 : M;
  out.x.resize(static_cast<std::size_t>(nf) * lines);
  for (int k = 0; k < lines; ++k)
    for (int j = 0; j < nf; ++j)
      out.x[j + nf * k] = 0.5 * (f[g.index(j, k)] + f[g.index((j + 1) % M, k)]);
  if (g.dim == 2) {
    out.y.resize(static_cast<std::size_t>(nf) * M);
    for (int k = 0; k < nf; ++k)
      for (int j = 0; j < M; ++j)
        out.y[j + M * k] = 0.5 * (f[g.index(j, k)] + f[g.index(j, (k + 1) % M)]);
  }
  return out;
}

/// Calls visit(a, b, m) for every face, where b is the +axis neighbour of
/// cell a and m the face coefficient.
template <class Visit>
void for_each_face(const FaceCoefficients& m, Visit&& visit) {
  const Grid& g = m.grid;
  const int M = g.cells, nf = g.faces_per_line();
  const int lines = g.dim == 1 ? 1 : M;
  for (int k = 0; k < lines; ++k)
    for (int j = 0; j < nf; ++j)
      visit(g.index(j, k), g.index((j + 1) % M, k), m.x[j + nf * k]);
  if (g.dim == 2)
    for (int k = 0; k < nf; ++k)
      for (int j = 0; j < M; ++j)
        visit(g.index(j, k), g.index(j, (k + 1) % M), m.y[j + M * k]);
}

/// Discrete ∇·(m∇u): (1/δx²) Σ_faces m_f (u_nb − u_cell). Boundary faces
/// carry no flux under Neumann, equivalent to mirrored ghost cells.
inline Field weighted_divgrad(const FaceCoefficients& m, const Field& u) {
  if (!(m.grid == u.grid))
    throw std::invalid_argument("face coefficients and field grids differ");
  Field out(u.grid);
  const double inv_h2 = 1.0 / (u.grid.spacing * u.grid.spacing);
  for_each_face(m, [&](int a, int b, double mf) {
    const double flux = mf * (u[b] - u[a]) * inv_h2;
    out[a] += flux;
    out[b] -= flux;
  });
  return out;
}

}  // namespace wgf
