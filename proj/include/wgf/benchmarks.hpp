#pragma once

// Closed-form solutions, potentials, mobilities and initial data for the
// reference experiments, plus named problem presets.

#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "wgf/energy.hpp"
#include "wgf/grid.hpp"
#include "wgf/schemes.hpp"

namespace wgf {

/// Barenblatt profile B_{m,d}(x, t) of the porous medium equation ρ_t = Δρᵐ.
inline double barenblatt(const Point& x, double t, double m, int d) {
  const double alpha = d / (d * (m - 1.0) + 2.0);
  double r2 = x[0] * x[0];
  if (d == 2) r2 += x[1] * x[1];
  const double s = 1.0 - alpha * (m - 1.0) / (2.0 * m * d) * r2 /
                             std::pow(t + 1.0, 2.0 * alpha / d);
  if (s <= 0.0) return 0.0;
  return std::pow(t + 1.0, -alpha) * std::pow(s, 1.0 / (m - 1.0));
}

/// e^{−π²t/50} cos(πx) + 1.1, exact for ρ_t = ρ_xx/50 with Neumann walls on [0, 1].
inline double heat_exact(double x, double t) {
  using std::numbers::pi;
  return std::exp(-pi * pi * t / 50.0) * std::cos(pi * x) + 1.1;
}

/// (4πt)⁻¹ exp(−|x|²/(4t)).
inline double heat_kernel(const Point& x, double t) {
  using std::numbers::pi;
  return std::exp(-(x[0] * x[0] + x[1] * x[1]) / (4.0 * t)) / (4.0 * pi * t);
}

using PointFunction = std::function<double(const Point&)>;

/// "quadratic": (x² + y²)/2; "sinusoidal": 1 − sin(5πx) sin(3πy).
inline PointFunction drift_potential(const std::string& name) {
  using std::numbers::pi;
  if (name == "quadratic")
    return [](const Point& p) { return 0.5 * (p[0] * p[0] + p[1] * p[1]); };
  if (name == "sinusoidal")
    return [](const Point& p) { return 1.0 - std::sin(5.0 * pi * p[0]) * std::sin(3.0 * pi * p[1]); };
  throw std::invalid_argument("unknown potential '" + name + "'");
}

/// Half-width of the series branch of V2 around ρ = 1.
inline constexpr double kFisherSeriesWidth = 1e-3;

/// ρ(ρ − 1)/(2 log ρ), with its removable singularity at ρ = 1 replaced by
/// the expansion (ρ−1)/log ρ = 1 + h/2 − h²/12 + h³/24 + O(h⁴), h = ρ − 1.
inline double fisher_v2(double rho) {
  if (!(rho > 0.0)) throw std::domain_error("V2 needs a positive density");
  const double h = rho - 1.0;
  if (std::abs(h) < kFisherSeriesWidth)
    return 0.5 * rho * (1.0 + h * (0.5 + h * (-1.0 / 12.0 + h / 24.0)));
  return rho * h / (2.0 * std::log(rho));
}

inline Mobilities fisher_kpp_mobilities(double alpha) {
  if (!(alpha > 0.0)) throw std::invalid_argument("Fisher-KPP alpha must be positive");
  return Mobilities{[alpha](double rho) {
                      if (!(rho > 0.0)) throw std::domain_error("V1 needs a positive density");
                      return alpha * rho;
                    },
                    fisher_v2};
}

/// splitmix64 stream.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}
  std::uint64_t next() {
    state_ += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = state_;
    z ^= z >> 30;
    z *= 0xBF58476D1CE4E5B9ULL;
    z ^= z >> 27;
    z *= 0x94D049BB133111EBULL;
    z ^= z >> 31;
    return z;
  }
  /// Top 53 bits scaled to [0, 1).
  double unit() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

 private:
  std::uint64_t state_;
};

inline Field seeded_random_field(const Grid& g, std::uint64_t seed, double low, double high) {
  if (!(high > low)) throw std::invalid_argument("random field needs high > low");
  SplitMix64 gen(seed);
  Field f(g);
  for (std::size_t i = 0; i < f.size(); ++i) f[i] = low + (high - low) * gen.unit();
  return f;
}

// -- named problems -------------------------------------------------------------

struct ProblemOverrides {
  std::optional<int> M;
  std::optional<double> dt, T, m, C, extent, alpha, random_low, random_high, epsilon;
  std::optional<double> entropy_split;  // coefficient of the implicit entropy part
  std::optional<Point> origin;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> potential;
};

struct ProblemSpec {
  std::string name;
  Grid grid;
  EnergyModel model;
  Splitting splitting;
  std::optional<Mobilities> mobilities;
  SchemeKind default_scheme = SchemeKind::S1;
  double dt = 1e-3;
  double T = 1.0;
  double epsilon = 1e-6;
  Field initial;
  /// Exact solution, or a time-independent reference when exact_is_steady.
  std::function<double(const Point&, double)> exact;
  bool exact_is_steady = false;
};

inline const std::vector<std::string>& problem_names() {
  static const std::vector<std::string> names{"heat", "pme_barenblatt", "fokker_planck",
                                              "pme_drift", "fisher_kpp"};
  return names;
}

namespace detail {

inline Field floored(Field f, double eps) {
  for (double& v : f.values) v = std::max(v, eps);
  return f;
}

inline void check_positive(double v, const char* what) {
  if (!(v > 0.0) || !std::isfinite(v))
    throw std::invalid_argument(std::string(what) + " must be positive");
}

}  // namespace detail

inline ProblemSpec build_problem(const std::string& name, const ProblemOverrides& o = {}) {
  ProblemSpec p;
  p.name = name;
  p.epsilon = o.epsilon.value_or(1e-6);
  detail::check_positive(p.epsilon, "epsilon");
  auto make_grid = [&](int dim, int M, double extent, Point origin) {
    return build_grid(dim, o.M.value_or(M), o.extent.value_or(extent), o.origin.value_or(origin),
                      Boundary::Neumann);
  };

  if (name == "heat") {
    p.grid = make_grid(1, 2000, 1.0, {0.0, 0.0});
    p.model = EnergyModel{{Entropy{1.0 / 50.0}}};
    p.splitting = make_splitting(p.model, o.C, o.entropy_split.value_or(1.0 / 100.0));
    p.default_scheme = SchemeKind::S1;
    p.dt = o.dt.value_or(0.1);
    p.T = o.T.value_or(1.0);
    p.initial = sample(p.grid, [](const Point& x) { return heat_exact(x[0], 0.0); });
    p.exact = [](const Point& x, double t) { return heat_exact(x[0], t); };
  } else if (name == "pme_barenblatt") {
    const double m = o.m.value_or(3.0);
    if (!(m > 1.0)) throw std::invalid_argument("m must exceed 1");
    p.grid = make_grid(2, 80, 20.0, {-10.0, -10.0});
    p.model = EnergyModel{{PowerLaw{1.0, m}}};
    p.splitting = make_splitting(p.model, o.C.value_or(0.0), o.entropy_split.value_or(1.0));
    p.default_scheme = SchemeKind::S2;
    p.dt = o.dt.value_or(1e-3);
    p.T = o.T.value_or(1.0);
    p.initial = detail::floored(
        sample(p.grid, [m](const Point& x) { return barenblatt(x, 0.0, m, 2); }), p.epsilon);
    p.exact = [m](const Point& x, double t) { return barenblatt(x, t, m, 2); };
  } else if (name == "fokker_planck") {
    p.grid = make_grid(2, 100, 10.0, {-5.0, -5.0});
    const Field v = sample(p.grid, drift_potential(o.potential.value_or("quadratic")));
    p.model = EnergyModel{{Entropy{1.0}, Potential{v}}};
    p.splitting = make_splitting(p.model, o.C.value_or(10.0), o.entropy_split.value_or(1.0));
    p.default_scheme = SchemeKind::S2;
    p.dt = o.dt.value_or(1e-3);
    p.T = o.T.value_or(4.0);
    p.initial = detail::floored(
        sample(p.grid, [](const Point& x) { return heat_kernel(x, 1.0); }), p.epsilon);
    p.exact = [](const Point& x, double) { return heat_kernel(x, 0.5); };
    p.exact_is_steady = true;
  } else if (name == "pme_drift") {
    const double m = o.m.value_or(2.0);
    if (!(m > 1.0)) throw std::invalid_argument("m must exceed 1");
    p.grid = make_grid(2, 50, 2.0, {-1.0, -1.0});
    const Field v = sample(p.grid, drift_potential(o.potential.value_or("sinusoidal")));
    p.model = EnergyModel{{PowerLaw{1.0, m}, Potential{v}}};
    p.splitting = make_splitting(p.model, o.C, o.entropy_split.value_or(1.0));
    p.default_scheme = SchemeKind::S2;
    // The explicit ρ^{m-1} part stiffens quickly with m.
    const double dt_default = m <= 6.0 ? 1e-4 : m <= 20.0 ? 4e-5 : m <= 50.0 ? 1.6e-5 : 4e-6;
    p.dt = o.dt.value_or(dt_default);
    p.T = o.T.value_or(m >= 20.0 ? 0.4 : 0.04);
    const double lo = o.random_low.value_or(p.epsilon), hi = o.random_high.value_or(1.0);
    if (lo < p.epsilon) throw std::invalid_argument("random_low must be at least epsilon");
    p.initial = seeded_random_field(p.grid, o.seed.value_or(1), lo, hi);
  } else if (name == "fisher_kpp") {
    const double alpha = o.alpha.value_or(1e-4);
    p.grid = make_grid(1, 100, 1.0, {0.0, 0.0});
    p.model = EnergyModel{{Entropy{2.0}}};
    p.splitting = make_splitting(p.model, o.C.value_or(5.0), o.entropy_split.value_or(1.0));
    p.mobilities = fisher_kpp_mobilities(alpha);
    p.default_scheme = SchemeKind::Onsager;
    p.dt = o.dt.value_or(1e-4);
    p.T = o.T.value_or(10.0);
    const double x0 = p.grid.origin[0];
    p.initial = detail::floored(
        sample(p.grid, [x0](const Point& x) { return x[0] - x0 < 0.5 ? 0.4 : 0.0; }), p.epsilon);
  } else {
    throw std::invalid_argument("unknown problem '" + name + "'");
  }
  detail::check_positive(p.dt, "dt");
  detail::check_positive(p.T, "T");
  return p;
}

/// Scheme configuration for running a problem with the given kind.
inline SchemeConfig scheme_for(const ProblemSpec& p, SchemeKind kind) {
  SchemeConfig cfg;
  cfg.kind = kind;
  cfg.dt = p.dt;
  cfg.epsilon_floor = p.epsilon;
  if (is_sav(kind)) cfg.splitting = p.splitting;
  if (kind == SchemeKind::Onsager) {
    if (!p.mobilities) throw std::invalid_argument("problem " + p.name + " has no mobilities");
    cfg.mobilities = p.mobilities;
  }
  return cfg;
}

}  // namespace wgf
