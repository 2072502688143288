#pragma once

// Time steppers for Wasserstein gradient flows ∂ρ/∂t = ∇·(ρ∇ δE/δρ).
//
// Every stepper poses one nonlinear system of the common form
//
//   R(ρ) = α·ρ − b − ∇d·(m ∇d μ(ρ)) + k ⊙ μ(ρ) − g = 0,
//   μ(ρ) = ξ(ρ)·φ + c·log ρ,   ξ(ρ) = ξ₀ + κ·(φ, ρ − b/α),
//
// where α, b come from the time-derivative stencil (backward Euler or BDF2),
// m is a face mobility, g a fixed drift divergence (first approach with a
// potential), k a pointwise reaction mobility (Onsager flows), and ξ the
// rank-one scalar-auxiliary-variable coupling (absent for the first
// approach, where φ = 0 and c = 1).

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>

#include "wgf/energy.hpp"
#include "wgf/grid.hpp"
#include "wgf/newton.hpp"
#include "wgf/sparse.hpp"

namespace wgf {

enum class SchemeKind { S1, S1_BDF2, S2, S2_BDF2, Onsager };

inline std::string to_string(SchemeKind k) {
  switch (k) {
    case SchemeKind::S1: return "s1";
    case SchemeKind::S1_BDF2: return "s1_bdf2";
    case SchemeKind::S2: return "s2";
    case SchemeKind::S2_BDF2: return "s2_bdf2";
    case SchemeKind::Onsager: return "onsager";
  }
  return "?";
}

inline SchemeKind parse_scheme(const std::string& s) {
  if (s == "s1") return SchemeKind::S1;
  if (s == "s1_bdf2") return SchemeKind::S1_BDF2;
  if (s == "s2") return SchemeKind::S2;
  if (s == "s2_bdf2") return SchemeKind::S2_BDF2;
  if (s == "onsager") return SchemeKind::Onsager;
  throw std::invalid_argument("unknown scheme '" + s + "'");
}

inline bool is_sav(SchemeKind k) { return k != SchemeKind::S1 && k != SchemeKind::S1_BDF2; }
inline bool is_second_order(SchemeKind k) {
  return k == SchemeKind::S1_BDF2 || k == SchemeKind::S2_BDF2;
}
inline bool conserves_mass(SchemeKind k) { return k != SchemeKind::Onsager; }

struct Mobilities {
  std::function<double(double)> V1;  // diffusive, on faces
  std::function<double(double)> V2;  // reactive, pointwise
};

struct SchemeConfig {
  SchemeKind kind = SchemeKind::S1;
  double dt = 1e-3;
  std::optional<Splitting> splitting;
  std::optional<Mobilities> mobilities;
  double epsilon_floor = 1e-6;
  NewtonConfig newton;

  void validate() const {
    if (!(dt > 0.0) || !std::isfinite(dt)) throw std::invalid_argument("dt must be positive");
    if (!(epsilon_floor > 0.0)) throw std::invalid_argument("epsilon floor must be positive");
    if (is_sav(kind) && !splitting)
      throw std::invalid_argument(to_string(kind) + " requires an energy splitting");
    if (kind == SchemeKind::Onsager && (!mobilities || !mobilities->V1 || !mobilities->V2))
      throw std::invalid_argument("onsager scheme requires mobilities V1 and V2");
  }

  NewtonConfig newton_settings() const {
    NewtonConfig n = newton;
    n.floor = epsilon_floor;
    return n;
  }
};

struct TimeState {
  Field rho;
  std::optional<Field> rho_prev;
  std::optional<double> r;
  std::optional<double> r_prev;
  double time = 0.0;
  long step_index = 0;
};

struct StepReport {
  int newton_iterations = 0;
  double final_residual_norm = 0.0;
  double mass = 0.0;
  double energy_original = 0.0;
  std::optional<double> energy_modified;
  double min_rho = 0.0;
  std::optional<double> r;
  std::optional<double> r_drift;  // r − √(E1 + C)
  SolveReport solve;
};

struct StepResult {
  TimeState state;
  StepReport report;
};

class StepFailure : public std::runtime_error {
 public:
  StepFailure(const std::string& what, StepReport rep)
      : std::runtime_error(what), report(std::move(rep)) {}
  StepReport report;
};

// -- positivity-preserving extrapolation ------------------------------------

/// 2ψⁿ − ψⁿ⁻¹ when ψⁿ ≥ ψⁿ⁻¹, otherwise the harmonic form 1/(2/ψⁿ − 1/ψⁿ⁻¹).
inline double extrapolate_positive(double now, double prev) {
  if (!(now > 0.0) || !(prev > 0.0))
    throw std::domain_error("extrapolation needs positive inputs");
  if (now >= prev) return 2.0 * now - prev;
  return 1.0 / (2.0 / now - 1.0 / prev);
}

inline Field extrapolate_positive(const Field& now, const Field& prev) {
  require_same_grid(now, prev);
  Field out(now.grid);
  for (std::size_t i = 0; i < now.size(); ++i) out[i] = extrapolate_positive(now[i], prev[i]);
  return out;
}

// -- the common per-step system -----------------------------------------------

struct StepSystem {
  Grid grid;
  double alpha = 1.0;
  Field source;
  FaceCoefficients mobility;
  double log_coeff = 1.0;
  Field drift;                     // g
  std::optional<Field> reaction;   // k
  std::optional<Field> phi;        // SAV explicit chemical potential
  double xi0 = 0.0;
  double kappa = 0.0;
  double sav_scale = 1.0;          // √(E1* + C); r = ξ·sav_scale

  double xi(const Field& rho) const {
    if (!phi) return 0.0;
    double s = 0.0;
    for (std::size_t i = 0; i < rho.size(); ++i)
      s += (*phi)[i] * (rho[i] - source[i] / alpha);
    return xi0 + kappa * s * grid.cell_volume();
  }

  Field potential(const Field& rho) const {
    Field mu(grid);
    const double x = xi(rho);
    for (std::size_t i = 0; i < rho.size(); ++i) {
      if (!(rho[i] > 0.0)) throw DomainError("log of nonpositive density in step system");
      mu[i] = log_coeff * std::log(rho[i]) + (phi ? x * (*phi)[i] : 0.0);
    }
    return mu;
  }

  Field residual(const Field& rho) const {
    const Field mu = potential(rho);
    const Field div = weighted_divgrad(mobility, mu);
    Field R(grid);
    for (std::size_t i = 0; i < rho.size(); ++i) {
      R[i] = alpha * rho[i] - source[i] - div[i] - drift[i];
      if (reaction) R[i] += (*reaction)[i] * mu[i];
    }
    return R;
  }

  SparseOperator jacobian(const Field& rho) const {
    SparseOperator J(grid);
    const double inv_h2 = 1.0 / (grid.spacing * grid.spacing);
    // K = −∇d·(m∇d ·) + diag(k); J = αI + K·diag(c/ρ) + (Kφ)(κ δx^d φ)ᵀ
    std::vector<double> kdiag(rho.size(), 0.0);
    auto add_face = [&](int a, int b, double mf, int east, int west) {
      const double w = mf * inv_h2;
      kdiag[a] += w;
      kdiag[b] += w;
      J.band[east][a] -= w * log_coeff / rho[b];
      J.band[west][b] -= w * log_coeff / rho[a];
    };
    const int M = grid.cells, nf = grid.faces_per_line();
    const int lines = grid.dim == 1 ? 1 : M;
    for (int k = 0; k < lines; ++k)
      for (int j = 0; j < nf; ++j)
        add_face(grid.index(j, k), grid.index((j + 1) % M, k), mobility.x[j + nf * k], East, West);
    if (grid.dim == 2)
      for (int k = 0; k < nf; ++k)
        for (int j = 0; j < M; ++j)
          add_face(grid.index(j, k), grid.index(j, (k + 1) % M), mobility.y[j + M * k], North,
                   South);
    for (std::size_t i = 0; i < rho.size(); ++i) {
      const double k = reaction ? (*reaction)[i] : 0.0;
      J.diag[i] = alpha + (kdiag[i] + k) * log_coeff / rho[i];
    }
    // Banded part = (α·diag(ρ/c) + K)·diag(c/ρ) with the bracket SPD.
    J.column_scale.resize(rho.size());
    for (std::size_t i = 0; i < rho.size(); ++i) J.column_scale[i] = log_coeff / rho[i];
    if (phi) {
      const Field Lphi = weighted_divgrad(mobility, *phi);
      RankOne r1;
      r1.u.resize(rho.size());
      r1.w.resize(rho.size());
      for (std::size_t i = 0; i < rho.size(); ++i) {
        r1.u[i] = -Lphi[i] + (reaction ? (*reaction)[i] * (*phi)[i] : 0.0);
        r1.w[i] = kappa * grid.cell_volume() * (*phi)[i];
      }
      J.rank_one = std::move(r1);
    }
    return J;
  }
};

// -- system assembly ----------------------------------------------------------

namespace detail {

inline Field s1_phi(const EnergyModel& model, const Field& rho) {
  const Field h2 = second_derivative_H(model, rho);
  Field phi(rho.grid);
  for (std::size_t i = 0; i < rho.size(); ++i) phi[i] = rho[i] * rho[i] * h2[i];
  return phi;
}

inline Field drift_divergence(const EnergyModel& model, const Field& rho_face_source) {
  const Grid& g = rho_face_source.grid;
  if (!has_potential(model)) return Field(g);
  return weighted_divgrad(face_average(rho_face_source), total_potential(model, g));
}

inline void require_prev(const TimeState& s, bool need_r) {
  if (!s.rho_prev)
    throw std::invalid_argument("second-order step needs the previous density; "
                                "take the first step with the first-order scheme");
  if (need_r && !s.r_prev)
    throw std::invalid_argument("second-order SAV step needs the previous auxiliary variable");
}

inline double sav_scale(const Splitting& sp, const Field& rho) {
  const double e = eval_E1(sp, rho) + sp.constant();
  if (!(e > 0.0))
    throw std::invalid_argument("E1 + C must be positive (got " + std::to_string(e) +
                                "); increase C");
  return std::sqrt(e);
}

inline void fill_sav(StepSystem& sys, const Splitting& sp, const Field& rho_star, double r_combo) {
  const double s = sav_scale(sp, rho_star);
  sys.phi = dE1(sp, rho_star);
  sys.sav_scale = s;
  sys.xi0 = r_combo / s;
  sys.kappa = 1.0 / (2.0 * s * s);
  sys.log_coeff = sp.entropy_coeff;
}

}  // namespace detail

inline StepSystem assemble_s1(const TimeState& st, const SchemeConfig& cfg,
                              const EnergyModel& model) {
  const Field& rho = st.rho;
  StepSystem sys;
  sys.grid = rho.grid;
  sys.alpha = 1.0 / cfg.dt;
  sys.source = map(rho, [&](double v) { return v / cfg.dt; });
  sys.mobility = face_average(detail::s1_phi(model, rho));
  sys.log_coeff = 1.0;
  sys.drift = detail::drift_divergence(model, rho);
  return sys;
}

inline StepSystem assemble_s1_bdf2(const TimeState& st, const SchemeConfig& cfg,
                                   const EnergyModel& model) {
  detail::require_prev(st, false);
  const Field& now = st.rho;
  const Field& prev = *st.rho_prev;
  StepSystem sys;
  sys.grid = now.grid;
  sys.alpha = 1.5 / cfg.dt;
  sys.source = Field(now.grid);
  for (std::size_t i = 0; i < now.size(); ++i)
    sys.source[i] = (4.0 * now[i] - prev[i]) / (2.0 * cfg.dt);
  const Field phi_star =
      extrapolate_positive(detail::s1_phi(model, now), detail::s1_phi(model, prev));
  sys.mobility = face_average(phi_star);
  sys.log_coeff = 1.0;
  sys.drift = detail::drift_divergence(model, extrapolate_positive(now, prev));
  return sys;
}

inline StepSystem assemble_s2(const TimeState& st, const SchemeConfig& cfg) {
  if (!cfg.splitting) throw std::invalid_argument("s2 requires a splitting");
  if (!st.r) throw std::invalid_argument("s2 state has no auxiliary variable; use init_state");
  const Field& rho = st.rho;
  StepSystem sys;
  sys.grid = rho.grid;
  sys.alpha = 1.0 / cfg.dt;
  sys.source = map(rho, [&](double v) { return v / cfg.dt; });
  sys.mobility = face_average(rho);
  sys.drift = Field(rho.grid);
  detail::fill_sav(sys, *cfg.splitting, rho, *st.r);
  return sys;
}

inline StepSystem assemble_s2_bdf2(const TimeState& st, const SchemeConfig& cfg) {
  if (!cfg.splitting) throw std::invalid_argument("s2_bdf2 requires a splitting");
  if (!st.r) throw std::invalid_argument("s2_bdf2 state has no auxiliary variable");
  detail::require_prev(st, true);
  const Field& now = st.rho;
  const Field& prev = *st.rho_prev;
  const Field star = extrapolate_positive(now, prev);
  StepSystem sys;
  sys.grid = now.grid;
  sys.alpha = 1.5 / cfg.dt;
  sys.source = Field(now.grid);
  for (std::size_t i = 0; i < now.size(); ++i)
    sys.source[i] = (4.0 * now[i] - prev[i]) / (2.0 * cfg.dt);
  sys.mobility = face_average(star);
  sys.drift = Field(now.grid);
  detail::fill_sav(sys, *cfg.splitting, star, (4.0 * *st.r - *st.r_prev) / 3.0);
  return sys;
}

inline StepSystem assemble_onsager(const TimeState& st, const SchemeConfig& cfg) {
  if (!cfg.splitting || !cfg.mobilities)
    throw std::invalid_argument("onsager requires a splitting and mobilities");
  if (!st.r) throw std::invalid_argument("onsager state has no auxiliary variable");
  const Field& rho = st.rho;
  const Field v1 = map(rho, cfg.mobilities->V1);
  const Field v2 = map(rho, cfg.mobilities->V2);
  for (std::size_t i = 0; i < rho.size(); ++i) {
    if (!(v1[i] > 0.0) || !std::isfinite(v1[i]))
      throw std::domain_error("mobility V1 must be positive, got " + std::to_string(v1[i]));
    if (!(v2[i] >= 0.0) || !std::isfinite(v2[i]))
      throw std::domain_error("mobility V2 must be nonnegative, got " + std::to_string(v2[i]));
  }
  StepSystem sys;
  sys.grid = rho.grid;
  sys.alpha = 1.0 / cfg.dt;
  sys.source = map(rho, [&](double v) { return v / cfg.dt; });
  sys.mobility = face_average(v1);
  sys.reaction = v2;
  sys.drift = Field(rho.grid);
  detail::fill_sav(sys, *cfg.splitting, rho, *st.r);
  return sys;
}

// -- energies reported per step ---------------------------------------------

/// Functional the first approach provably dissipates: E itself when every
/// H-type term is an entropy (H″ρ constant), the bare entropy when there is
/// no potential, otherwise none.
inline std::optional<double> s1_lyapunov(const EnergyModel& model, const Field& rho) {
  bool entropy_only = true;
  for (const auto& t : model.terms)
    if (!std::holds_alternative<Entropy>(t) && !std::holds_alternative<Potential>(t))
      entropy_only = false;
  if (entropy_only) return eval_energy(model, rho);
  if (!has_potential(model)) return entropy(rho);
  return std::nullopt;
}

inline double modified_energy(const Splitting& sp, const Field& rho, double r) {
  return sp.entropy_coeff * entropy(rho) + r * r;
}

// -- stepping -----------------------------------------------------------------

namespace detail {

inline StepResult solve_and_report(const StepSystem& sys, const TimeState& st,
                                   const SchemeConfig& cfg, const Field& guess,
                                   const EnergyModel* model) {
  auto [rho, solve] = newton_solve([&](const Field& x) { return sys.residual(x); },
                                   [&](const Field& x) { return sys.jacobian(x); }, guess,
                                   cfg.newton_settings());
  StepReport rep;
  rep.newton_iterations = solve.iterations;
  rep.final_residual_norm = solve.final_residual();
  rep.mass = integrate(rho);
  rep.min_rho = min_value(rho);
  const bool ok = solve.converged && all_finite(rho);
  const std::string msg = solve.message;
  rep.solve = std::move(solve);

  TimeState next;
  next.rho_prev = st.rho;
  next.time = st.time + cfg.dt;
  next.step_index = st.step_index + 1;
  if (sys.phi) {
    next.r = sys.xi(rho) * sys.sav_scale;
    next.r_prev = st.r;
    const Splitting& sp = *cfg.splitting;
    rep.r = next.r;
    rep.energy_original = eval_split_energy(sp, rho);
    rep.energy_modified = modified_energy(sp, rho, *next.r);
    rep.r_drift = *next.r - std::sqrt(std::max(0.0, eval_E1(sp, rho) + sp.constant()));
  } else {
    rep.energy_original = eval_energy(*model, rho);
    rep.energy_modified = s1_lyapunov(*model, rho);
  }
  next.rho = std::move(rho);
  if (!ok)
    throw StepFailure(to_string(cfg.kind) + " step " + std::to_string(next.step_index) +
                          " failed: " + msg,
                      rep);
  return {std::move(next), std::move(rep)};
}

}  // namespace detail

inline StepResult step_s1(const TimeState& st, const SchemeConfig& cfg, const EnergyModel& model) {
  cfg.validate();
  const StepSystem sys = assemble_s1(st, cfg, model);
  return detail::solve_and_report(sys, st, cfg, st.rho, &model);
}

inline StepResult step_s1_bdf2(const TimeState& st, const SchemeConfig& cfg,
                               const EnergyModel& model) {
  cfg.validate();
  const StepSystem sys = assemble_s1_bdf2(st, cfg, model);
  return detail::solve_and_report(sys, st, cfg, extrapolate_positive(st.rho, *st.rho_prev),
                                  &model);
}

inline StepResult step_s2(const TimeState& st, const SchemeConfig& cfg) {
  cfg.validate();
  const StepSystem sys = assemble_s2(st, cfg);
  return detail::solve_and_report(sys, st, cfg, st.rho, nullptr);
}

inline StepResult step_s2_bdf2(const TimeState& st, const SchemeConfig& cfg) {
  cfg.validate();
  const StepSystem sys = assemble_s2_bdf2(st, cfg);
  return detail::solve_and_report(sys, st, cfg, extrapolate_positive(st.rho, *st.rho_prev),
                                  nullptr);
}

inline StepResult step_onsager(const TimeState& st, const SchemeConfig& cfg) {
  cfg.validate();
  const StepSystem sys = assemble_onsager(st, cfg);
  return detail::solve_and_report(sys, st, cfg, st.rho, nullptr);
}

/// The system the configured scheme would solve from this state.
inline StepSystem assemble(const TimeState& st, const SchemeConfig& cfg,
                           const EnergyModel& model) {
  switch (cfg.kind) {
    case SchemeKind::S1: return assemble_s1(st, cfg, model);
    case SchemeKind::S1_BDF2: return assemble_s1_bdf2(st, cfg, model);
    case SchemeKind::S2: return assemble_s2(st, cfg);
    case SchemeKind::S2_BDF2: return assemble_s2_bdf2(st, cfg);
    case SchemeKind::Onsager: return assemble_onsager(st, cfg);
  }
  throw std::logic_error("unreachable");
}

/// Floors ρ⁰ at ε and, for SAV kinds, resolves C (default policy when unset)
/// and sets r⁰ = √(E1(ρ⁰) + C).
inline TimeState init_state(const Field& rho0, SchemeConfig& cfg) {
  cfg.validate();
  TimeState st;
  st.rho = map(rho0, [&](double v) { return std::max(v, cfg.epsilon_floor); });
  if (!all_finite(st.rho)) throw std::invalid_argument("initial density is not finite");
  if (is_sav(cfg.kind)) {
    Splitting& sp = *cfg.splitting;
    if (!sp.C) sp.C = default_constant(sp, st.rho);
    st.r = detail::sav_scale(sp, st.rho);
  }
  return st;
}

/// One step of the configured scheme. Second-order kinds take their first
/// step with the matching first-order scheme.
inline StepResult advance(const TimeState& st, const SchemeConfig& cfg, const EnergyModel& model) {
  switch (cfg.kind) {
    case SchemeKind::S1: return step_s1(st, cfg, model);
    case SchemeKind::S1_BDF2:
      return st.rho_prev ? step_s1_bdf2(st, cfg, model) : step_s1(st, cfg, model);
    case SchemeKind::S2: return step_s2(st, cfg);
    case SchemeKind::S2_BDF2:
      return st.rho_prev && st.r_prev ? step_s2_bdf2(st, cfg) : step_s2(st, cfg);
    case SchemeKind::Onsager: return step_onsager(st, cfg);
  }
  throw std::logic_error("unreachable");
}

}  // namespace wgf
