#pragma once

// Energy functionals E(ρ) = Σ terms, their pointwise variational derivatives,
// H″ for the first approach, and the SAV splitting E = E1 + c·∫ρ(log ρ − 1).

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include "wgf/grid.hpp"

namespace wgf {

/// Evaluation outside a term's domain (e.g. log of a nonpositive density).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// The model cannot be advanced by the first approach (H″ ≤ 0 somewhere).
class AdmissibilityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Entropy {
  double coeff = 1.0;  // coeff·ρ(log ρ − 1)
};

struct PowerLaw {
  double coeff = 1.0;  // coeff·ρ^m/(m − 1)
  double m = 2.0;
};

struct Potential {
  Field v;  // ρ·v, sampled at cell centres
};

struct CustomH {
  std::function<double(double)> H, dH, d2H;
};

using EnergyTerm = std::variant<Entropy, PowerLaw, Potential, CustomH>;

struct EnergyModel {
  std::vector<EnergyTerm> terms;
};

namespace detail {

inline void check_term(const EnergyTerm& t) {
  if (auto* p = std::get_if<PowerLaw>(&t)) {
    if (!(p->m > 1.0)) throw std::invalid_argument("power-law exponent must exceed 1");
    if (!std::isfinite(p->coeff)) throw std::invalid_argument("power-law coefficient not finite");
  } else if (auto* e = std::get_if<Entropy>(&t)) {
    if (!std::isfinite(e->coeff)) throw std::invalid_argument("entropy coefficient not finite");
  } else if (auto* c = std::get_if<CustomH>(&t)) {
    if (!c->H || !c->dH || !c->d2H) throw std::invalid_argument("custom H needs H, H', H''");
  }
}

inline void require_positive(double rho, const char* what) {
  if (!(rho > 0.0))
    throw DomainError(std::string(what) + ": density must be positive, got " +
                      std::to_string(rho));
}

/// Pointwise H(ρ) of an H-type term plus ρ·v for a potential.
inline double density(const EnergyTerm& t, double rho, std::size_t i) {
  return std::visit(
      [&](const auto& term) -> double {
        using T = std::decay_t<decltype(term)>;
        if constexpr (std::is_same_v<T, Entropy>) {
          if (term.coeff == 0.0) return 0.0;
          require_positive(rho, "entropy");
          return term.coeff * rho * (std::log(rho) - 1.0);
        } else if constexpr (std::is_same_v<T, PowerLaw>) {
          if (rho < 0.0) throw DomainError("power law: negative density");
          return term.coeff * std::pow(rho, term.m) / (term.m - 1.0);
        } else if constexpr (std::is_same_v<T, Potential>) {
          return rho * term.v[i];
        } else {
          return term.H(rho);
        }
      },
      t);
}

inline double derivative(const EnergyTerm& t, double rho, std::size_t i) {
  return std::visit(
      [&](const auto& term) -> double {
        using T = std::decay_t<decltype(term)>;
        if constexpr (std::is_same_v<T, Entropy>) {
          if (term.coeff == 0.0) return 0.0;
          require_positive(rho, "entropy");
          return term.coeff * std::log(rho);
        } else if constexpr (std::is_same_v<T, PowerLaw>) {
          if (rho < 0.0) throw DomainError("power law: negative density");
          return term.coeff * term.m / (term.m - 1.0) * std::pow(rho, term.m - 1.0);
        } else if constexpr (std::is_same_v<T, Potential>) {
          return term.v[i];
        } else {
          return term.dH(rho);
        }
      },
      t);
}

inline double second_derivative(const EnergyTerm& t, double rho) {
  return std::visit(
      [&](const auto& term) -> double {
        using T = std::decay_t<decltype(term)>;
        if constexpr (std::is_same_v<T, Entropy>) {
          require_positive(rho, "entropy");
          return term.coeff / rho;
        } else if constexpr (std::is_same_v<T, PowerLaw>) {
          require_positive(rho, "power law");
          return term.coeff * term.m * std::pow(rho, term.m - 2.0);
        } else if constexpr (std::is_same_v<T, Potential>) {
          return 0.0;
        } else {
          return term.d2H(rho);
        }
      },
      t);
}

inline void check_potential_grid(const std::vector<EnergyTerm>& terms, const Field& rho) {
  for (const auto& t : terms)
    if (auto* p = std::get_if<Potential>(&t)) require_same_grid(p->v, rho);
}

inline double eval_terms(const std::vector<EnergyTerm>& terms, const Field& rho) {
  check_potential_grid(terms, rho);
  double s = 0.0;
  for (std::size_t i = 0; i < rho.size(); ++i)
    for (const auto& t : terms) s += density(t, rho[i], i);
  return s * rho.grid.cell_volume();
}

inline Field derivative_terms(const std::vector<EnergyTerm>& terms, const Field& rho) {
  check_potential_grid(terms, rho);
  Field out(rho.grid);
  for (std::size_t i = 0; i < rho.size(); ++i)
    for (const auto& t : terms) out[i] += derivative(t, rho[i], i);
  return out;
}

}  // namespace detail

inline void validate(const EnergyModel& model) {
  if (model.terms.empty()) throw std::invalid_argument("energy model has no terms");
  for (const auto& t : model.terms) detail::check_term(t);
}

inline double eval_energy(const EnergyModel& model, const Field& rho) {
  validate(model);
  return detail::eval_terms(model.terms, rho);
}

inline Field variational_derivative(const EnergyModel& model, const Field& rho) {
  validate(model);
  return detail::derivative_terms(model.terms, rho);
}

/// Σ H″(ρ) over the H-type terms; potentials contribute nothing.
inline Field second_derivative_H(const EnergyModel& model, const Field& rho) {
  validate(model);
  Field out(rho.grid);
  for (std::size_t i = 0; i < rho.size(); ++i) {
    double s = 0.0;
    for (const auto& t : model.terms) s += detail::second_derivative(t, rho[i]);
    if (!(s > 0.0))
      throw AdmissibilityError("H'' must be positive for the first approach; got " +
                               std::to_string(s) + " at density " + std::to_string(rho[i]));
    out[i] = s;
  }
  return out;
}

/// True when the model has at least one potential term.
inline bool has_potential(const EnergyModel& model) {
  for (const auto& t : model.terms)
    if (std::holds_alternative<Potential>(t)) return true;
  return false;
}

/// Pointwise sum of potential terms (zero field if none).
inline Field total_potential(const EnergyModel& model, const Grid& g) {
  Field v(g);
  for (const auto& t : model.terms)
    if (auto* p = std::get_if<Potential>(&t)) {
      require_same_grid(p->v, v);
      for (std::size_t i = 0; i < v.size(); ++i) v[i] += p->v[i];
    }
  return v;
}

/// E = E1 + entropy_coeff·∫ρ(log ρ − 1). C unset means "resolve from ρ⁰".
struct Splitting {
  std::vector<EnergyTerm> e1_terms;
  std::optional<double> C;
  double entropy_coeff = 1.0;

  double constant() const {
    if (!C) throw std::logic_error("SAV constant C not resolved; call init_state first");
    return *C;
  }
};

/// Appends −entropy_coeff·entropy to the model terms. Entropy terms are merged
/// into one, and dropped when their coefficients cancel.
inline Splitting make_splitting(const EnergyModel& model, std::optional<double> C = std::nullopt,
                                double entropy_coeff = 1.0) {
  validate(model);
  if (!(entropy_coeff > 0.0)) throw std::invalid_argument("entropy coefficient must be positive");
  Splitting s;
  s.C = C;
  s.entropy_coeff = entropy_coeff;
  double ent = -entropy_coeff;
  for (const auto& t : model.terms) {
    if (auto* e = std::get_if<Entropy>(&t))
      ent += e->coeff;
    else
      s.e1_terms.push_back(t);
  }
  if (std::abs(ent) > 1e-15 * entropy_coeff) s.e1_terms.push_back(Entropy{ent});
  return s;
}

inline double eval_E1(const Splitting& s, const Field& rho) {
  return detail::eval_terms(s.e1_terms, rho);
}

inline Field dE1(const Splitting& s, const Field& rho) {
  return detail::derivative_terms(s.e1_terms, rho);
}

/// ∫ρ(log ρ − 1).
inline double entropy(const Field& rho) {
  return detail::eval_terms({Entropy{1.0}}, rho);
}

/// The full energy E1 + entropy_coeff·∫ρ(log ρ − 1) (C excluded).
inline double eval_split_energy(const Splitting& s, const Field& rho) {
  return eval_E1(s, rho) + s.entropy_coeff * entropy(rho);
}

/// Default C so that E1(ρ⁰) + C ≥ 1.
inline double default_constant(const Splitting& s, const Field& rho0) {
  return std::max(1.0, 1.0 - eval_E1(s, rho0));
}

}  // namespace wgf
