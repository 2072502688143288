#pragma once

// Run configuration: a line-oriented `key = value` file plus `key=value`
// overrides, resolved into a problem preset and a scheme configuration.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

#include "wgf/benchmarks.hpp"
#include "wgf/diagnostics.hpp"
#include "wgf/newton.hpp"
#include "wgf/schemes.hpp"

namespace wgf::cli {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Audit overrides; unset entries fall back to the per-problem defaults and
/// a value of `none` switches a check off.
struct AuditOverrides {
  std::optional<std::optional<double>> max_mass_drift, min_rho, energy_relative_tolerance,
      max_window_mean;
  std::optional<std::optional<int>> max_newton_iterations;
  std::optional<bool> expect_mass_increase;
  std::optional<int> window;
};

struct RunConfig {
  std::string problem = "heat";
  std::optional<SchemeKind> scheme;  // problem default when unset
  ProblemOverrides overrides;
  NewtonConfig newton;
  std::filesystem::path output_dir = "wgf_out";
  std::vector<double> snapshot_times;
  int trace_every = 1;
  std::vector<double> dt_list{0.1, 0.05, 0.025, 0.0125};
  AuditOverrides audit;
};

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  std::string out(s.substr(b, e - b + 1));
  if (out.size() >= 2 && (out.front() == '"' || out.front() == '\'') && out.back() == out.front())
    out = out.substr(1, out.size() - 2);
  return out;
}

template <class T>
T parse_number(const std::string& v, const std::string& key) {
  T out{};
  const char* end = v.data() + v.size();
  auto [p, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc{} || p != end || v.empty())
    throw ConfigError("key '" + key + "' expects " +
                      (std::is_integral_v<T> ? "an integer" : "a number") + ", got '" + v + "'");
  if constexpr (std::is_floating_point_v<T>)
    if (!std::isfinite(out)) throw ConfigError("key '" + key + "' must be finite");
  return out;
}

inline double parse_real(const std::string& v, const std::string& key) {
  return parse_number<double>(v, key);
}

inline double parse_positive(const std::string& v, const std::string& key) {
  const double x = parse_real(v, key);
  if (!(x > 0.0)) throw ConfigError("key '" + key + "' must be positive, got " + v);
  return x;
}

inline int parse_count(const std::string& v, const std::string& key, int min_value) {
  const int x = parse_number<int>(v, key);
  if (x < min_value)
    throw ConfigError("key '" + key + "' must be at least " + std::to_string(min_value));
  return x;
}

inline bool parse_bool(const std::string& v, const std::string& key) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("key '" + key + "' expects true/false, got '" + v + "'");
}

inline std::vector<double> parse_list(const std::string& v, const std::string& key,
                                      bool positive) {
  std::vector<double> out;
  if (trim(v).empty()) return out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const std::string t = trim(item);
    out.push_back(positive ? parse_positive(t, key) : parse_real(t, key));
  }
  return out;
}

inline std::optional<double> parse_optional_real(const std::string& v, const std::string& key) {
  if (v == "none" || v == "off") return std::nullopt;
  return parse_real(v, key);
}

using Setter = std::function<void(RunConfig&, const std::string& value, const std::string& key)>;

inline const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = [] {
    std::map<std::string, Setter> t;
    t["problem"] = [](RunConfig& c, const std::string& v, const std::string&) {
      const auto& names = problem_names();
      if (std::find(names.begin(), names.end(), v) == names.end())
        throw ConfigError("unknown problem '" + v + "'");
      c.problem = v;
    };
    t["scheme"] = [](RunConfig& c, const std::string& v, const std::string&) {
      try {
        c.scheme = parse_scheme(v);
      } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
      }
    };
    t["M"] = [](RunConfig& c, const std::string& v, const std::string& k) {
      c.overrides.M = parse_count(v, k, 2);
    };
    t["dt"] = [](RunConfig& c, const std::string& v, const std::string& k) {
      c.overrides.dt = parse_positive(v, k);
    };
    t["T"] = [](RunConfig& c, const std::string& v, const std::string& k) {
      c.overrides.T = parse_positive(v, k);
    };
    t["m"] = [](RunConfig& c, const std::string& v, const std::string& k) {
      const double m = parse_real(v, k);
      if (!(m > 1.0)) throw ConfigError("key 'm' must exceed 1");
      c.overrides.m = m;
    };
    t["C"] = [](RunConfig& c, const std::string& v, const std::string& k) {
      c.overrides.C = parse_real(v, k);
    };
    t["extent"] = [](RunConfig& c, const std::string& v, const std::string& k) {
      c.overrides.extent = parse_positive(v, k);
    };
    t["origin_x"] = [](RunConfig& c, const std::string& v, const std::string& k) {
      Point o = c.overrides.origin.value_or(Point{0.0, 0.0});
      o[0] = parse_real(v, k);
      c.overrides.origin = o;
    };
    t["origin_y"] = [](RunConfig& c, const std::string& v, const std::string& k) {
      Point o = c.overrides.origin.value_or(Point{0.0, 0.0});
      o[1] = parse_real(v, k);
      c.overrides.origin = o;
    };
    t["seed"] = [](RunConfig& c, const std::string& v, const std::string& k) {
      c.overrides.seed = parse_number<std::uint64_t>(v, k);
    };
    t["potential"] = [](RunConfig& c, const std::string& v, const std::string&) {
      if (v != "quadratic" && v != "sinusoidal")
        throw ConfigError("unknown potential '" + v + "'");
      c.overrides.potential = v;
    };
    t["alpha"] = [](RunConfig& c, const std::string& v, const std::string& k) {
      c.overrides.alpha = parse_positive(v, k);
    };
    t["random_low"] = [](RunConfig& c, const std::string& v, const std::string& k) {
      c.overrides.random_low = parse_positive(v, k);
    };
    t["random_high"] = [](RunConfig& c, const std::string& v, const std::string& k) {
      c.overrides.random_high = parse_positive(v, k);
    };
    t["epsilon"] = [](RunConfig& c, const std::string& v, const std::string& k) {
      c.overrides.epsilon = parse_positive(v, k);
    };
    t["entropy_split"] = [](RunConfig& c, const std::string& v, const std::string& k) {
      c.overrides.entropy_split = parse_positive(v, k);
    };

    t["newton.tol_residual"] = [](RunConfig& c, const std::string& v, const std::string& k) {
      c.newton.tol_residual = parse_positive(v, k);
    };
    t["newton.tol_step"] = [](RunConfig& c, const std::string& v, const std::string& k) {
      c.newton.tol_step = parse_positive(v, k);
    };
    t["newton.tol_stall"] = [](RunConfig& c, const std::string& v, const std::string& k) {
      c.newton.tol_stall = parse_positive(v, k);
    };
    t["newton.max_iter"] = [](RunConfig& c, const std::string& v, const std::string& k) {
      c.newton.max_iter = parse_count(v, k, 1);
    };
    t["newton.theta_boundary"] = [](RunConfig& c, const std::string& v, const std::string& k) {
      c.newton.theta_boundary = parse_real(v, k);
    };
    t["newton.backtrack_factor"] = [](RunConfig& c, const std::string& v, const std::string& k) {
      c.newton.backtrack_factor = parse_real(v, k);
    };
    t["newton.max_backtracks"] = [](RunConfig& c, const std::string& v, const std::string& k) {
      c.newton.max_backtracks = parse_count(v, k, 0);
    };

    t["output.dir"] = [](RunConfig& c, const std::string& v, const std::string& k) {
      if (v.empty()) throw ConfigError("key '" + k + "' must not be empty");
      c.output_dir = v;
    };
    t["output.snapshot_times"] = [](RunConfig& c, const std::string& v, const std::string& k) {
      c.snapshot_times = parse_list(v, k, false);
      for (double s : c.snapshot_times)
        if (s < 0.0) throw ConfigError("snapshot times must be nonnegative");
    };
    t["output.trace_every"] = [](RunConfig& c, const std::string& v, const std::string& k) {
      c.trace_every = parse_count(v, k, 1);
    };
    t["study.dt_list"] = [](RunConfig& c, const std::string& v, const std::string& k) {
      c.dt_list = parse_list(v, k, true);
      if (c.dt_list.empty()) throw ConfigError("study.dt_list must not be empty");
    };

    t["audit.max_mass_drift"] = [](RunConfig& c, const std::string& v, const std::string& k) {
      c.audit.max_mass_drift = parse_optional_real(v, k);
    };
    t["audit.min_rho"] = [](RunConfig& c, const std::string& v, const std::string& k) {
      c.audit.min_rho = parse_optional_real(v, k);
    };
    t["audit.energy_tolerance"] = [](RunConfig& c, const std::string& v, const std::string& k) {
      c.audit.energy_relative_tolerance = parse_optional_real(v, k);
    };
    t["audit.max_window_mean"] = [](RunConfig& c, const std::string& v, const std::string& k) {
      c.audit.max_window_mean = parse_optional_real(v, k);
    };
    t["audit.max_newton_iterations"] = [](RunConfig& c, const std::string& v,
                                          const std::string& k) {
      if (v == "none" || v == "off")
        c.audit.max_newton_iterations = std::optional<int>{};
      else
        c.audit.max_newton_iterations = std::optional<int>{parse_count(v, k, 1)};
    };
    t["audit.window"] = [](RunConfig& c, const std::string& v, const std::string& k) {
      c.audit.window = parse_count(v, k, 1);
    };
    t["audit.expect_mass_increase"] = [](RunConfig& c, const std::string& v,
                                         const std::string& k) {
      c.audit.expect_mass_increase = parse_bool(v, k);
    };
    return t;
  }();
  return table;
}

}  // namespace detail

inline std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const auto& [k, _] : detail::setters()) keys.push_back(k);
  return keys;
}

/// Applies one assignment. `where` prefixes error messages.
inline void apply_setting(RunConfig& cfg, const std::string& key, const std::string& value,
                          const std::string& where) {
  const auto& table = detail::setters();
  const auto it = table.find(key);
  if (it == table.end()) throw ConfigError(where + ": unknown key '" + key + "'");
  try {
    it->second(cfg, value, key);
  } catch (const ConfigError& e) {
    throw ConfigError(where + ": " + e.what());
  }
}

/// Applies a `key=value` override as given on the command line.
inline void apply_override(RunConfig& cfg, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos)
    throw ConfigError("override '" + assignment + "': expected key=value");
  apply_setting(cfg, detail::trim(assignment.substr(0, eq)),
                detail::trim(assignment.substr(eq + 1)), "override '" + assignment + "'");
}

/// Parses config text; `#` starts a comment. Later assignments win.
inline RunConfig parse_config_text(const std::string& text, RunConfig cfg = {}) {
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    if (detail::trim(line).empty()) continue;
    const std::string where = "line " + std::to_string(lineno);
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(where + ": expected 'key = value'");
    const std::string key = detail::trim(line.substr(0, eq));
    if (key.empty()) throw ConfigError(where + ": missing key");
    apply_setting(cfg, key, detail::trim(line.substr(eq + 1)), where);
  }
  return cfg;
}

/// File (optional) then overrides, in order.
inline RunConfig parse_config(const std::optional<std::filesystem::path>& file,
                              const std::vector<std::string>& overrides = {}) {
  RunConfig cfg;
  if (file) {
    std::ifstream in(*file);
    if (!in) throw ConfigError("cannot read config file '" + file->string() + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    try {
      cfg = parse_config_text(ss.str());
    } catch (const ConfigError& e) {
      throw ConfigError(file->string() + ": " + e.what());
    }
  }
  for (const auto& o : overrides) apply_override(cfg, o);
  return cfg;
}

struct ResolvedRun {
  ProblemSpec problem;
  SchemeConfig scheme;
  AuditExpectations audit;
};

/// Per-problem audit defaults: conservation for conserving schemes, the ε
/// floor, energy monotonicity when the scheme has a Lyapunov functional, and
/// the Newton budget.
inline AuditExpectations default_audit(const ProblemSpec& p, const SchemeConfig& s) {
  AuditExpectations ex;
  if (conserves_mass(s.kind)) ex.max_mass_drift = 1e-10 * p.grid.domain_measure();
  ex.min_rho = p.epsilon;
  if (!is_sav(s.kind) && !s1_lyapunov(p.model, p.initial)) ex.energy_relative_tolerance.reset();
  ex.max_newton_iterations = 50;
  ex.max_window_mean = 10.0;
  ex.expect_mass_increase = p.name == "fisher_kpp" && s.kind == SchemeKind::Onsager;
  return ex;
}

inline ResolvedRun resolve(const RunConfig& cfg) {
  ResolvedRun r;
  try {
    r.problem = build_problem(cfg.problem, cfg.overrides);
    r.scheme = scheme_for(r.problem, cfg.scheme.value_or(r.problem.default_scheme));
    r.scheme.newton = cfg.newton;
    r.scheme.newton.floor = r.problem.epsilon;
    r.scheme.newton.validate();
    r.scheme.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  r.audit = default_audit(r.problem, r.scheme);
  const AuditOverrides& a = cfg.audit;
  if (a.max_mass_drift) r.audit.max_mass_drift = *a.max_mass_drift;
  if (a.min_rho) r.audit.min_rho = *a.min_rho;
  if (a.energy_relative_tolerance) r.audit.energy_relative_tolerance = *a.energy_relative_tolerance;
  if (a.max_window_mean) r.audit.max_window_mean = *a.max_window_mean;
  if (a.max_newton_iterations) r.audit.max_newton_iterations = *a.max_newton_iterations;
  if (a.expect_mass_increase) r.audit.expect_mass_increase = *a.expect_mass_increase;
  if (a.window) r.audit.window = *a.window;
  return r;
}

}  // namespace wgf::cli
