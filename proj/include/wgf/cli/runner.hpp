#pragma once

// Run orchestration and file output: single runs, convergence studies and
// the named experiment suite.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "wgf/benchmarks.hpp"
#include "wgf/cli/config.hpp"
#include "wgf/diagnostics.hpp"
#include "wgf/schemes.hpp"

namespace wgf::cli {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

inline constexpr const char* kReportSchema = "wgflow.report/1";
inline constexpr const char* kStudySchema = "wgflow.study/1";

enum ExitCode : int { kExitOk = 0, kExitRunFailed = 1, kExitAuditFailed = 2, kExitUsage = 3 };

struct Snapshot {
  long step = 0;
  double time = 0.0;
  Field rho;
};

struct Checkpoint {
  double time = 0.0;
  double e_inf = 0.0;
  double e_l2 = 0.0;
};

struct SimulationResult {
  ResolvedRun setup;          // scheme.splitting carries the resolved C
  long steps_requested = 0;
  RunTrace trace;
  std::vector<Snapshot> snapshots;
  std::vector<Checkpoint> checkpoints;  // only when a reference solution exists
  Field final_rho;
  std::optional<std::string> error;
  std::optional<double> e_inf, e_l2;  // against the reference at the last completed step
  std::optional<AuditReport> audit;

  bool completed() const { return !error; }
  long steps_completed() const { return trace.empty() ? 0 : trace.back().step; }
  bool passed() const { return completed() && audit && audit->passed(); }
};

/// floor(T/δt) with a small guard against T/δt landing just below an integer.
inline long step_count(double T, double dt) {
  return static_cast<long>(std::floor(T / dt + 1e-9));
}

namespace detail {

inline TraceRecord initial_record(const TimeState& st, const SchemeConfig& cfg,
                                  const EnergyModel& model) {
  TraceRecord rec;
  rec.mass = integrate(st.rho);
  rec.min_rho = min_value(st.rho);
  if (is_sav(cfg.kind)) {
    const Splitting& sp = *cfg.splitting;
    rec.energy_original = eval_split_energy(sp, st.rho);
    rec.energy_modified = modified_energy(sp, st.rho, *st.r);
    rec.r = st.r;
    rec.r_drift = *st.r - std::sqrt(std::max(0.0, eval_E1(sp, st.rho) + sp.constant()));
  } else {
    rec.energy_original = eval_energy(model, st.rho);
    rec.energy_modified = s1_lyapunov(model, st.rho);
  }
  return rec;
}

inline TraceRecord step_record(long step, double dt, const StepReport& rep) {
  TraceRecord rec;
  rec.step = static_cast<int>(step);
  rec.time = step * dt;
  rec.mass = rep.mass;
  rec.energy_original = rep.energy_original;
  rec.energy_modified = rep.energy_modified;
  rec.min_rho = rep.min_rho;
  rec.newton_iterations = rep.newton_iterations;
  rec.r = rep.r;
  rec.r_drift = rep.r_drift;
  rec.floor_mass = rep.solve.lifted_mass;
  return rec;
}

inline std::optional<Checkpoint> checkpoint(const ProblemSpec& p, const Field& rho, double t) {
  if (!p.exact) return std::nullopt;
  const auto ref = [&](const Point& x) { return p.exact(x, t); };
  return Checkpoint{t, error_inf(rho, ref), error_l2(rho, ref)};
}

}  // namespace detail

/// Runs the resolved problem to its final time. Step failures are recorded,
/// not thrown; the trace then ends at the last completed step.
inline SimulationResult simulate(const ResolvedRun& setup,
                                 const std::vector<double>& snapshot_times = {}) {
  SimulationResult res;
  res.setup = setup;
  const ProblemSpec& p = res.setup.problem;
  SchemeConfig& cfg = res.setup.scheme;
  const double dt = cfg.dt;
  res.steps_requested = step_count(p.T, dt);
  if (res.steps_requested < 1) throw ConfigError("T must be at least one time step");

  std::set<long> snap_steps{0, res.steps_requested};
  for (double t : snapshot_times) {
    const long k = std::lround(t / dt);
    if (k >= 0 && k <= res.steps_requested) snap_steps.insert(k);
  }

  TimeState st = init_state(p.initial, cfg);
  res.trace.append(detail::initial_record(st, cfg, p.model));
  auto record_snapshot = [&](long k) {
    if (!snap_steps.count(k)) return;
    res.snapshots.push_back({k, k * dt, st.rho});
    if (k > 0)
      if (auto c = detail::checkpoint(p, st.rho, k * dt)) res.checkpoints.push_back(*c);
  };
  record_snapshot(0);

  for (long k = 1; k <= res.steps_requested; ++k) {
    try {
      StepResult next = advance(st, cfg, p.model);
      st = std::move(next.state);
      res.trace.append(detail::step_record(k, dt, next.report));
    } catch (const StepFailure& e) {
      res.error = e.what();
      break;
    } catch (const std::exception& e) {
      res.error = "step " + std::to_string(k) + " failed: " + e.what();
      break;
    }
    record_snapshot(k);
  }

  res.final_rho = st.rho;
  if (auto c = detail::checkpoint(p, st.rho, res.steps_completed() * dt)) {
    res.e_inf = c->e_inf;
    res.e_l2 = c->e_l2;
  }
  if (res.error && (res.snapshots.empty() || res.snapshots.back().step != res.steps_completed()))
    res.snapshots.push_back({res.steps_completed(), res.steps_completed() * dt, st.rho});
  res.audit = audit(res.trace, res.setup.audit);
  return res;
}

// -- formatting ----------------------------------------------------------------

/// Lower-case scientific notation with 17 significant digits.
inline std::string format_real(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.16e", v);
  return buf;
}

inline std::string format_optional(const std::optional<double>& v) {
  return v ? format_real(*v) : std::string();
}

inline void write_trace_csv(const fs::path& path, const RunTrace& trace, int every = 1) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "step,time,mass,energy_original,energy_modified,min_rho,newton_iters,r,r_drift\n";
  const auto& recs = trace.records();
  for (std::size_t i = 0; i < recs.size(); ++i) {
    const auto& r = recs[i];
    if (r.step % every != 0 && i + 1 != recs.size()) continue;
    out << r.step << ',' << format_real(r.time) << ',' << format_real(r.mass) << ','
        << format_real(r.energy_original) << ',' << format_optional(r.energy_modified) << ','
        << format_real(r.min_rho) << ',' << r.newton_iterations << ',' << format_optional(r.r)
        << ',' << format_optional(r.r_drift) << '\n';
  }
}

inline void write_field_csv(const fs::path& path, const Field& rho) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  const bool two_d = rho.grid.dim == 2;
  out << (two_d ? "x,y,rho\n" : "x,rho\n");
  for (std::size_t i = 0; i < rho.size(); ++i) {
    const Point c = rho.grid.center(i);
    out << format_real(c[0]) << ',';
    if (two_d) out << format_real(c[1]) << ',';
    out << format_real(rho[i]) << '\n';
  }
}

inline json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

inline json audit_json(const AuditReport& a) {
  return {{"passed", a.passed()},
          {"max_mass_drift", a.max_mass_drift},
          {"floor_mass", a.floor_mass},
          {"min_rho", a.min_rho},
          {"max_energy_jump", a.max_energy_jump},
          {"initial_energy", a.initial_energy},
          {"max_newton_iterations", a.max_newton_iterations},
          {"newton_window_means", a.newton_window_means},
          {"mass_strictly_increasing", a.mass_strictly_increasing},
          {"violations", a.violations}};
}

inline json parameters_json(const ResolvedRun& r) {
  const ProblemSpec& p = r.problem;
  const SchemeConfig& s = r.scheme;
  json j{{"dim", p.grid.dim},
         {"M", p.grid.cells},
         {"extent", p.grid.extent()},
         {"origin", {p.grid.origin[0], p.grid.origin[1]}},
         {"boundary", to_string(p.grid.bc)},
         {"dt", s.dt},
         {"T", p.T},
         {"epsilon", p.epsilon},
         {"C", s.splitting && s.splitting->C ? json(*s.splitting->C) : json(nullptr)}};
  j["newton"] = {{"tol_residual", s.newton.tol_residual},
                 {"tol_step", s.newton.tol_step},
                 {"tol_stall", s.newton.tol_stall},
                 {"max_iter", s.newton.max_iter},
                 {"theta_boundary", s.newton.theta_boundary},
                 {"backtrack_factor", s.newton.backtrack_factor},
                 {"max_backtracks", s.newton.max_backtracks}};
  return j;
}

/// Fixed schema: schema, problem, scheme, parameters, status, error,
/// steps_requested, steps_completed, final_time, audit, errors, checkpoints.
inline json report_json(const SimulationResult& res) {
  json j;
  j["schema"] = kReportSchema;
  j["problem"] = res.setup.problem.name;
  j["scheme"] = to_string(res.setup.scheme.kind);
  j["parameters"] = parameters_json(res.setup);
  j["status"] = res.completed() ? "completed" : "failed";
  j["error"] = res.error ? json(*res.error) : json(nullptr);
  j["steps_requested"] = res.steps_requested;
  j["steps_completed"] = res.steps_completed();
  j["final_time"] = res.trace.empty() ? 0.0 : res.trace.back().time;
  j["audit"] = res.audit ? audit_json(*res.audit) : json(nullptr);
  if (res.e_inf)
    j["errors"] = {{"e_inf", *res.e_inf},
                   {"e_l2", *res.e_l2},
                   {"reference", res.setup.problem.exact_is_steady ? "steady" : "exact"}};
  else
    j["errors"] = nullptr;
  json cps = json::array();
  for (const auto& c : res.checkpoints)
    cps.push_back({{"time", c.time}, {"e_inf", c.e_inf}, {"e_l2", c.e_l2}});
  j["checkpoints"] = cps;
  return j;
}

inline void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

inline void write_run_outputs(const fs::path& dir, const SimulationResult& res, int trace_every) {
  fs::create_directories(dir);
  write_trace_csv(dir / "trace.csv", res.trace, trace_every);
  for (const auto& s : res.snapshots)
    write_field_csv(dir / ("field_" + std::to_string(s.step) + ".csv"), s.rho);
  write_json(dir / "report.json", report_json(res));
}

inline int exit_code(const SimulationResult& res, bool strict) {
  if (!res.completed()) return kExitRunFailed;
  if (strict && !(res.audit && res.audit->passed())) return kExitAuditFailed;
  return kExitOk;
}

/// Single run: outputs under cfg.output_dir, kept also when a step fails.
inline int run(const RunConfig& cfg, bool strict = false) {
  const SimulationResult res = simulate(resolve(cfg), cfg.snapshot_times);
  write_run_outputs(cfg.output_dir, res, cfg.trace_every);
  return exit_code(res, strict);
}

// -- convergence studies ---------------------------------------------------------

struct StudyRow {
  double dt = 0.0;
  double e_inf = 0.0;
  double e_l2 = 0.0;
  std::optional<double> order_inf, order_l2;  // against the previous row
};

struct StudyResult {
  std::string problem;
  SchemeKind scheme = SchemeKind::S1;
  std::vector<StudyRow> rows;
  std::vector<SimulationResult> runs;
  std::optional<std::string> error;

  bool completed() const { return !error; }
  bool passed() const {
    if (error) return false;
    for (const auto& r : runs)
      if (!r.passed()) return false;
    return true;
  }
};

inline StudyResult convergence_study(const RunConfig& cfg) {
  if (cfg.dt_list.empty()) throw ConfigError("study needs at least one time step");
  const ResolvedRun base = resolve(cfg);
  if (!base.problem.exact || base.problem.exact_is_steady)
    throw ConfigError("problem '" + cfg.problem + "' has no time-dependent exact solution");
  StudyResult study;
  study.problem = base.problem.name;
  study.scheme = base.scheme.kind;
  for (double dt : cfg.dt_list) {
    RunConfig member = cfg;
    member.overrides.dt = dt;
    SimulationResult res = simulate(resolve(member));
    if (!res.completed()) {
      study.error = "run with dt = " + format_real(dt) + " failed: " + *res.error;
      study.runs.push_back(std::move(res));
      return study;
    }
    study.rows.push_back({dt, *res.e_inf, *res.e_l2, std::nullopt, std::nullopt});
    study.runs.push_back(std::move(res));
  }
  for (std::size_t k = 1; k < study.rows.size(); ++k) {
    StudyRow& a = study.rows[k - 1];
    StudyRow& b = study.rows[k];
    if (a.dt == b.dt || !(a.e_inf > 0.0) || !(b.e_inf > 0.0)) continue;
    b.order_inf = observed_order({{a.dt, a.e_inf}, {b.dt, b.e_inf}}).front();
    if (a.e_l2 > 0.0 && b.e_l2 > 0.0)
      b.order_l2 = observed_order({{a.dt, a.e_l2}, {b.dt, b.e_l2}}).front();
  }
  return study;
}

inline json study_json(const StudyResult& s) {
  json rows = json::array();
  for (const auto& r : s.rows)
    rows.push_back({{"dt", r.dt},
                    {"e_inf", r.e_inf},
                    {"order_inf", optional_json(r.order_inf)},
                    {"e_l2", r.e_l2},
                    {"order_l2", optional_json(r.order_l2)}});
  json audits = json::array();
  for (const auto& r : s.runs)
    audits.push_back({{"dt", r.setup.scheme.dt},
                      {"status", r.completed() ? "completed" : "failed"},
                      {"audit", r.audit ? audit_json(*r.audit) : json(nullptr)}});
  return {{"schema", kStudySchema},
          {"problem", s.problem},
          {"scheme", to_string(s.scheme)},
          {"status", s.completed() ? "completed" : "failed"},
          {"error", s.error ? json(*s.error) : json(nullptr)},
          {"rows", rows},
          {"runs", audits}};
}

inline void write_study_outputs(const fs::path& dir, const StudyResult& s) {
  fs::create_directories(dir);
  std::ofstream out(dir / "study.csv");
  if (!out) throw std::runtime_error("cannot write " + (dir / "study.csv").string());
  out << "dt,e_inf,order_inf,e_l2,order_l2\n";
  for (const auto& r : s.rows)
    out << format_real(r.dt) << ',' << format_real(r.e_inf) << ',' << format_optional(r.order_inf)
        << ',' << format_real(r.e_l2) << ',' << format_optional(r.order_l2) << '\n';
  write_json(dir / "study.json", study_json(s));
}

// -- experiment suite -------------------------------------------------------------

inline const std::vector<std::string>& suite_names() {
  static const std::vector<std::string> names{
      "heat_s1",        "heat_s2",        "heat_s1_bdf2",     "heat_s2_bdf2",
      "pme_barenblatt_s1", "pme_barenblatt_s2", "fokker_planck", "pme_drift_m2",
      "pme_drift_m4",   "pme_drift_m6",   "pme_drift_m20",    "pme_drift_m50",
      "pme_drift_m100", "fisher_kpp"};
  return names;
}

inline bool suite_entry_is_study(const std::string& name) { return name.rfind("heat_", 0) == 0; }

/// Configuration of a named experiment with its reference parameters.
inline RunConfig suite_config(const std::string& name) {
  const auto& names = suite_names();
  if (std::find(names.begin(), names.end(), name) == names.end())
    throw std::invalid_argument("unknown experiment '" + name + "'");
  RunConfig c;
  if (suite_entry_is_study(name)) {
    c.problem = "heat";
    c.scheme = parse_scheme(name.substr(5));
    if (is_second_order(*c.scheme)) c.dt_list = {0.1, 0.05, 0.025};
    // The even 1/100 + 1/100 split is only marginally stable under BDF2 and
    // blows up for δt ≤ 0.05; an explicit share of 1/3 of the implicit part is not.
    if (*c.scheme == SchemeKind::S2_BDF2) c.overrides.entropy_split = 0.015;
  } else if (name.rfind("pme_barenblatt_", 0) == 0) {
    c.problem = "pme_barenblatt";
    c.scheme = parse_scheme(name.substr(15));
  } else if (name == "fokker_planck") {
    c.problem = "fokker_planck";
    c.snapshot_times = {1.0, 2.0, 4.0};
  } else if (name.rfind("pme_drift_m", 0) == 0) {
    c.problem = "pme_drift";
    c.overrides.m = std::stod(name.substr(11));
  } else {
    c.problem = "fisher_kpp";
  }
  return c;
}

struct SuiteEntry {
  std::string name;
  std::optional<SimulationResult> run;
  std::optional<StudyResult> study;
  double seconds = 0.0;

  bool passed() const { return run ? run->passed() : study && study->passed(); }
};

struct SuiteResult {
  std::vector<SuiteEntry> entries;

  bool passed() const {
    for (const auto& e : entries)
      if (!e.passed()) return false;
    return true;
  }
  const SuiteEntry& at(const std::string& name) const {
    for (const auto& e : entries)
      if (e.name == name) return e;
    throw std::out_of_range("no suite entry '" + name + "'");
  }
};

inline SuiteEntry run_experiment(const std::string& name,
                                 const std::optional<fs::path>& out_root = std::nullopt) {
  const RunConfig c = suite_config(name);
  SuiteEntry e;
  e.name = name;
  const auto t0 = std::chrono::steady_clock::now();
  if (suite_entry_is_study(name)) {
    e.study = convergence_study(c);
    if (out_root) write_study_outputs(*out_root / name, *e.study);
  } else {
    e.run = simulate(resolve(c), c.snapshot_times);
    if (out_root) write_run_outputs(*out_root / name, *e.run, c.trace_every);
  }
  e.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return e;
}

/// Runs the named experiments in order. Unknown names are rejected before
/// anything runs.
inline SuiteResult suite(const std::vector<std::string>& names,
                         const std::optional<fs::path>& out_root = std::nullopt) {
  if (names.empty()) throw std::invalid_argument("suite needs at least one experiment");
  for (const auto& n : names) suite_config(n);
  SuiteResult res;
  for (const auto& n : names) res.entries.push_back(run_experiment(n, out_root));
  return res;
}

inline json suite_json(const SuiteResult& s) {
  json entries = json::array();
  for (const auto& e : s.entries) {
    json j{{"name", e.name}, {"passed", e.passed()}, {"seconds", e.seconds}};
    if (e.run) j["report"] = report_json(*e.run);
    if (e.study) j["study"] = study_json(*e.study);
    entries.push_back(j);
  }
  return {{"schema", "wgflow.suite/1"}, {"passed", s.passed()}, {"experiments", entries}};
}

}  // namespace wgf::cli
