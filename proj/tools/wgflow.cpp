// wgflow: command-line driver for the gradient-flow schemes.

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "wgf/wgf.hpp"

namespace {

using namespace wgf::cli;

struct CommonFlags {
  std::string config;
  std::vector<std::string> sets;
  std::string out;
  std::optional<double> dt;
  bool strict = false;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config, "configuration file (key = value lines)")
      ->check(CLI::ExistingFile);
  cmd->add_option("--set", f.sets, "override a key, e.g. --set newton.max_iter=30")
      ->allow_extra_args(false);
  cmd->add_option("--out", f.out, "output directory");
  cmd->add_option("--dt", f.dt, "time step (overrides the file)");
  cmd->add_flag("--strict", f.strict, "exit nonzero when the audit reports a violation");
}

RunConfig load(const CommonFlags& f) {
  std::vector<std::string> overrides = f.sets;
  if (f.dt) overrides.push_back("dt=" + format_real(*f.dt));
  if (!f.out.empty()) overrides.push_back("output.dir=" + f.out);
  return parse_config(f.config.empty() ? std::nullopt : std::optional<fs::path>(f.config),
                      overrides);
}

void print_audit(const wgf::AuditReport& a) {
  std::printf("audit: %s  max mass drift %.3e  min rho %.3e  max energy jump %.3e  max newton %d\n",
              a.passed() ? "passed" : "VIOLATIONS", a.max_mass_drift, a.min_rho,
              a.max_energy_jump, a.max_newton_iterations);
  for (const auto& v : a.violations) std::printf("  - %s\n", v.c_str());
}

void print_run(const SimulationResult& r) {
  std::printf("%s/%s: %ld of %ld steps%s\n", r.setup.problem.name.c_str(),
              wgf::to_string(r.setup.scheme.kind).c_str(), r.steps_completed(), r.steps_requested,
              r.completed() ? "" : " (failed)");
  if (r.error) std::printf("error: %s\n", r.error->c_str());
  if (r.e_inf) std::printf("e_inf %.4e  e_l2 %.4e\n", *r.e_inf, *r.e_l2);
  for (const auto& c : r.checkpoints)
    std::printf("  t = %g: e_inf %.4e  e_l2 %.4e\n", c.time, c.e_inf, c.e_l2);
  if (r.audit) print_audit(*r.audit);
}

void print_study(const StudyResult& s) {
  std::printf("%s/%s convergence\n%10s %12s %8s %12s %8s\n", s.problem.c_str(),
              wgf::to_string(s.scheme).c_str(), "dt", "e_inf", "order", "e_l2", "order");
  for (const auto& r : s.rows) {
    std::printf("%10g %12.4e ", r.dt, r.e_inf);
    r.order_inf ? std::printf("%8.4f ", *r.order_inf) : std::printf("%8s ", "");
    std::printf("%12.4e ", r.e_l2);
    r.order_l2 ? std::printf("%8.4f\n", *r.order_l2) : std::printf("%8s\n", "");
  }
  if (s.error) std::printf("error: %s\n", s.error->c_str());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Structure-preserving schemes for Wasserstein gradient flows"};
  app.require_subcommand(1);

  CommonFlags run_f, study_f, check_f;
  auto* run_cmd = app.add_subcommand("run", "run one simulation");
  add_common(run_cmd, run_f);
  auto* study_cmd = app.add_subcommand("study", "temporal convergence study over study.dt_list");
  add_common(study_cmd, study_f);
  auto* check_cmd = app.add_subcommand("check-config", "parse and resolve a configuration");
  add_common(check_cmd, check_f);

  std::vector<std::string> suite_list;
  std::string suite_out;
  bool suite_strict = false;
  auto* suite_cmd = app.add_subcommand("suite", "run named reference experiments");
  suite_cmd->add_option("names", suite_list, "experiments (default: all)");
  suite_cmd->add_option("--out", suite_out, "output root; one directory per experiment");
  suite_cmd->add_flag("--strict", suite_strict, "exit nonzero on audit violations");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run_cmd) {
      const RunConfig cfg = load(run_f);
      const SimulationResult res = simulate(resolve(cfg), cfg.snapshot_times);
      write_run_outputs(cfg.output_dir, res, cfg.trace_every);
      print_run(res);
      std::printf("outputs in %s\n", cfg.output_dir.string().c_str());
      return exit_code(res, run_f.strict);
    }
    if (*study_cmd) {
      const RunConfig cfg = load(study_f);
      const StudyResult s = convergence_study(cfg);
      write_study_outputs(cfg.output_dir, s);
      print_study(s);
      if (!s.completed()) return kExitRunFailed;
      return study_f.strict && !s.passed() ? kExitAuditFailed : kExitOk;
    }
    if (*check_cmd) {
      const RunConfig cfg = load(check_f);
      const ResolvedRun r = resolve(cfg);
      json j{{"problem", r.problem.name},
             {"scheme", wgf::to_string(r.scheme.kind)},
             {"parameters", parameters_json(r)},
             {"steps", step_count(r.problem.T, r.scheme.dt)},
             {"output_dir", cfg.output_dir.string()}};
      std::cout << j.dump(2) << '\n';
      return kExitOk;
    }
    if (*suite_cmd) {
      const auto names = suite_list.empty() ? suite_names() : suite_list;
      const auto root = suite_out.empty() ? std::nullopt : std::optional<fs::path>(suite_out);
      const SuiteResult res = suite(names, root);
      bool completed = true;
      for (const auto& e : res.entries) {
        std::printf("== %s (%.1f s): %s\n", e.name.c_str(), e.seconds,
                    e.passed() ? "passed" : "FAILED");
        if (e.run) {
          print_run(*e.run);
          completed = completed && e.run->completed();
        }
        if (e.study) {
          print_study(*e.study);
          completed = completed && e.study->completed();
        }
      }
      if (root) write_json(*root / "suite.json", suite_json(res));
      if (!completed) return kExitRunFailed;
      return suite_strict && !res.passed() ? kExitAuditFailed : kExitOk;
    }
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "configuration error: %s\n", e.what());
    return kExitUsage;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "argument error: %s\n", e.what());
    return kExitUsage;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitRunFailed;
  }
  return kExitOk;
}
