#include <catch_amalgamated.hpp>

#include <fstream>
#include <sstream>

#include "wgf/wgf.hpp"

using namespace wgf;
using namespace wgf::cli;
using Catch::Approx;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("wgf_test_cli_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> lines(const fs::path& p) {
  std::vector<std::string> out;
  std::ifstream in(p);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

std::vector<std::string> cells(const std::string& row) {
  std::vector<std::string> out;
  std::stringstream ss(row);
  for (std::string c; std::getline(ss, c, ',');) out.push_back(c);
  if (!row.empty() && row.back() == ',') out.emplace_back();
  return out;
}

RunConfig heat(double T, const fs::path& out) {
  RunConfig c = parse_config_text("problem = heat\nscheme = s1\n");
  c.overrides.T = T;
  c.output_dir = out;
  return c;
}

}  // namespace

TEST_CASE("config text resolves to preset defaults", "[cli]") {
  const RunConfig c = parse_config_text("problem = pme_barenblatt\nscheme = s2\n");
  const ResolvedRun r = resolve(c);
  CHECK(r.problem.grid.cells == 80);
  CHECK(r.scheme.dt == 1e-3);
  CHECK(r.problem.T == 1.0);
  CHECK(r.scheme.kind == SchemeKind::S2);
  CHECK(r.scheme.newton.floor == r.problem.epsilon);
  CHECK(*r.scheme.splitting->C == Approx(*resolve(c).scheme.splitting->C));
}

TEST_CASE("invalid values are rejected", "[cli]") {
  CHECK_THROWS_AS(resolve(parse_config_text("problem = heat\ndt = -0.1\n")), ConfigError);
  CHECK_THROWS_AS(resolve(parse_config_text("problem = vortex\n")), ConfigError);
  CHECK_THROWS_AS(resolve(parse_config_text("problem = heat\nscheme = onsager\n")), ConfigError);
}

TEST_CASE("parse errors name the line", "[cli]") {
  try {
    parse_config_text("# header\nproblem = heat\nnewton.maxiter = 3\n");
    FAIL("expected an error");
  } catch (const ConfigError& e) {
    CHECK_THAT(e.what(), Catch::Matchers::ContainsSubstring("line 3"));
    CHECK_THAT(e.what(), Catch::Matchers::ContainsSubstring("newton.maxiter"));
  }
  CHECK_THROWS_AS(parse_config_text("M = twelve\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("M = 2.5\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("scheme = s3\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("dt 0.1\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("audit.expect_mass_increase = maybe\n"), ConfigError);
}

TEST_CASE("overrides win over the file", "[cli]") {
  const fs::path dir = scratch("override");
  fs::create_directories(dir);
  std::ofstream(dir / "a.cfg") << "problem = heat\ndt = 0.1   # coarse\n";
  const RunConfig c = parse_config(dir / "a.cfg", {"dt=0.05"});
  CHECK(resolve(c).scheme.dt == 0.05);
  CHECK(resolve(parse_config(dir / "a.cfg")).scheme.dt == 0.1);
  CHECK_THROWS_AS(parse_config(dir / "missing.cfg"), ConfigError);
  CHECK_THROWS_AS(parse_config(std::nullopt, {"dt"}), ConfigError);
}

TEST_CASE("every key is settable", "[cli]") {
  for (const auto& k : config_keys()) {
    CAPTURE(k);
    RunConfig c;
    const std::string v = k == "problem"                    ? "heat"
                          : k == "scheme"                   ? "s1"
                          : k == "potential"                ? "quadratic"
                          : k == "output.dir"               ? "x"
                          : k == "audit.expect_mass_increase" ? "true"
                          : k == "newton.theta_boundary" || k == "newton.backtrack_factor" ||
                                    k == "random_low"
                              ? "0.5"
                              : "2";
    CHECK_NOTHROW(apply_setting(c, k, v, "test"));
  }
}

TEST_CASE("audit checks can be switched off", "[cli]") {
  RunConfig c = parse_config_text("problem = heat\naudit.max_mass_drift = none\n");
  CHECK_FALSE(resolve(c).audit.max_mass_drift);
  CHECK(resolve(parse_config_text("problem = heat\n")).audit.max_mass_drift);
}

TEST_CASE("run writes trace, fields and report", "[cli]") {
  const fs::path out = scratch("run");
  RunConfig c = heat(1.0, out);
  c.snapshot_times = {0.5};
  CHECK(run(c) == kExitOk);

  const auto trace = lines(out / "trace.csv");
  REQUIRE(trace.size() == 1 + 11);  // header + steps 0..10
  CHECK(trace[0] == "step,time,mass,energy_original,energy_modified,min_rho,newton_iters,r,r_drift");
  const double m0 = std::stod(cells(trace[1])[2]);
  for (std::size_t i = 1; i < trace.size(); ++i) {
    const auto row = cells(trace[i]);
    REQUIRE(row.size() == 9);
    CHECK(std::stol(row[0]) == static_cast<long>(i - 1));
    CHECK(std::abs(std::stod(row[2]) - m0) <= 1e-10);
    CHECK(row[7].empty());  // S1 has no auxiliary variable
  }
  CHECK(fs::exists(out / "field_0.csv"));
  CHECK(fs::exists(out / "field_5.csv"));
  CHECK(fs::exists(out / "field_10.csv"));
  CHECK(lines(out / "field_10.csv").size() == 2001);
  CHECK(lines(out / "field_10.csv")[0] == "x,rho");

  const json rep = json::parse(slurp(out / "report.json"));
  std::vector<std::string> keys;
  for (const auto& [k, _] : rep.items()) keys.push_back(k);
  CHECK(keys == std::vector<std::string>{"schema", "problem", "scheme", "parameters", "status",
                                         "error", "steps_requested", "steps_completed",
                                         "final_time", "audit", "errors", "checkpoints"});
  CHECK(rep["schema"] == kReportSchema);
  CHECK(rep["status"] == "completed");
  CHECK(rep["steps_completed"] == 10);
  CHECK(rep["audit"]["passed"] == true);
  CHECK(rep["checkpoints"].size() == 2);
}

TEST_CASE("reruns are byte identical", "[cli]") {
  const fs::path a = scratch("rerun_a"), b = scratch("rerun_b");
  RunConfig c = parse_config_text("problem = pme_drift\nT = 0.004\n");
  c.output_dir = a;
  run(c);
  c.output_dir = b;
  run(c);
  for (const char* f : {"trace.csv", "field_0.csv", "field_4.csv", "report.json"}) {
    CAPTURE(f);
    CHECK(slurp(a / f) == slurp(b / f));
  }
}

TEST_CASE("trace thinning keeps the final row", "[cli]") {
  const fs::path out = scratch("thin");
  RunConfig c = heat(0.7, out);
  c.trace_every = 3;
  run(c);
  const auto t = lines(out / "trace.csv");
  REQUIRE(t.size() == 1 + 4);  // steps 0, 3, 6, 7
  CHECK(cells(t.back())[0] == "7");
}

TEST_CASE("heat S1 error at dt = 0.1", "[cli][slow]") {
  const SimulationResult r = simulate(resolve(parse_config_text("problem = heat\nscheme = s1\n")));
  REQUIRE(r.completed());
  CHECK(*r.e_inf == Approx(8.1540e-3).epsilon(0.02));
  CHECK(r.passed());
}

TEST_CASE("single-step study has no order", "[cli]") {
  const fs::path out = scratch("study");
  RunConfig c = heat(0.5, out);
  c.dt_list = {0.1};
  const StudyResult s = convergence_study(c);
  write_study_outputs(out, s);
  REQUIRE(s.rows.size() == 1);
  CHECK_FALSE(s.rows[0].order_inf);
  const auto t = lines(out / "study.csv");
  REQUIRE(t.size() == 2);
  CHECK(t[0] == "dt,e_inf,order_inf,e_l2,order_l2");
  CHECK(cells(t[1])[2].empty());
  CHECK(cells(t[1])[4].empty());

  c.problem = "fokker_planck";
  CHECK_THROWS_AS(convergence_study(c), ConfigError);
}

TEST_CASE("failed runs keep partial outputs", "[cli]") {
  const fs::path out = scratch("failed");
  RunConfig c = parse_config_text("problem = pme_barenblatt\nT = 0.01\nnewton.max_iter = 2\n");
  c.output_dir = out;
  CHECK(run(c) == kExitRunFailed);
  CHECK(lines(out / "trace.csv").size() == 2);
  CHECK(fs::exists(out / "field_0.csv"));
  const json rep = json::parse(slurp(out / "report.json"));
  CHECK(rep["status"] == "failed");
  CHECK(rep["error"].is_string());
  CHECK(rep["steps_completed"] == 0);
}

TEST_CASE("strict mode reports audit failures", "[cli]") {
  RunConfig c = heat(0.2, scratch("strict"));
  apply_override(c, "audit.min_rho=5");
  CHECK(run(c, false) == kExitOk);
  CHECK(run(c, true) == kExitAuditFailed);
}

TEST_CASE("suite rejects unknown names before running", "[cli]") {
  CHECK_THROWS_AS(suite({"heat_s1", "heat_s9"}), std::invalid_argument);
  CHECK_THROWS_AS(suite({}), std::invalid_argument);
  CHECK(suite_names().size() == 14);
  CHECK(suite_config("pme_drift_m50").overrides.m == 50.0);
  CHECK(suite_config("heat_s2_bdf2").dt_list.size() == 3);
}

TEST_CASE("S2-BDF2 on heat needs an implicit-heavy split", "[cli]") {
  RunConfig c = parse_config_text("problem = heat\nscheme = s2_bdf2\ndt = 0.025\n");
  const double even = *simulate(resolve(c)).e_inf;
  apply_override(c, "entropy_split=0.015");
  const double third = *simulate(resolve(c)).e_inf;
  CHECK(even > 1.0);  // blown up
  CHECK(third < 1e-4);
  CHECK(suite_config("heat_s2_bdf2").overrides.entropy_split == 0.015);
  CHECK_FALSE(suite_config("heat_s2").overrides.entropy_split);
}
