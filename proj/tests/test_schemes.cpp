#include <catch_amalgamated.hpp>

#include "checks.hpp"
#include "wgf/schemes.hpp"

using namespace wgf;
using Catch::Approx;

namespace {
const std::vector<SchemeKind> all_kinds{SchemeKind::S1, SchemeKind::S1_BDF2, SchemeKind::S2,
                                        SchemeKind::S2_BDF2, SchemeKind::Onsager};
}

TEST_CASE("positivity-preserving extrapolation", "[schemes]") {
  CHECK(extrapolate_positive(2.0, 1.0) == 3.0);
  CHECK(extrapolate_positive(1.0, 2.0) == Approx(2.0 / 3.0));
  CHECK(extrapolate_positive(0.7, 0.7) == Approx(0.7));
  CHECK_THROWS_AS(extrapolate_positive(0.0, 1.0), std::domain_error);
  std::mt19937_64 rng(1);
  for (int i = 0; i < 1000; ++i)
    CHECK(extrapolate_positive(checks::uniform(rng, 1e-8, 10), checks::uniform(rng, 1e-8, 10)) > 0);
}

TEST_CASE("scheme names round-trip", "[schemes]") {
  for (SchemeKind k : all_kinds) CHECK(parse_scheme(to_string(k)) == k);
  CHECK_THROWS_AS(parse_scheme("s3"), std::invalid_argument);
}

TEST_CASE("two-cell heat step solves the reduced scalar equation", "[schemes]") {
  // ρ₁ − 1 = 2 log((4 − ρ₁)/ρ₁), ρ₂ = 4 − ρ₁, solved by plain bisection.
  double lo = 1.0, hi = 2.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (mid - 1.0 - 2.0 * std::log((4.0 - mid) / mid) > 0 ? hi : lo) = mid;
  }
  const Grid g = build_grid(1, 2, 2.0);
  SchemeConfig cfg;
  cfg.dt = 1.0;
  TimeState st;
  st.rho = Field(g, {1.0, 3.0});
  const StepResult res = step_s1(st, cfg, {{Entropy{1.0}}});
  CHECK(res.state.rho[0] == Approx(lo).margin(1e-12));
  CHECK(res.state.rho[1] == Approx(4.0 - lo).margin(1e-12));
  CHECK(res.report.mass == Approx(4.0));
}

TEST_CASE("every stepper matches the brute-force oracle", "[schemes][oracle]") {
  std::mt19937_64 rng(2024);
  for (SchemeKind k : all_kinds)
    for (int cells : {2, 3}) {
      double worst = 0.0;
      for (int t = 0; t < 20; ++t) worst = std::max(worst, checks::oracle_gap(checks::make_case(k, cells, rng)));
      INFO(to_string(k) << " on " << cells << " cells: worst gap " << worst);
      CHECK(worst <= 1e-9);
    }
}

TEST_CASE("constant states are fixed points", "[schemes]") {
  const Grid g = build_grid(2, 6, 1.0);
  const Field c(g, 0.8);
  SchemeConfig cfg;
  cfg.dt = 0.1;
  const EnergyModel pme{{PowerLaw{1.0, 3.0}}};

  SECTION("first approach and its BDF2 variant") {
    for (SchemeKind k : {SchemeKind::S1, SchemeKind::S1_BDF2}) {
      cfg.kind = k;
      TimeState st = init_state(c, cfg);
      st.rho_prev = c;
      const StepResult r = advance(st, cfg, pme);
      for (double v : r.state.rho.values) CHECK(v == Approx(0.8).margin(1e-14));
      CHECK(r.report.newton_iterations <= 1);
    }
  }
  SECTION("SAV schemes keep r") {
    for (SchemeKind k : {SchemeKind::S2, SchemeKind::S2_BDF2}) {
      cfg.kind = k;
      cfg.splitting = make_splitting({{Entropy{1.0}}}, 1.0);
      TimeState st = init_state(c, cfg);
      CHECK(*st.r == Approx(1.0));
      st.rho_prev = c;
      st.r_prev = st.r;
      const StepResult r = advance(st, cfg, {{Entropy{1.0}}});
      for (double v : r.state.rho.values) CHECK(v == Approx(0.8).margin(1e-14));
      CHECK(*r.state.r == Approx(*st.r).margin(1e-14));
    }
  }
  SECTION("Fisher-KPP rests at one") {
    cfg.kind = SchemeKind::Onsager;
    cfg.splitting = make_splitting({{Entropy{2.0}}}, 5.0);
    cfg.mobilities = fisher_kpp_mobilities(1e-4);
    TimeState st = init_state(Field(g, 1.0), cfg);
    const StepResult r = advance(st, cfg, {{Entropy{2.0}}});
    for (double v : r.state.rho.values) CHECK(v == Approx(1.0).margin(1e-14));
  }
}

TEST_CASE("Onsager with V2 = 0 and V1 = rho reduces to S2", "[schemes]") {
  std::mt19937_64 rng(4);
  const Grid g = build_grid(2, 5, 1.0);
  const Field v = checks::random_field(g, rng, 0.0, 1.0);
  const EnergyModel model{{PowerLaw{1.0, 2.0}, Potential{v}}};
  SchemeConfig s2;
  s2.kind = SchemeKind::S2;
  s2.dt = 0.01;
  s2.splitting = make_splitting(model, 2.0);
  SchemeConfig on = s2;
  on.kind = SchemeKind::Onsager;
  on.mobilities = Mobilities{[](double r) { return r; }, [](double) { return 0.0; }};
  const Field rho = checks::random_field(g, rng, 0.2, 1.5);
  const TimeState a = init_state(rho, s2), b = init_state(rho, on);
  const StepResult ra = advance(a, s2, model), rb = advance(b, on, model);
  for (std::size_t i = 0; i < rho.size(); ++i)
    CHECK(ra.state.rho[i] == Approx(rb.state.rho[i]).margin(1e-12));
  CHECK(*ra.state.r == Approx(*rb.state.r).margin(1e-12));
}

TEST_CASE("conserving schemes keep mass and dissipate", "[schemes]") {
  std::mt19937_64 rng(6);
  const Grid g = build_grid(2, 10, 2.0, {-1.0, -1.0});
  const Field v = checks::random_field(g, rng, 0.0, 1.0);
  const EnergyModel model{{PowerLaw{1.0, 3.0}}};
  for (SchemeKind k : {SchemeKind::S1, SchemeKind::S1_BDF2, SchemeKind::S2, SchemeKind::S2_BDF2}) {
    SchemeConfig cfg;
    cfg.kind = k;
    cfg.dt = 0.01;
    if (is_sav(k)) cfg.splitting = make_splitting(model, 0.0);
    TimeState st = init_state(checks::random_field(g, rng, 0.1, 1.0), cfg);
    const double m0 = integrate(st.rho);
    std::optional<double> prev_energy;
    for (int n = 0; n < 10; ++n) {
      const StepResult r = advance(st, cfg, model);
      CHECK(std::abs(r.report.mass - m0) <= 1e-10 * g.domain_measure());
      CHECK(r.report.min_rho >= cfg.epsilon_floor);
      if (!is_second_order(k)) {
        REQUIRE(r.report.energy_modified);
        if (prev_energy) CHECK(*r.report.energy_modified <= *prev_energy + 1e-8 * std::abs(*prev_energy));
        prev_energy = r.report.energy_modified;
      }
      st = r.state;
    }
  }
}

TEST_CASE("step Jacobians match finite differences", "[schemes][jacobian]") {
  for (SchemeKind k : all_kinds) {
    const double gap = checks::jacobian_gap(k, 5, 77);
    INFO(to_string(k) << ": " << gap);
    CHECK(gap <= 1e-6);
  }
}

TEST_CASE("configuration and state errors", "[schemes]") {
  const Grid g = build_grid(1, 4, 1.0);
  SchemeConfig cfg;
  cfg.kind = SchemeKind::S2;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);  // no splitting
  cfg.kind = SchemeKind::Onsager;
  cfg.splitting = make_splitting({{Entropy{2.0}}}, 5.0);
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);  // no mobilities
  cfg.dt = -1.0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);

  SchemeConfig s2;
  s2.kind = SchemeKind::S2;
  s2.splitting = make_splitting({{PowerLaw{1.0, 2.0}}}, -100.0);
  CHECK_THROWS_AS(init_state(Field(g, 1.0), s2), std::invalid_argument);  // E1 + C ≤ 0

  SchemeConfig b2;
  b2.kind = SchemeKind::S1_BDF2;
  TimeState st = init_state(Field(g, 1.0), b2);
  CHECK_THROWS_AS(step_s1_bdf2(st, b2, {{Entropy{1.0}}}), std::invalid_argument);

  SchemeConfig on;
  on.kind = SchemeKind::Onsager;
  on.splitting = make_splitting({{Entropy{2.0}}}, 5.0);
  on.mobilities = Mobilities{[](double) { return -1.0; }, [](double) { return 1.0; }};
  TimeState so = init_state(Field(g, 1.0), on);
  CHECK_THROWS_AS(step_onsager(so, on), std::domain_error);
}

TEST_CASE("initial floor and auxiliary variable", "[schemes]") {
  const Grid g = build_grid(1, 4, 1.0);
  SchemeConfig cfg;
  cfg.kind = SchemeKind::S2;
  cfg.splitting = make_splitting({{Entropy{1.0}}});
  const TimeState st = init_state(Field(g, {0.0, 1.0, 2.0, -3.0}), cfg);
  CHECK(st.rho[0] == cfg.epsilon_floor);
  CHECK(st.rho[3] == cfg.epsilon_floor);
  REQUIRE(cfg.splitting->C);
  CHECK(*cfg.splitting->C == 1.0);  // E1 ≡ 0 here
  CHECK(*st.r == Approx(1.0));
}
