#include "catch_amalgamated.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <limits>

#include "qotto/io/config.hpp"
#include "qotto/io/svg.hpp"
#include "qotto/io/tables.hpp"

using namespace qotto;
using Catch::Approx;
using Catch::Matchers::ContainsSubstring;

namespace {

std::size_t count(const std::string& text, const std::string& what) {
  std::size_t n = 0;
  for (auto pos = text.find(what); pos != std::string::npos; pos = text.find(what, pos + 1)) ++n;
  return n;
}

ErrorKind kind_of(const std::string& text) {
  try {
    io::parse_manifest(text, "test.json");
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an error");
  return ErrorKind::io;
}

}  // namespace

TEST_CASE("empty configuration gives the defaults") {
  for (const char* text : {"", "  \n", "{}"}) {
    const auto m = io::parse_manifest(text);
    CHECK(m.config == default_cycle_config());
    CHECK(m.config.b1.milligauss() == 346.5);
    CHECK(m.config.b2.milligauss() == 31.6);
    CHECK(m.config.ramp_time == 20.0);
    CHECK(m.config.epsilon == 0.01);
    CHECK(m.tau_heating == 58.0);
    CHECK(m.levels_compared == std::vector<int>{2, 3, 4, 5, 6, 7});
  }
}

TEST_CASE("configuration overrides") {
  const auto m = io::parse_manifest(R"({"B2_mG": 34.65})");
  CHECK(otto_efficiency(m.config.b1, m.config.b2) == Approx(0.90).epsilon(1e-15));

  const auto rates = io::parse_manifest(R"({"heating_rates_per_ms": [0.1, 0.2, 0.3], "cooling_rates_per_ms": 0.05})");
  CHECK(rates.config.levels == 4);
  CHECK(rates.config.heating.rates() == std::vector<double>{0.1, 0.2, 0.3});
  CHECK(rates.config.cooling.rates() == std::vector<double>{0.05, 0.05, 0.05});

  const auto preset = io::parse_manifest(R"({"rate_preset": "reduced_final", "reduced_final_fraction": 0.25})");
  const double base = default_cycle_config().heating.max_rate();
  CHECK(preset.config.heating.rates().back() == base * 0.25);
  CHECK(preset.config.heating.rates().front() == base);
  CHECK(preset.config.cooling == default_cycle_config().cooling);

  const auto misc = io::parse_manifest(R"({"step_ms": 0.1, "cycle_start": "ground_state", "tau_H_ms": 12,
      "sweep_max_ms": 30, "sweep_step_ms": 5, "level_time_mapping": "heating_only", "levels_compared": [3, 7],
      "fit_field": "B2"})");
  CHECK(misc.config.integration_step() == 0.1);
  CHECK(misc.config.start == CycleStart::ground_state);
  CHECK(misc.tau_heating == 12.0);
  CHECK(misc.sweep_grid() == std::vector<double>{0, 5, 10, 15, 20, 25, 30});
  CHECK(misc.level_time_mapping == TimeMapping::heating_only);
  CHECK(misc.levels_compared == std::vector<int>{3, 7});
  CHECK(misc.fit_field == io::FitField::cold);

  const auto small = io::parse_manifest(R"({"levels": 4})");
  CHECK(small.config.levels == 4);
  CHECK(heating_entropy_peak(small.config).time == Approx(58.0).margin(1e-3));
}

TEST_CASE("configuration errors carry the key and line") {
  try {
    io::parse_manifest("{\n  \"B1_mG\": 300,\n  \"heating_rates_per_ms\": -0.1\n}", "run.json");
    FAIL("no error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::validation);
    CHECK_THAT(e.what(), ContainsSubstring("heating_rates_per_ms") && ContainsSubstring("run.json:3"));
  }
  try {
    io::parse_manifest("{\n  \"B1_mG\": 300,\n  \"B1_mg\": 3\n}", "run.json");
    FAIL("no error");
  } catch (const Error& e) {
    CHECK_THAT(e.what(), ContainsSubstring("unknown key") && ContainsSubstring("B1_mg"));
  }
  try {
    io::parse_manifest("{\n  \"B1_mG\": 300,\n  \"B2_mG\" 3\n}", "run.json");
    FAIL("no error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::parse);
    CHECK_THAT(e.what(), ContainsSubstring("run.json:3"));
  }
  CHECK(kind_of("[1, 2]") == ErrorKind::parse);
  CHECK(kind_of(R"({"B2_mG": 400})") == ErrorKind::validation);
  CHECK(kind_of(R"({"epsilon": 0.5})") == ErrorKind::validation);
  CHECK(kind_of(R"({"levels": 9})") == ErrorKind::validation);
  CHECK(kind_of(R"({"levels": 3.5})") == ErrorKind::validation);
  CHECK(kind_of(R"({"levels": 4, "heating_rates_per_ms": [0.1, 0.1]})") == ErrorKind::validation);
  CHECK(kind_of(R"({"rate_preset": "fancy"})") == ErrorKind::validation);
  CHECK(kind_of(R"({"levels_compared": [2, 8]})") == ErrorKind::validation);
  CHECK(kind_of(R"({"B1_mG": "high"})") == ErrorKind::validation);
  CHECK_THROWS_AS(io::load_manifest("/nonexistent/run.json"), Error);
}

TEST_CASE("configuration round trip") {
  auto cfg = CycleConfig(RateProfile(Direction::heating, {0.1, 0.07, 1.0 / 3.0}),
                         RateProfile(Direction::cooling, {0.2, 0.3, 0.1}));
  cfg.b1 = MagneticField(350.125);
  cfg.b2 = MagneticField(1.0 / 7.0);
  cfg.epsilon = 0.003;
  cfg.step = 0.0123;
  cfg.ramp_time = 0.0;
  cfg.start = CycleStart::ground_state;
  cfg.horizon_factor = 77.0;
  CHECK(io::parse_manifest(io::serialize_config(cfg)).config == cfg);
  CHECK(io::parse_manifest(io::serialize_config(default_cycle_config())).config == default_cycle_config());
}

TEST_CASE("sweep table schema") {
  const auto idle = run_cycle(default_cycle_config(), 0.0);
  const auto csv = io::to_csv(io::sweep_table({idle}));
  const auto header = csv.substr(0, csv.find('\n'));
  CHECK(header ==
        "tau_H_ms,tau_C_ms,tau_cycle_ms,S_B_kB,Q_H_nK,Q_C_nK,W_nK,P_nK_per_ms,collisions_total,efficiency");
  CHECK(csv.substr(csv.find('\n') + 1) == "0,0,40,0,0,0,0,0,0,0\n");

  const auto json = nlohmann::json::parse(io::to_json(io::sweep_table({idle})));
  REQUIRE(json.size() == 1);
  CHECK(json[0]["P_nK_per_ms"] == 0);
  CHECK(json[0]["W_nK"] == 0);
  CHECK(json[0].size() == io::sweep_columns().size());
}

TEST_CASE("trajectory table schema") {
  const auto stroke = run_heating(default_cycle_config(), 2.0);
  const auto t = io::trajectory_table(stroke.trajectory, default_cycle_config().hot_ladder());
  const auto csv = io::to_csv(t);
  CHECK(csv.substr(0, csv.find('\n')) == "t_ms,p0,p1,p2,p3,p4,p5,p6,S_kB,Q_cum_nK");
  CHECK(t.rows.size() == stroke.trajectory.size());
  CHECK(std::get<double>(t.rows.back().back()) == Approx(stroke.heat).epsilon(1e-12));
}

TEST_CASE("number formatting") {
  io::Table t{{"x", "label"}, {}};
  t.add_row({1.0 / 3.0, std::string("a\"b")});
  t.add_row({std::numeric_limits<double>::infinity(), std::string("c")});
  t.add_row({-0.0, std::string("d")});
  CHECK(io::to_csv(t) == "x,label\n0.333333333,a\"b\ninf,c\n0,d\n");
  CHECK(io::to_json(t) == "[\n  {\"x\": 0.333333333, \"label\": \"a\\\"b\"},\n  {\"x\": null, \"label\": \"c\"},\n"
                          "  {\"x\": 0, \"label\": \"d\"}\n]\n");
  CHECK(io::to_json(io::Table{{"x"}, {}}) == "[]\n");
  CHECK_THROWS_AS(t.add_row({1.0}), Error);
}

TEST_CASE("fit trace table") {
  const auto ladder = zeeman_ladder(MagneticField(346.5), 7);
  const std::vector<TemperatureFit> fits{fit_dual_boltzmann(SpinDistribution::uniform(7), ladder)};
  const auto csv = io::to_csv(io::fit_trace_table({5.0}, fits));
  CHECK(csv.substr(0, csv.find('\n')) ==
        "t_ms,a,delta_a,beta_plus_per_nK,beta_minus_per_nK,T_plus_nK,T_minus_nK,residual,regime");
  CHECK_THAT(csv, ContainsSubstring(",transition\n"));
}

TEST_CASE("identical inputs give identical bytes") {
  const auto m = io::parse_manifest(R"({"sweep_max_ms": 60, "sweep_step_ms": 3})");
  const auto first = io::to_csv(io::sweep_table(sweep_heating_time(m.config, m.sweep_grid()).records));
  const auto second = io::to_csv(io::sweep_table(sweep_heating_time(m.config, m.sweep_grid()).records));
  CHECK(first == second);
}

TEST_CASE("population CSV") {
  const auto s = io::parse_population_csv("t_ms,p0,p1,p2\n0, 1, 0, 0\n1.5,0.2,0.3,0.5\n\n2,1,1,2\n");
  REQUIRE(s.times.size() == 3);
  CHECK(s.times[1] == 1.5);
  CHECK(s.states[2][2] == 0.5);

  CHECK_THROWS_AS(io::parse_population_csv(""), Error);
  CHECK_THROWS_AS(io::parse_population_csv("t,p0,p1\n0,1,0\n"), Error);
  CHECK_THROWS_AS(io::parse_population_csv("t_ms,p0,p2\n0,1,0\n"), Error);
  CHECK_THROWS_AS(io::parse_population_csv("t_ms,p0,p1\n0,1\n"), Error);
  CHECK_THROWS_AS(io::parse_population_csv("t_ms,p0,p1\n0,1,x\n"), Error);
  CHECK_THROWS_AS(io::parse_population_csv("t_ms,p0,p1\n0,1,-0.5\n"), Error);
  CHECK_THROWS_AS(io::parse_population_csv("t_ms,p0,p1\n"), Error);
}

TEST_CASE("synthetic population file round-trips through the fitter") {
  const auto ladder = zeeman_ladder(MagneticField(346.5), 7);
  const std::vector<double> betas{1.0 / 3000.0, 1.0 / 9000.0, -1.0 / 9000.0, -1.0 / 3000.0};
  io::Table t{{"t_ms", "p0", "p1", "p2", "p3", "p4", "p5", "p6"}, {}};
  for (std::size_t i = 0; i < betas.size(); ++i) {
    std::vector<io::Cell> row{static_cast<double>(i)};
    const auto p = boltzmann_distribution(betas[i], ladder);
    for (double v : p.values()) row.emplace_back(v);
    t.add_row(std::move(row));
  }
  const auto data = io::parse_population_csv(io::to_csv(t));
  for (std::size_t i = 0; i < betas.size(); ++i) {
    const auto fit = fit_dual_boltzmann(data.states[i], ladder);
    const double recovered = betas[i] > 0 ? fit.beta_plus : fit.beta_minus;
    // 9 significant digits in the file bound the recovery.
    CHECK(recovered == Approx(betas[i]).epsilon(1e-5));
    CHECK(fit.regime == (betas[i] > 0 ? Regime::positive : Regime::negative));
  }
}

TEST_CASE("SVG output") {
  CHECK_THROWS_AS(io::render_svg(io::PlotSpec{}), Error);

  io::PlotSpec single{"one", "t (ms)", "S (k_B)", {{"", {{1.0, 2.0}}}}, {}, {}, ""};
  const auto one = io::render_svg(single);
  CHECK(count(one, "<circle class=\"series\"") == 1);
  CHECK_THAT(one, ContainsSubstring("t (ms)") && ContainsSubstring("S (k_B)"));

  LevelCurve two{2, {{0, 0, 0, 40, 0.1, 1, -1, 0, 1.0}, {10, 10, 5, 55, 0.5, 2, -1, -1, 2.0}}};
  LevelCurve seven{7, {{0, 0, 0, 40, 0.1, 1, -1, 0, 1.5}, {10, 10, 5, 55, 1.5, 2, -1, -1, 3.0}}};
  const auto cmp = io::render_svg(io::n_level_comparison_plot({two, seven}));
  CHECK(count(cmp, "<polyline class=\"series\"") == 2);
  CHECK_THAT(cmp, ContainsSubstring(">N = 2<") && ContainsSubstring(">N = 7<"));
  CHECK_THAT(cmp, ContainsSubstring("P (nK/ms)"));
}

TEST_CASE("power curve marker sits in the negative-temperature shading") {
  const auto& cfg = default_cycle_config();
  std::vector<double> grid;
  for (int t = 0; t <= 354; t += 6) grid.push_back(t);
  const auto sweep = sweep_heating_time(cfg, grid);
  std::vector<Regime> regimes;
  for (const auto& r : sweep.records) {
    regimes.push_back(dominant_regime(fit_dual_boltzmann(r.heating().end(), cfg.hot_ladder())));
  }
  const auto spec = io::power_vs_entropy_plot(sweep, regimes);
  REQUIRE(spec.marker);

  const auto best = sweep.argmax_power();
  CHECK(regimes[best] == Regime::negative);
  // The marker is a vertex of a negative shade.
  bool inside = false;
  for (const auto& sh : spec.shades) {
    if (sh.regime != Regime::negative) continue;
    for (const auto& pt : sh.outline) inside = inside || pt == *spec.marker;
  }
  CHECK(inside);

  const auto svg = io::render_svg(spec);
  CHECK(count(svg, "class=\"marker\"") == 1);
  CHECK(count(svg, "regime-negative") >= 1);
  CHECK(count(svg, "regime-positive") >= 1);
}
