// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "../oracles.hpp"
#include "qotto/cycle_engine.hpp"
#include "qotto/io/config.hpp"
#include "qotto/io/tables.hpp"
#include "qotto/level_study.hpp"
#include "qotto/temp_fit.hpp"

using namespace qotto;

namespace tol {
constexpr double oracle_population = 1e-8;
constexpr double normalization = 1e-9;
constexpr double negativity = -1e-12;
constexpr double lambda_ref = 16.7928;
constexpr double lambda = 5e-4;
constexpr double efficiency = 1e-3;
constexpr double peak_time = 1.0;
constexpr double peak_entropy_lo = 1.70;
const double peak_entropy_hi = std::log(7.0);
constexpr double boost_lo = 0.15, boost_hi = 0.45;
constexpr double entropy_ratio_lo = 0.4, entropy_ratio_hi = 0.6;
constexpr double collisions_lo = 10.0, collisions_hi = 12.0;
constexpr double power_lo = 15.0, power_hi = 45.0;
constexpr double full_work = 31728.0, full_work_tol = 1.0;
constexpr double flip_lo = 58.0, flip_hi = 62.0;
constexpr double beta_relative = 1e-3;
constexpr double weight_hi = 0.99, weight_lo = 0.01;
constexpr double truncation = 1e-12;
}  // namespace tol

namespace {

int failures = 0;

void report(int id, const std::string& name, bool ok, const std::string& detail) {
  std::printf("%s criterion %d: %s (%s)\n", ok ? "PASS" : "FAIL", id, name.c_str(), detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

void guarded(int id, const std::string& name, const std::function<void()>& body) {
  try {
    body();
  } catch (const std::exception& e) {
    report(id, name, false, std::string("exception: ") + e.what());
  }
}

const CycleConfig& calibrated() { return default_cycle_config(); }

const SweepResult& calibrated_sweep() {
  static const auto sweep = sweep_heating_time(calibrated(), default_sweep_grid(calibrated()), {true, 0});
  return sweep;
}

}  // namespace

int main() {
  guarded(1, "integrator matches the truncated-Poisson oracle", [] {
    const double rate = 0.052;
    const auto gen = build_generator(RateProfile::uniform(Direction::heating, 7, rate), 7);
    const auto traj = evolve(SpinDistribution::ground(7), gen, 120.0);
    double worst = 0.0;
    for (std::size_t i = 0; i < traj.size(); ++i) {
      const auto ref = oracle::poisson_chain(rate, traj.times[i], 7);
      for (std::size_t n = 0; n < 7; ++n) worst = std::max(worst, std::abs(traj.states[i][n] - ref[n]));
    }
    report(1, "integrator matches the truncated-Poisson oracle", worst <= tol::oracle_population,
           fmt("max abs error %.3g over %g samples, limit %.0e", worst, static_cast<double>(traj.size()),
               tol::oracle_population));
  });

  guarded(2, "normalization and positivity along every trajectory", [] {
    auto preset = calibrated();
    preset.heating = RateProfile::reduced_final(7, calibrated().heating.max_rate());
    const auto preset_sweep = sweep_heating_time(preset, default_sweep_grid(preset, 5.0), {true, 0});
    double worst_sum = 0.0, lowest = 0.0;
    std::size_t count = 0;
    for (const auto* sweep : {&calibrated_sweep(), &preset_sweep}) {
      for (const auto& rec : sweep->records) {
        for (const auto& stroke : rec.strokes) {
          lowest = std::min(lowest, stroke.trajectory.min_raw_population);
          for (const auto& p : stroke.trajectory.states) {
            double s = 0.0;
            for (double v : p.values()) {
              s += v;
              lowest = std::min(lowest, v);
            }
            worst_sum = std::max(worst_sum, std::abs(s - 1.0));
            ++count;
          }
        }
      }
    }
    report(2, "normalization and positivity along every trajectory",
           worst_sum <= tol::normalization && lowest >= tol::negativity,
           fmt("%g states, max |sum-1| %.3g, min raw p %.3g", static_cast<double>(count), worst_sum, lowest));
  });

  guarded(3, "constants and Otto identities", [] {
    const double mu_b = 9.2740100783e-24, k_b = 1.380649e-23;
    const double lambda_codata = 0.25 * mu_b / k_b * 1e-7 * 1e9;  // nK per mG
    const bool lambda_ok = std::abs(constants::lambda - tol::lambda_ref) <= tol::lambda &&
                           std::abs(lambda_codata - tol::lambda_ref) <= tol::lambda;
    const double eta = 1.0 - 31.6 / 346.5;
    const double residual_bound = 6.0 * constants::lambda * 346.5 * calibrated().epsilon;
    double worst_eta = 0.0, worst_residual = 0.0;
    std::size_t closed = 0;
    for (const auto& rec : calibrated_sweep().records) {
      worst_residual = std::max(worst_residual, std::abs(rec.first_law_residual()));
      if (rec.heat_hot <= 0.0) continue;  // idle cycle, no heat to convert
      ++closed;
      worst_eta = std::max(worst_eta, std::abs(rec.efficiency() - eta));
    }
    report(3, "constants and Otto identities",
           lambda_ok && worst_eta <= tol::efficiency && worst_residual <= residual_bound,
           fmt("lambda %.4f (CODATA %.6f); max |eff - 0.9088| %.3g over %g cycles", constants::lambda,
               lambda_codata, worst_eta, static_cast<double>(closed)) +
               fmt("; max first-law residual %.3g nK <= %.4g", worst_residual, residual_bound));
  });

  guarded(4, "entropy anchor at 58 ms", [] {
    const double rate = calibrate_uniform_rate(CycleConfig::uniform(0.05), 58.0);
    const auto peak = heating_entropy_peak(CycleConfig::uniform(rate));
    const bool ok = std::abs(peak.time - 58.0) <= tol::peak_time && peak.entropy >= tol::peak_entropy_lo &&
                    peak.entropy <= tol::peak_entropy_hi;
    report(4, "entropy anchor at 58 ms", ok,
           fmt("rate %.6f /ms, peak at %.4f ms, S_max %.4f k_B in [1.70, %.4f]", rate, peak.time, peak.entropy,
               tol::peak_entropy_hi));
  });

  guarded(5, "negative-temperature power boost", [] {
    const auto& sweep = calibrated_sweep();
    const auto ip = sweep.argmax_power(), is = sweep.argmax_entropy();
    const double boost = sweep.curve[ip].second / sweep.curve[is].second - 1.0;
    const double ratio = sweep.curve[ip].first / sweep.curve[is].first;
    const double collisions = sweep.records[ip].collisions_total;
    const bool ok = boost >= tol::boost_lo && boost <= tol::boost_hi && ratio >= tol::entropy_ratio_lo &&
                    ratio <= tol::entropy_ratio_hi && collisions >= tol::collisions_lo &&
                    collisions <= tol::collisions_hi;
    report(5, "negative-temperature power boost", ok,
           fmt("P_max/P(S_max) - 1 = %.4f; S_B ratio %.4f; collisions at optimum %.3f; tau_H* = %g ms", boost,
               ratio, collisions, sweep.records[ip].tau_heating));
  });

  guarded(6, "power magnitude and full-stroke work", [] {
    const auto& sweep = calibrated_sweep();
    const double p_max = sweep.curve[sweep.argmax_power()].second;
    const auto& cfg = calibrated();
    const double full = detail::ramp_stroke(StrokeKind::expansion, SpinDistribution::delta(7, 6), cfg.ramp_time,
                                            cfg.b1, cfg.b2)
                            .work +
                        detail::ramp_stroke(StrokeKind::compression, SpinDistribution::ground(7), cfg.ramp_time,
                                            cfg.b2, cfg.b1)
                            .work;
    const bool ok = p_max >= tol::power_lo && p_max <= tol::power_hi &&
                    std::abs(std::abs(full) - tol::full_work) <= tol::full_work_tol;
    report(6, "power magnitude and full-stroke work", ok,
           fmt("P_max %.3f nK/ms in [15, 45]; full-stroke |W| %.2f nK", p_max, std::abs(full)));
  });

  guarded(7, "regime flip window and cooling entropy shape", [] {
    const auto& cfg = calibrated();
    const auto traj = run_heating(cfg, 120.0).trajectory;
    const auto fits = temperature_trace(traj, cfg.hot_ladder());
    // First Negative sample, and whether the sequence runs Positive -> Transition -> Negative.
    double flip = NAN;
    bool saw_transition = false, ordered = fits.front().regime == Regime::positive;
    for (std::size_t i = 0; i < fits.size(); ++i) {
      if (fits[i].regime == Regime::transition) saw_transition = true;
      if (fits[i].regime == Regime::negative) {
        flip = traj.times[i];
        break;
      }
      if (fits[i].regime == Regime::positive && saw_transition) ordered = false;
    }
    const bool window = std::isfinite(flip) && flip >= tol::flip_lo && flip <= tol::flip_hi;

    const auto early = run_cycle(cfg, 20.0).cooling().entropy;
    const auto late = run_cycle(cfg, 300.0).cooling().entropy;
    bool monotone = true;
    for (std::size_t i = 1; i < early.size(); ++i) monotone = monotone && early[i] <= early[i - 1] + 1e-12;
    // Double peak: the heating-stroke peak already passed, and the cooling trace climbs
    // to a second, interior maximum.
    const auto top = std::max_element(late.begin(), late.end());
    const bool double_peak = top != late.begin() && top + 1 != late.end() && *top > late.front() &&
                             *top > late.back();

    report(7, "regime flip window and cooling entropy shape", window && ordered && saw_transition && monotone &&
                                                                   double_peak,
           fmt("first Negative at %.3f ms (window [58, 62]), Transition before it %g, ordered %g; ", flip,
               saw_transition ? 1.0 : 0.0, ordered ? 1.0 : 0.0) +
               fmt("cooling S single-peaked at 20 ms %g, double-peaked at 300 ms %g", monotone ? 1.0 : 0.0,
                   double_peak ? 1.0 : 0.0));
  });

  guarded(8, "fit round trip", [] {
    const auto ladder = zeeman_ladder(MagneticField(346.5), 7);
    double worst = 0.0;
    bool sides = true;
    for (int i = 0; i < 20; ++i) {
      // |beta| log-spaced from 1/20000 to 1/300 per nK.
      const double b = std::exp(std::log(1.0 / 20000.0) + i * (std::log(20000.0 / 300.0) / 19.0));
      for (double beta : {b, -b}) {
        const auto fit = fit_dual_boltzmann(boltzmann_distribution(beta, ladder), ladder);
        const double got = beta > 0 ? fit.beta_plus : fit.beta_minus;
        worst = std::max(worst, std::abs(got - beta) / std::abs(beta));
        sides = sides && (beta > 0 ? fit.a >= tol::weight_hi : fit.a <= tol::weight_lo);
      }
    }
    const auto uniform = fit_dual_boltzmann(SpinDistribution::uniform(7), ladder);
    report(8, "fit round trip",
           worst <= tol::beta_relative && sides && uniform.regime == Regime::transition,
           fmt("40 distributions, max relative beta error %.3g, weights on the correct side %g, uniform -> ",
               worst, sides ? 1.0 : 0.0) +
               std::string(to_string(uniform.regime)));
  });

  guarded(9, "N-level study", [] {
    const auto& ref = calibrated();
    const auto grid = default_sweep_grid(ref);
    LevelStudyOptions opt;
    opt.grid = grid;
    const auto curves = compare_n_levels(ref, {2, 3, 4, 5, 6, 7}, opt);
    const auto& sweep = calibrated_sweep();
    double identity = 0.0;
    const auto& seven = curves.back();
    for (std::size_t i = 0; i < grid.size(); ++i) {
      const auto& p = seven.points[i];
      const auto& r = sweep.records[i];
      for (auto [a, b] : {std::pair{p.power, r.power}, {p.heating_entropy, r.heating_entropy},
                          {p.tau_cycle, r.tau_cycle}, {p.heat_hot, r.heat_hot}, {p.heat_cold, r.heat_cold},
                          {p.work, r.work}, {p.tau_cooling, r.tau_cooling}}) {
        identity = std::max(identity, std::abs(a - b));
      }
    }
    bool increasing = true;
    std::string powers;
    for (std::size_t k = 0; k < curves.size(); ++k) {
      powers += fmt(k ? " %.2f" : "%.2f", curves[k].max_power());
      if (k > 0) increasing = increasing && curves[k].max_power() > curves[k - 1].max_power();
    }

    auto preset = ref;
    preset.heating = RateProfile::reduced_final(7, ref.heating.max_rate());
    const auto preset_sweep = sweep_heating_time(preset, default_sweep_grid(preset));
    const double drop_uniform = terminal_power_drop(sweep.curve);
    const double drop_preset = terminal_power_drop(preset_sweep.curve);

    report(9, "N-level study", identity <= tol::truncation && increasing && drop_preset > drop_uniform,
           fmt("N=7 identity max diff %.3g; ", identity) + "P_max(N=2..7) " + powers +
               fmt("; terminal drop preset %.4f vs uniform %.4f", drop_preset, drop_uniform));
  });

  guarded(10, "deterministic output", [] {
    const std::string manifest = R"({"sweep_max_ms": 150, "sweep_step_ms": 2.5, "tau_H_ms": 123})";
    auto render_all = [&] {
      const auto m = io::parse_manifest(manifest);
      const auto sweep = sweep_heating_time(m.config, m.sweep_grid());
      const auto rec = run_cycle(m.config, m.tau_heating);
      std::string out;
      for (auto f : {io::Format::csv, io::Format::json}) {
        out += io::render(io::sweep_table(sweep.records), f);
        out += io::render(io::trajectory_table(rec.heating().trajectory, m.config.hot_ladder()), f);
      }
      return out;
    };
    const auto first = render_all();
    const auto second = render_all();
    report(10, "deterministic output", first == second && !first.empty(),
           fmt("%g bytes per run, identical %g", static_cast<double>(first.size()), first == second ? 1.0 : 0.0));
  });

  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
