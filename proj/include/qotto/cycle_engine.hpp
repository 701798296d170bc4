#pragma once

// Four-stroke Otto cycle of the quasi-spin engine:
//   A -> B  heating at B1 (spin-exchange with the bath)
//   B -> C  expansion ramp B1 -> B2, populations frozen
//   C -> D  cooling at B2 until the ground state holds >= 1 - epsilon
//   D -> A  compression ramp B2 -> B1, populations frozen

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "qotto/error.hpp"
#include "qotto/spin_distribution.hpp"
#include "qotto/spin_dynamics.hpp"
#include "qotto/thermo.hpp"

namespace qotto {

enum class StrokeKind { heating, expansion, cooling, compression };

constexpr std::string_view to_string(StrokeKind k) noexcept {
  switch (k) {
    case StrokeKind::heating: return "heating";
    case StrokeKind::expansion: return "expansion";
    case StrokeKind::cooling: return "cooling";
    case StrokeKind::compression: return "compression";
  }
  return "unknown";
}

/// Where the heating stroke starts: the limit cycle (A equals the previous
/// cycle's D) or the exact ground state.
enum class CycleStart { periodic, ground_state };

inline constexpr double kDefaultRampTime = 20.0;   // ms
inline constexpr double kDefaultEpsilon = 0.01;
inline constexpr double kCalibrationTarget = 58.0;  // ms

struct CycleConfig {
  CycleConfig(RateProfile heating_profile, RateProfile cooling_profile)
      : heating(std::move(heating_profile)),
        cooling(std::move(cooling_profile)),
        levels(heating.levels()) {}

  /// Equal uniform rates in both directions.
  static CycleConfig uniform(double rate, int levels = 7) {
    return CycleConfig(RateProfile::uniform(Direction::heating, levels, rate),
                       RateProfile::uniform(Direction::cooling, levels, rate));
  }

  MagneticField b1{constants::default_b1};
  MagneticField b2{constants::default_b2};
  double ramp_time = kDefaultRampTime;
  RateProfile heating;
  RateProfile cooling;
  int levels;
  double epsilon = kDefaultEpsilon;
  std::optional<double> step;
  CycleStart start = CycleStart::periodic;
  /// Cooling gives up after horizon_factor / (slowest cooling rate) ms.
  double horizon_factor = 50.0;

  void validate() const {
    if (!(b1 > b2)) detail::fail(ErrorKind::validation, "cycle needs B1 > B2");
    if (!(std::isfinite(ramp_time) && ramp_time >= 0.0)) {
      detail::fail(ErrorKind::validation, "ramp time must be >= 0");
    }
    if (!(epsilon > 0.0 && epsilon < 0.1)) {
      detail::fail(ErrorKind::validation, "closure epsilon must lie in (0, 0.1)");
    }
    if (heating.direction() != Direction::heating || cooling.direction() != Direction::cooling) {
      detail::fail(ErrorKind::validation, "rate profiles have the wrong stroke direction");
    }
    if (levels < 2 || heating.levels() != levels || cooling.levels() != levels) {
      detail::fail(ErrorKind::validation, "rate profiles must have levels - 1 entries");
    }
    if (step && !(std::isfinite(*step) && *step > 0.0)) {
      detail::fail(ErrorKind::validation, "integration step must be positive");
    }
    if (!(horizon_factor > 0.0)) detail::fail(ErrorKind::validation, "horizon factor must be positive");
  }

  double integration_step() const {
    return step ? *step : default_step(std::max(heating.max_rate(), cooling.max_rate()));
  }

  EnergyLadder hot_ladder() const { return zeeman_ladder(b1, levels); }
  EnergyLadder cold_ladder() const { return zeeman_ladder(b2, levels); }

  bool operator==(const CycleConfig&) const = default;
};

struct StrokeRecord {
  StrokeKind kind = StrokeKind::heating;
  double duration = 0.0;
  Trajectory trajectory;
  double heat = 0.0;  // nK
  double work = 0.0;  // nK
  std::vector<double> entropy;

  const SpinDistribution& start() const { return trajectory.front(); }
  const SpinDistribution& end() const { return trajectory.back(); }
};

struct CycleRecord {
  std::array<StrokeRecord, 4> strokes;
  double heat_hot = 0.0;    // Q_H
  double heat_cold = 0.0;   // Q_C (negative)
  double work = 0.0;        // W_exp + W_comp (negative for an engine)
  double power = 0.0;       // nK/ms
  double tau_heating = 0.0;
  double tau_cooling = 0.0;
  double tau_cycle = 0.0;
  double collisions_heating = 0.0;
  double collisions_cooling = 0.0;
  double collisions_total = 0.0;
  double heating_entropy = 0.0;  // S_B
  std::size_t periodic_iterations = 0;

  const StrokeRecord& heating() const { return strokes[0]; }
  const StrokeRecord& expansion() const { return strokes[1]; }
  const StrokeRecord& cooling() const { return strokes[2]; }
  const StrokeRecord& compression() const { return strokes[3]; }

  double efficiency() const { return heat_hot > 0.0 ? std::abs(work) / heat_hot : 0.0; }

  /// Q_H + Q_C + W_exp + W_comp
  double first_law_residual() const { return heat_hot + heat_cold + work; }
};

namespace detail {

inline SpinDistribution propagate(const SpinDistribution& initial, const RateGenerator& gen,
                                  const StepPlan& plan) {
  Rk4Stepper stepper(gen);
  std::vector<double> p = initial.vector();
  for (std::size_t k = 0; k < plan.full_steps; ++k) stepper.advance(p, plan.step);
  if (plan.remainder > 0.0) stepper.advance(p, plan.remainder);
  return SpinDistribution(std::move(p));
}

struct CoolingSolution {
  StepPlan plan;
  double time = 0.0;
};

/// Smallest time at which the cooled state has p_0 >= 1 - epsilon: march in
/// full steps to bracket the crossing, then bisect the partial step.
inline CoolingSolution solve_cooling(const CycleConfig& config, const RateGenerator& gen,
                                     const SpinDistribution& start) {
  check_initial(start, gen);
  const double h = config.integration_step();
  const double target = 1.0 - config.epsilon;
  if (start[0] >= target) return {StepPlan{0, h, 0.0}, 0.0};

  const double horizon = config.horizon_factor / gen.min_rate();
  const auto max_steps = static_cast<std::size_t>(std::ceil(horizon / h));
  Rk4Stepper stepper(gen);
  std::vector<double> p = start.vector();
  std::vector<double> prev, trial;
  for (std::size_t k = 1; k <= max_steps; ++k) {
    prev = p;
    stepper.advance(p, h);
    if (p[0] < target) continue;

    double lo = 0.0, hi = h;
    for (int it = 0; it < 200 && hi - lo > 1e-13 * h; ++it) {
      const double mid = 0.5 * (lo + hi);
      trial = prev;
      stepper.advance(trial, mid);
      (trial[0] >= target ? hi : lo) = mid;
    }
    if (hi >= h) return {StepPlan{k, h, 0.0}, static_cast<double>(k) * h};
    return {StepPlan{k - 1, h, hi}, static_cast<double>(k - 1) * h + hi};
  }
  fail(ErrorKind::convergence, "cooling stroke did not reach closure within " +
                                   std::to_string(horizon) + " ms");
}

inline StrokeRecord ramp_stroke(StrokeKind kind, const SpinDistribution& p, double duration,
                                MagneticField from, MagneticField to) {
  StrokeRecord s;
  s.kind = kind;
  s.duration = duration;
  s.trajectory.times.push_back(0.0);
  s.trajectory.states.push_back(p);
  if (duration > 0.0) {
    s.trajectory.times.push_back(duration);
    s.trajectory.states.push_back(p);
  }
  s.trajectory.min_raw_population = *std::min_element(p.values().begin(), p.values().end());
  s.work = stroke_work(p, from, to);
  s.entropy = entropy_trace(s.trajectory);
  return s;
}

inline StrokeRecord heat_stroke(StrokeKind kind, Trajectory traj, double duration,
                                const EnergyLadder& ladder) {
  StrokeRecord s;
  s.kind = kind;
  s.duration = duration;
  s.heat = heat_exchanged(traj.front(), traj.back(), ladder);
  s.entropy = entropy_trace(traj);
  s.trajectory = std::move(traj);
  return s;
}

}  // namespace detail

/// Heating stroke at B1 for tau_H ms.
inline StrokeRecord run_heating(const CycleConfig& config, double tau_heating,
                                const std::optional<SpinDistribution>& initial = std::nullopt) {
  config.validate();
  detail::require(std::isfinite(tau_heating) && tau_heating >= 0.0, ErrorKind::domain,
                  "heating time must be >= 0");
  const auto gen = build_generator(config.heating, config.levels);
  const auto start = initial.value_or(SpinDistribution::ground(config.levels));
  auto traj = detail::evolve_plan(start, gen, detail::plan_steps(tau_heating, config.integration_step()),
                                  tau_heating);
  return detail::heat_stroke(StrokeKind::heating, std::move(traj), tau_heating, config.hot_ladder());
}

/// Cooling duration needed to bring p_C back to the ground state within epsilon.
inline double solve_cooling_time(const CycleConfig& config, const SpinDistribution& cooled_from) {
  config.validate();
  const auto gen = build_generator(config.cooling, config.levels);
  return detail::solve_cooling(config, gen, cooled_from).time;
}

namespace detail {

inline constexpr double kPeriodicTolerance = 1e-14;
inline constexpr std::size_t kPeriodicMaxIterations = 20000;

/// Start state A of the limit cycle: iterate A <- D(A) from the ground state.
inline std::pair<SpinDistribution, std::size_t> periodic_start(const CycleConfig& config,
                                                              const RateGenerator& heat_gen,
                                                              const RateGenerator& cool_gen,
                                                              const StepPlan& heat_plan) {
  auto a = SpinDistribution::ground(config.levels);
  for (std::size_t it = 1; it <= kPeriodicMaxIterations; ++it) {
    const auto b = propagate(a, heat_gen, heat_plan);
    const auto cooling = solve_cooling(config, cool_gen, b);
    auto d = propagate(b, cool_gen, cooling.plan);
    const double gap = total_variation(a, d);
    if (gap <= kPeriodicTolerance) return {std::move(a), it};
    a = std::move(d);
  }
  fail(ErrorKind::convergence, "periodic cycle state did not converge");
}

}  // namespace detail

inline CycleRecord run_cycle(const CycleConfig& config, double tau_heating) {
  config.validate();
  detail::require(std::isfinite(tau_heating) && tau_heating >= 0.0, ErrorKind::domain,
                  "heating time must be >= 0");
  const double h = config.integration_step();
  const auto heat_gen = build_generator(config.heating, config.levels);
  const auto cool_gen = build_generator(config.cooling, config.levels);
  const auto heat_plan = detail::plan_steps(tau_heating, h);

  CycleRecord rec;
  auto a = SpinDistribution::ground(config.levels);
  if (config.start == CycleStart::periodic) {
    auto [state, iterations] = detail::periodic_start(config, heat_gen, cool_gen, heat_plan);
    a = std::move(state);
    rec.periodic_iterations = iterations;
  }

  auto heat_traj = detail::evolve_plan(a, heat_gen, heat_plan, tau_heating);
  rec.collisions_heating = expected_collisions(heat_traj, heat_gen);
  rec.strokes[0] =
      detail::heat_stroke(StrokeKind::heating, std::move(heat_traj), tau_heating, config.hot_ladder());
  const SpinDistribution b = rec.strokes[0].end();

  rec.strokes[1] = detail::ramp_stroke(StrokeKind::expansion, b, config.ramp_time, config.b1, config.b2);

  const auto cooling = detail::solve_cooling(config, cool_gen, b);
  auto cool_traj = detail::evolve_plan(b, cool_gen, cooling.plan, cooling.time);
  rec.collisions_cooling = expected_collisions(cool_traj, cool_gen);
  rec.strokes[2] =
      detail::heat_stroke(StrokeKind::cooling, std::move(cool_traj), cooling.time, config.cold_ladder());
  const SpinDistribution d = rec.strokes[2].end();

  rec.strokes[3] = detail::ramp_stroke(StrokeKind::compression, d, config.ramp_time, config.b2, config.b1);

  rec.heat_hot = rec.strokes[0].heat;
  rec.heat_cold = rec.strokes[2].heat;
  rec.work = rec.strokes[1].work + rec.strokes[3].work;
  rec.tau_heating = tau_heating;
  rec.tau_cooling = cooling.time;
  rec.tau_cycle = tau_heating + cooling.time + 2.0 * config.ramp_time;
  rec.power = rec.tau_cycle > 0.0 ? cycle_power(rec.heat_hot, rec.heat_cold, rec.tau_cycle) : 0.0;
  rec.collisions_total = rec.collisions_heating + rec.collisions_cooling;
  rec.heating_entropy = shannon_entropy(b);
  return rec;
}

// ---------------------------------------------------------------------------

struct SweepOptions {
  /// Keep full stroke trajectories; otherwise only stroke endpoints are kept.
  bool keep_trajectories = false;
  /// Worker threads; 0 picks the hardware concurrency.
  unsigned threads = 0;
};

struct SweepResult {
  std::vector<CycleRecord> records;
  /// (S_B, P) per grid point, in grid order.
  std::vector<std::pair<double, double>> curve;

  std::size_t argmax_power() const {
    return static_cast<std::size_t>(
        std::distance(curve.begin(), std::max_element(curve.begin(), curve.end(), [](auto& l, auto& r) {
                        return l.second < r.second;
                      })));
  }
  std::size_t argmax_entropy() const {
    return static_cast<std::size_t>(
        std::distance(curve.begin(), std::max_element(curve.begin(), curve.end(), [](auto& l, auto& r) {
                        return l.first < r.first;
                      })));
  }
};

namespace detail {

inline void strip_trajectory(StrokeRecord& s) {
  if (s.trajectory.size() <= 2) return;
  Trajectory t;
  t.times = {s.trajectory.times.front(), s.trajectory.times.back()};
  t.states = {s.trajectory.states.front(), s.trajectory.states.back()};
  t.min_raw_population = s.trajectory.min_raw_population;
  s.trajectory = std::move(t);
  s.entropy = {s.entropy.front(), s.entropy.back()};
}

/// Runs fn(i) for i in [0, count) on a small worker pool.
template <class Fn>
void parallel_for(std::size_t count, unsigned threads, Fn&& fn) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, count));
  if (threads <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(threads);
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (unsigned w = 0; w < threads; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = next++; i < count; i = next++) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
        next = count;
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace detail

inline SweepResult sweep_heating_time(const CycleConfig& config, const std::vector<double>& grid,
                                      const SweepOptions& options = {}) {
  config.validate();
  detail::require(!grid.empty(), ErrorKind::domain, "sweep grid is empty");
  for (std::size_t i = 1; i < grid.size(); ++i) {
    detail::require(grid[i] > grid[i - 1], ErrorKind::domain, "sweep grid must be increasing");
  }
  std::vector<std::optional<CycleRecord>> slots(grid.size());
  detail::parallel_for(grid.size(), options.threads, [&](std::size_t i) {
    auto rec = run_cycle(config, grid[i]);
    if (!options.keep_trajectories) {
      for (auto& s : rec.strokes) detail::strip_trajectory(s);
    }
    slots[i] = std::move(rec);
  });
  SweepResult out;
  out.records.reserve(grid.size());
  for (auto& s : slots) {
    out.curve.emplace_back(s->heating_entropy, s->power);
    out.records.push_back(std::move(*s));
  }
  return out;
}

/// 0, spacing, 2 spacing, ... up to 20 / (slowest heating rate), by which
/// point the top level holds more than 99.9 % of the population.
inline std::vector<double> default_sweep_grid(const CycleConfig& config, double spacing = 1.0) {
  detail::require(spacing > 0.0, ErrorKind::domain, "grid spacing must be positive");
  const double end = std::ceil(20.0 / config.heating.min_rate());
  std::vector<double> grid;
  for (std::size_t k = 0;; ++k) {
    const double t = static_cast<double>(k) * spacing;
    if (t > end + 1e-9) break;
    grid.push_back(t);
  }
  return grid;
}

// ---------------------------------------------------------------------------
// Calibration against the heating-entropy peak time.

struct EntropyPeak {
  double time = 0.0;
  double entropy = 0.0;
};

/// Heating time at which the end-of-heating entropy is largest, refined
/// between integration samples by golden-section search.
inline EntropyPeak heating_entropy_peak(const CycleConfig& config,
                                        const std::optional<SpinDistribution>& initial = std::nullopt) {
  config.validate();
  const auto gen = build_generator(config.heating, config.levels);
  const double h = config.integration_step();
  const double horizon = 20.0 / gen.min_rate();
  const auto start = initial.value_or(SpinDistribution::ground(config.levels));
  const auto traj = evolve(start, gen, horizon, h);
  const auto s = entropy_trace(traj);
  const auto k = static_cast<std::size_t>(std::distance(s.begin(), std::max_element(s.begin(), s.end())));
  if (k == 0 || k + 1 >= s.size()) {
    detail::fail(ErrorKind::convergence, "heating entropy has no interior maximum within the horizon");
  }

  detail::Rk4Stepper stepper(gen);
  std::vector<double> p;
  // Same schedule as run_heating: full steps up to the last sample, then a remainder.
  auto entropy_at = [&](double t) {
    const std::size_t base = t >= traj.times[k] ? k : k - 1;
    p = traj.states[base].vector();
    const double rest = t - traj.times[base];
    if (rest > 0.0) stepper.advance(p, rest);
    return shannon_entropy(p);
  };

  constexpr double kInvPhi = 0.6180339887498949;
  double lo = traj.times[k - 1], hi = traj.times[k + 1];
  double x1 = hi - kInvPhi * (hi - lo), x2 = lo + kInvPhi * (hi - lo);
  double f1 = entropy_at(x1), f2 = entropy_at(x2);
  while (hi - lo > 1e-10) {
    if (f1 < f2) {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + kInvPhi * (hi - lo);
      f2 = entropy_at(x2);
    } else {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - kInvPhi * (hi - lo);
      f1 = entropy_at(x1);
    }
  }
  const double t = 0.5 * (lo + hi);
  EntropyPeak peak{t, entropy_at(t)};
  if (s[k] > peak.entropy) peak = {traj.times[k], s[k]};
  return peak;
}

/// Uniform rate (both directions) that puts the heating-entropy peak at
/// `target_peak` ms. Uses the time-rescaling symmetry of the linear rate
/// equation: t_peak(c * rate) = t_peak(rate) / c.
inline double calibrate_uniform_rate(const CycleConfig& config_template,
                                     double target_peak = kCalibrationTarget) {
  detail::require(std::isfinite(target_peak) && target_peak > 0.0, ErrorKind::domain,
                  "calibration target must be positive");
  double rate = 3.0 / target_peak;
  for (int it = 0; it < 60; ++it) {
    auto cfg = config_template;
    cfg.heating = RateProfile::uniform(Direction::heating, cfg.levels, rate);
    cfg.cooling = RateProfile::uniform(Direction::cooling, cfg.levels, rate);
    const double peak = heating_entropy_peak(cfg).time;
    if (std::abs(peak - target_peak) <= 1e-6 * target_peak) return rate;
    rate *= peak / target_peak;
  }
  detail::fail(ErrorKind::convergence, "rate calibration did not converge");
}

/// Seven-level configuration with calibrated uniform rates and default
/// fields, ramp time and closure tolerance.
inline const CycleConfig& default_cycle_config() {
  static const CycleConfig config = [] {
    const double rate = calibrate_uniform_rate(CycleConfig::uniform(3.0 / kCalibrationTarget));
    return CycleConfig::uniform(rate);
  }();
  return config;
}

}  // namespace qotto
