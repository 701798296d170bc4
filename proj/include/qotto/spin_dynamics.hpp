#pragma once

// Spin-exchange rate model for the N-level Zeeman ladder and fixed-step
// integration of the resulting population dynamics.
//
// Heating collisions move the engine strictly up the ladder (n -> n+1),
// cooling collisions strictly down (n -> n-1); the reverse processes are
// energetically forbidden and carry zero rate. Units: time in ms, rates in
// 1/ms.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "qotto/error.hpp"
#include "qotto/spin_distribution.hpp"

namespace qotto {

enum class Direction { heating, cooling };

constexpr std::string_view to_string(Direction d) noexcept {
  return d == Direction::heating ? "heating" : "cooling";
}

/// Per-transition spin-exchange rates for one stroke direction.
///
/// Heating: rates[k] is the rate of k -> k+1 (source levels 0..N-2).
/// Cooling: rates[k] is the rate of k+1 -> k (source levels 1..N-1).
class RateProfile {
 public:
  RateProfile(Direction direction, std::vector<double> rates)
      : direction_(direction), rates_(std::move(rates)) {
    detail::require(!rates_.empty(), ErrorKind::construction, "rate profile needs at least one rate");
    for (double r : rates_) {
      if (!(std::isfinite(r) && r > 0.0)) {
        detail::fail(ErrorKind::domain, "spin-exchange rates must be positive and finite");
      }
    }
  }

  static RateProfile uniform(Direction direction, int levels, double rate) {
    detail::require(levels >= 2, ErrorKind::construction, "rate profile needs levels >= 2");
    return RateProfile(direction, std::vector<double>(static_cast<std::size_t>(levels - 1), rate));
  }

  /// Uniform heating profile whose last transition (into the top level) is
  /// scaled by `fraction`.
  static RateProfile reduced_final(int levels, double rate, double fraction = 0.4) {
    detail::require(fraction > 0.0 && fraction <= 1.0, ErrorKind::domain,
                    "reduced-final fraction must lie in (0, 1]");
    auto profile = uniform(Direction::heating, levels, rate);
    profile.rates_.back() *= fraction;
    return profile;
  }

  Direction direction() const noexcept { return direction_; }
  const std::vector<double>& rates() const noexcept { return rates_; }
  int levels() const noexcept { return static_cast<int>(rates_.size()) + 1; }

  double max_rate() const { return *std::max_element(rates_.begin(), rates_.end()); }
  double min_rate() const { return *std::min_element(rates_.begin(), rates_.end()); }

  /// Rates of the transitions among the lowest `levels` levels.
  RateProfile truncated(int levels) const {
    detail::require(levels >= 2 && levels <= this->levels(), ErrorKind::domain,
                    "truncation level count out of range");
    return RateProfile(direction_, std::vector<double>(rates_.begin(), rates_.begin() + (levels - 1)));
  }

  RateProfile scaled(double factor) const {
    auto out = *this;
    for (double& r : out.rates_) r *= factor;
    return out;
  }

  bool operator==(const RateProfile&) const = default;

 private:
  Direction direction_;
  std::vector<double> rates_;
};

// ---------------------------------------------------------------------------
// Rates from collision physics: Gamma = <n> sigma v_bar.

namespace physical {
inline constexpr double kBoltzmann = 1.380649e-23;          // J/K, exact
inline constexpr double kAtomicMassUnit = 1.66053906660e-27;  // kg
inline constexpr double kMassRb87 = 86.909180531;           // u
inline constexpr double kMassCs133 = 132.905451961;         // u

inline constexpr double reduced_mass(double m1, double m2) { return m1 * m2 / (m1 + m2); }
inline constexpr double kReducedMassRbCs = reduced_mass(kMassRb87, kMassCs133);
}  // namespace physical

struct RatePhysicalInputs {
  double density_overlap = 0.0;        ///< <n> = int n_Cs n_Rb d^3r, 1/cm^3
  double cross_section = 0.0;          ///< sigma, cm^2
  double bath_temperature_uK = 0.0;    ///< kinetic temperature of the bath, uK
  double reduced_mass_amu = physical::kReducedMassRbCs;
};

/// Mean relative speed sqrt(8 k_B T / (pi mu)) in cm/s.
inline double mean_relative_speed(double temperature_uK, double reduced_mass_amu) {
  detail::require(temperature_uK > 0.0 && reduced_mass_amu > 0.0, ErrorKind::domain,
                  "temperature and reduced mass must be positive");
  const double t_kelvin = temperature_uK * 1e-6;
  const double mu_kg = reduced_mass_amu * physical::kAtomicMassUnit;
  const double v_m_per_s = std::sqrt(8.0 * physical::kBoltzmann * t_kelvin / (std::numbers::pi * mu_kg));
  return v_m_per_s * 100.0;
}

/// Spin-exchange rate in 1/ms. A zero cross-section yields a zero rate; any
/// negative or non-finite input, or a non-positive density, temperature or
/// mass, is a domain error.
inline double rate_from_physical(const RatePhysicalInputs& in) {
  detail::require(std::isfinite(in.density_overlap) && in.density_overlap > 0.0, ErrorKind::domain,
                  "density overlap must be positive");
  detail::require(std::isfinite(in.cross_section) && in.cross_section >= 0.0, ErrorKind::domain,
                  "cross section must be non-negative");
  const double v = mean_relative_speed(in.bath_temperature_uK, in.reduced_mass_amu);
  const double per_second = in.density_overlap * in.cross_section * v;
  return per_second * 1e-3;
}

// ---------------------------------------------------------------------------

/// Generator A of dp/dt = A p (column-stochastic rates, columns sum to zero).
class RateGenerator {
 public:
  RateGenerator(const RateProfile& profile, int levels)
      : levels_(levels), profile_(profile), a_(static_cast<std::size_t>(levels * levels), 0.0) {
    detail::require(levels >= 2, ErrorKind::construction, "generator needs levels >= 2");
    if (profile.levels() != levels) {
      detail::fail(ErrorKind::construction,
                   "rate profile has " + std::to_string(profile.rates().size()) +
                       " rates, expected " + std::to_string(levels - 1));
    }
    const auto& rates = profile.rates();
    for (int k = 0; k + 1 < levels; ++k) {
      const double r = rates[static_cast<std::size_t>(k)];
      const int src = profile.direction() == Direction::heating ? k : k + 1;
      const int dst = profile.direction() == Direction::heating ? k + 1 : k;
      at(src, src) -= r;
      at(dst, src) += r;
    }
  }

  int levels() const noexcept { return levels_; }
  Direction direction() const noexcept { return profile_.direction(); }
  const RateProfile& profile() const noexcept { return profile_; }

  double operator()(int row, int col) const {
    return a_[static_cast<std::size_t>(row * levels_ + col)];
  }

  /// Total collision rate out of level n (zero at the absorbing end).
  double outflow(int n) const { return -(*this)(n, n); }

  /// out = A in
  void apply(std::span<const double> in, std::span<double> out) const {
    const auto n = static_cast<std::size_t>(levels_);
    for (std::size_t i = 0; i < n; ++i) {
      double s = 0.0;
      const double* row = a_.data() + i * n;
      for (std::size_t j = 0; j < n; ++j) s += row[j] * in[j];
      out[i] = s;
    }
  }

  double max_rate() const { return profile_.max_rate(); }
  double min_rate() const { return profile_.min_rate(); }

 private:
  double& at(int row, int col) { return a_[static_cast<std::size_t>(row * levels_ + col)]; }

  int levels_;
  RateProfile profile_;
  std::vector<double> a_;
};

inline RateGenerator build_generator(const RateProfile& profile, int levels) {
  return RateGenerator(profile, levels);
}

/// Sampled population history; times[0] == 0.
struct Trajectory {
  std::vector<double> times;
  std::vector<SpinDistribution> states;
  /// Smallest population produced by any integration step before clamping.
  double min_raw_population = 0.0;

  std::size_t size() const noexcept { return times.size(); }
  double duration() const { return times.back(); }
  const SpinDistribution& front() const { return states.front(); }
  const SpinDistribution& back() const { return states.back(); }
};

/// Default integration step: min(0.5 ms, 0.02 / max rate).
inline double default_step(double max_rate) {
  detail::require(max_rate > 0.0, ErrorKind::domain, "max rate must be positive");
  return std::min(0.5, 0.02 / max_rate);
}

namespace detail {

/// Classical RK4 on dp/dt = A p with per-step clamping and renormalization.
class Rk4Stepper {
 public:
  explicit Rk4Stepper(const RateGenerator& gen)
      : gen_(gen),
        k1_(static_cast<std::size_t>(gen.levels())),
        k2_(k1_.size()),
        k3_(k1_.size()),
        k4_(k1_.size()),
        tmp_(k1_.size()) {}

  /// Advances p by h in place; returns the smallest entry before clamping.
  double advance(std::vector<double>& p, double h) {
    const std::size_t n = p.size();
    gen_.apply(p, k1_);
    for (std::size_t i = 0; i < n; ++i) tmp_[i] = p[i] + 0.5 * h * k1_[i];
    gen_.apply(tmp_, k2_);
    for (std::size_t i = 0; i < n; ++i) tmp_[i] = p[i] + 0.5 * h * k2_[i];
    gen_.apply(tmp_, k3_);
    for (std::size_t i = 0; i < n; ++i) tmp_[i] = p[i] + h * k3_[i];
    gen_.apply(tmp_, k4_);
    double lowest = p[0];
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      p[i] += h / 6.0 * (k1_[i] + 2.0 * (k2_[i] + k3_[i]) + k4_[i]);
      lowest = std::min(lowest, p[i]);
      if (p[i] < 0.0) p[i] = 0.0;
      total += p[i];
    }
    for (double& v : p) v /= total;
    return lowest;
  }

 private:
  const RateGenerator& gen_;
  std::vector<double> k1_, k2_, k3_, k4_, tmp_;
};

/// Integration schedule: `full_steps` steps of `step`, then one step of
/// `remainder` (skipped when zero).
struct StepPlan {
  std::size_t full_steps = 0;
  double step = 0.0;
  double remainder = 0.0;

  double end_time() const { return static_cast<double>(full_steps) * step + remainder; }
};

inline StepPlan plan_steps(double duration, double step) {
  StepPlan plan{0, step, 0.0};
  if (duration <= 0.0) return plan;
  const double ratio = duration / step;
  auto full = static_cast<std::size_t>(std::floor(ratio));
  double rem = duration - static_cast<double>(full) * step;
  if (rem < 0.0) rem = 0.0;
  if (rem <= 1e-12 * step) rem = 0.0;
  if (rem >= step * (1.0 - 1e-12)) {
    ++full;
    rem = 0.0;
  }
  plan.full_steps = full;
  plan.remainder = rem;
  return plan;
}

inline void check_initial(const SpinDistribution& initial, const RateGenerator& gen) {
  if (initial.levels() != gen.levels()) {
    fail(ErrorKind::dimension, "initial distribution has " + std::to_string(initial.levels()) +
                                   " levels, generator has " + std::to_string(gen.levels()));
  }
}

inline Trajectory evolve_plan(const SpinDistribution& initial, const RateGenerator& gen,
                              const StepPlan& plan, double end_label) {
  check_initial(initial, gen);
  Trajectory traj;
  const std::size_t samples = plan.full_steps + 1 + (plan.remainder > 0.0 ? 1 : 0);
  traj.times.reserve(samples);
  traj.states.reserve(samples);
  traj.times.push_back(0.0);
  traj.states.push_back(initial);
  traj.min_raw_population = *std::min_element(initial.values().begin(), initial.values().end());

  Rk4Stepper stepper(gen);
  std::vector<double> p = initial.vector();
  for (std::size_t k = 1; k <= plan.full_steps; ++k) {
    traj.min_raw_population = std::min(traj.min_raw_population, stepper.advance(p, plan.step));
    traj.times.push_back(static_cast<double>(k) * plan.step);
    traj.states.emplace_back(p);
  }
  if (plan.remainder > 0.0) {
    traj.min_raw_population = std::min(traj.min_raw_population, stepper.advance(p, plan.remainder));
    traj.times.push_back(end_label);
    traj.states.emplace_back(p);
  } else if (plan.full_steps > 0) {
    traj.times.back() = end_label;
  }
  return traj;
}

}  // namespace detail

/// Integrates the population dynamics for `duration` ms. Samples at every
/// multiple of `step` plus the endpoint.
inline Trajectory evolve(const SpinDistribution& initial, const RateGenerator& gen, double duration,
                         double step) {
  detail::require(std::isfinite(duration) && duration >= 0.0, ErrorKind::domain,
                  "duration must be non-negative");
  detail::require(std::isfinite(step) && step > 0.0, ErrorKind::domain, "step must be positive");
  return detail::evolve_plan(initial, gen, detail::plan_steps(duration, step), duration);
}

inline Trajectory evolve(const SpinDistribution& initial, const RateGenerator& gen, double duration) {
  return evolve(initial, gen, duration, default_step(gen.max_rate()));
}

/// Exact populations of the uniform-rate heating chain started in n = 0:
/// Poisson weights (rt)^n e^{-rt}/n! for n < N-1, remaining mass absorbed
/// in the top level.
inline SpinDistribution analytic_uniform_populations(double rate, double t, int levels) {
  detail::require(rate > 0.0 && std::isfinite(rate), ErrorKind::domain, "rate must be positive");
  detail::require(t >= 0.0 && std::isfinite(t), ErrorKind::domain, "time must be non-negative");
  detail::require(levels >= 2, ErrorKind::domain, "levels must be >= 2");
  const double x = rate * t;
  std::vector<double> p(static_cast<std::size_t>(levels), 0.0);
  double term = std::exp(-x);
  double head = 0.0;
  for (int n = 0; n + 1 < levels; ++n) {
    p[static_cast<std::size_t>(n)] = term;
    head += term;
    term *= x / static_cast<double>(n + 1);
  }
  double tail;
  if (x < static_cast<double>(levels - 1)) {
    // Summing the tail directly avoids cancellation in 1 - head.
    tail = 0.0;
    for (int k = levels - 1; k < levels + 200; ++k) {
      tail += term;
      if (term < 1e-300 || term < tail * 1e-18) break;
      term *= x / static_cast<double>(k + 1);
    }
  } else {
    tail = 1.0 - head;
  }
  p.back() = tail;
  return SpinDistribution::normalized(std::move(p));
}

/// Expected number of spin-exchange collisions along `traj`: the time
/// integral of the total transition flux, by cubic Hermite quadrature.
inline double expected_collisions(const Trajectory& traj, const RateGenerator& gen) {
  detail::require(!traj.states.empty(), ErrorKind::domain, "empty trajectory");
  detail::check_initial(traj.front(), gen);
  const auto n = static_cast<std::size_t>(gen.levels());
  std::vector<double> flux_weights(n);
  for (std::size_t j = 0; j < n; ++j) flux_weights[j] = gen.outflow(static_cast<int>(j));

  std::vector<double> deriv(n);
  auto flux_and_slope = [&](const SpinDistribution& p) {
    gen.apply(p.values(), deriv);
    double f = 0.0, df = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      f += flux_weights[j] * p[j];
      df += flux_weights[j] * deriv[j];
    }
    return std::pair{f, df};
  };

  double total = 0.0;
  auto [f0, d0] = flux_and_slope(traj.states[0]);
  for (std::size_t i = 1; i < traj.size(); ++i) {
    if (traj.states[i].levels() != gen.levels()) {
      detail::fail(ErrorKind::dimension, "trajectory and generator level counts differ");
    }
    const double h = traj.times[i] - traj.times[i - 1];
    auto [f1, d1] = flux_and_slope(traj.states[i]);
    total += 0.5 * h * (f0 + f1) + h * h / 12.0 * (d0 - d1);
    f0 = f1;
    d0 = d1;
  }
  return total;
}

}  // namespace qotto
