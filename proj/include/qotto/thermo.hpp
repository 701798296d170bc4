#pragma once

// Zeeman energy ladder and thermodynamic bookkeeping. Energies are stored as
// temperatures (E / k_B) in nK, fields in mG, times in ms.

#include <cmath>
#include <cstddef>
#include <numeric>
#include <string>
#include <vector>

#include "qotto/error.hpp"
#include "qotto/spin_dynamics.hpp"

namespace qotto {

namespace constants {
/// |g_F(Cs)| mu_B / k_B in nK/mG, frozen at six significant digits from the
/// CODATA 2018 mu_B and k_B (0.25 * 67.1713816 nK/mG = 16.79284539...).
inline constexpr double lambda = 16.7928;
/// |g_F(Rb)| mu_B / k_B; the Rb Lande factor is twice the Cs one.
inline constexpr double kappa = 2.0 * lambda;
inline constexpr double g_f_cs = -0.25;
inline constexpr double g_f_rb = -0.5;

inline constexpr double default_b1 = 346.5;  // mG
inline constexpr double default_b2 = 31.6;   // mG
}  // namespace constants

class MagneticField {
 public:
  explicit MagneticField(double milligauss) : b_(milligauss) {
    if (!(std::isfinite(milligauss) && milligauss > 0.0)) {
      detail::fail(ErrorKind::domain, "magnetic field must be positive, got " + std::to_string(milligauss));
    }
  }

  double milligauss() const noexcept { return b_; }

  friend auto operator<=>(const MagneticField&, const MagneticField&) = default;

 private:
  double b_;
};

/// Level energies E_n = n lambda B (nK).
struct EnergyLadder {
  MagneticField field;
  std::vector<double> energies;

  int levels() const noexcept { return static_cast<int>(energies.size()); }
  /// Spacing between neighbouring levels, lambda B.
  double quantum() const noexcept { return constants::lambda * field.milligauss(); }
};

inline EnergyLadder zeeman_ladder(MagneticField field, int levels) {
  detail::require(levels >= 2, ErrorKind::domain, "ladder needs at least two levels");
  EnergyLadder ladder{field, std::vector<double>(static_cast<std::size_t>(levels))};
  for (int n = 0; n < levels; ++n) {
    ladder.energies[static_cast<std::size_t>(n)] = n * constants::lambda * field.milligauss();
  }
  return ladder;
}

/// Energy handed over by one bath atom per collision, -kappa B for heating
/// (the Rb atom gives energy) and +kappa B for cooling.
inline double bath_quantum(MagneticField field, Direction direction) {
  const double magnitude = constants::kappa * field.milligauss();
  return direction == Direction::heating ? -magnitude : magnitude;
}

inline double mean_energy(const SpinDistribution& p, const EnergyLadder& ladder) {
  detail::require(p.levels() == ladder.levels(), ErrorKind::dimension,
                  "distribution and ladder level counts differ");
  double e = 0.0;
  for (std::size_t n = 0; n < p.size(); ++n) e += ladder.energies[n] * p[n];
  return e;
}

/// Q = sum_n E_n (p_end - p_start); positive when the engine absorbs energy.
inline double heat_exchanged(const SpinDistribution& start, const SpinDistribution& end,
                             const EnergyLadder& ladder) {
  if (start.levels() != ladder.levels() || end.levels() != ladder.levels()) {
    detail::fail(ErrorKind::dimension, "heat_exchanged: level counts differ");
  }
  double q = 0.0;
  for (std::size_t n = 0; n < start.size(); ++n) q += ladder.energies[n] * (end[n] - start[n]);
  return q;
}

/// Work done on the engine by a field ramp with frozen populations,
/// W = sum_n p_n n lambda (B_to - B_from).
inline double stroke_work(const SpinDistribution& p, MagneticField from, MagneticField to) {
  return p.mean_level() * constants::lambda * (to.milligauss() - from.milligauss());
}

/// P = (Q_H - |Q_C|) / tau_cycle in nK/ms.
inline double cycle_power(double heat_hot, double heat_cold, double cycle_time) {
  detail::require(std::isfinite(cycle_time) && cycle_time > 0.0, ErrorKind::domain,
                  "cycle time must be positive");
  return (heat_hot - std::abs(heat_cold)) / cycle_time;
}

/// -sum p ln p in units of k_B, with 0 ln 0 = 0.
inline double shannon_entropy(std::span<const double> p) {
  double s = 0.0;
  for (double v : p) {
    if (v > 0.0) s -= v * std::log(v);
  }
  return s;
}

inline double shannon_entropy(const SpinDistribution& p) { return shannon_entropy(p.values()); }

inline std::vector<double> entropy_trace(const Trajectory& traj) {
  std::vector<double> s;
  s.reserve(traj.size());
  for (const auto& state : traj.states) s.push_back(shannon_entropy(state));
  return s;
}

/// Otto efficiency 1 - B2/B1 for frozen-population ramps.
inline double otto_efficiency(MagneticField b1, MagneticField b2) {
  if (b2 > b1) {
    detail::fail(ErrorKind::domain, "Otto efficiency needs B1 >= B2");
  }
  return 1.0 - b2.milligauss() / b1.milligauss();
}

}  // namespace qotto
