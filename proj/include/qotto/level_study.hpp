#pragma once

// Truncated N-level engines: the reference rate system restricted to its
// lowest N levels with unchanged transition rates. Cycle times are taken
// from the reference engine at equal exchanged heat, so every truncation
// runs at the same heating speed.

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "qotto/cycle_engine.hpp"
#include "qotto/error.hpp"
#include "qotto/thermo.hpp"

namespace qotto {

struct TruncatedModel {
  int levels = 0;
  CycleConfig config;
};

inline constexpr int kMaxLevels = 7;

inline TruncatedModel truncate(const CycleConfig& reference, int levels) {
  reference.validate();
  if (levels < 2 || levels > kMaxLevels || levels > reference.levels) {
    detail::fail(ErrorKind::domain, "truncated level count must lie in [2, " +
                                        std::to_string(std::min(kMaxLevels, reference.levels)) + "], got " +
                                        std::to_string(levels));
  }
  if (levels == reference.levels) return {levels, reference};
  CycleConfig cfg = reference;
  cfg.heating = reference.heating.truncated(levels);
  cfg.cooling = reference.cooling.truncated(levels);
  cfg.levels = levels;
  // Same time resolution as the reference engine.
  cfg.step = reference.integration_step();
  return {levels, std::move(cfg)};
}

/// Inverse of the cumulative heat Q(t) of a reference heating stroke,
/// linearly interpolated.
class HeatTimeMap {
 public:
  HeatTimeMap(std::vector<double> heat, std::vector<double> time)
      : heat_(std::move(heat)), time_(std::move(time)) {
    detail::require(heat_.size() == time_.size() && !heat_.empty(), ErrorKind::construction,
                    "heat-time table needs matching non-empty columns");
    for (std::size_t i = 1; i < heat_.size(); ++i) {
      detail::require(heat_[i] > heat_[i - 1] && time_[i] > time_[i - 1], ErrorKind::construction,
                      "heat-time table must be strictly increasing");
    }
  }

  double max_heat() const { return heat_.back(); }
  double max_time() const { return time_.back(); }
  std::size_t size() const { return heat_.size(); }

  double time_for_heat(double q) const {
    const double slack = 1e-9 * std::max(1.0, std::abs(heat_.back()));
    if (q < heat_.front() - slack || q > heat_.back() + slack) {
      detail::fail(ErrorKind::domain, "heat " + std::to_string(q) + " nK outside the mapped range [0, " +
                                          std::to_string(heat_.back()) + "]");
    }
    if (q <= heat_.front()) return time_.front();
    if (q >= heat_.back()) return time_.back();
    const auto hi = static_cast<std::size_t>(std::distance(
        heat_.begin(), std::upper_bound(heat_.begin(), heat_.end(), q)));
    const std::size_t lo = hi - 1;
    const double w = (q - heat_[lo]) / (heat_[hi] - heat_[lo]);
    return time_[lo] + w * (time_[hi] - time_[lo]);
  }

 private:
  std::vector<double> heat_;
  std::vector<double> time_;
};

inline HeatTimeMap build_heat_time_map(const StrokeRecord& reference_heating, const EnergyLadder& ladder) {
  detail::require(reference_heating.kind == StrokeKind::heating, ErrorKind::domain,
                  "heat-time map needs a heating stroke");
  const auto& traj = reference_heating.trajectory;
  std::vector<double> heat{0.0}, time{traj.times.front()};
  for (std::size_t i = 1; i < traj.size(); ++i) {
    const double q = heat_exchanged(traj.front(), traj.states[i], ladder);
    const double tol = 1e-9 * std::max(1.0, std::abs(heat.back()));
    if (q < heat.back() - tol) {
      throw std::logic_error("cumulative heat decreased along a heating stroke");
    }
    // Late samples at saturation add no resolvable heat.
    if (q > heat.back()) {
      heat.push_back(q);
      time.push_back(traj.times[i]);
    }
  }
  return HeatTimeMap(std::move(heat), std::move(time));
}

/// Which strokes of a truncated engine take their duration from the reference engine.
enum class TimeMapping { both_strokes, heating_only };

struct LevelPoint {
  double tau_heating = 0.0;         // truncated model's own heating time
  double mapped_tau_heating = 0.0;  // reference heating time at equal Q_H
  double tau_cooling = 0.0;
  double tau_cycle = 0.0;
  double heating_entropy = 0.0;
  double heat_hot = 0.0;
  double heat_cold = 0.0;
  double work = 0.0;
  double power = 0.0;
};

struct LevelCurve {
  int levels = 0;
  std::vector<LevelPoint> points;

  double max_power() const {
    double m = 0.0;
    for (const auto& p : points) m = std::max(m, p.power);
    return m;
  }
  double max_entropy() const {
    double m = 0.0;
    for (const auto& p : points) m = std::max(m, p.heating_entropy);
    return m;
  }
  std::size_t argmax_power() const {
    return static_cast<std::size_t>(std::distance(
        points.begin(), std::max_element(points.begin(), points.end(),
                                         [](auto& l, auto& r) { return l.power < r.power; })));
  }
};

struct LevelStudyOptions {
  /// Heating-time grid for each truncated model; defaults to default_sweep_grid.
  std::optional<std::vector<double>> grid;
  TimeMapping mapping = TimeMapping::both_strokes;
  unsigned threads = 0;
};

namespace detail {

inline LevelPoint level_point(const CycleRecord& rec) {
  return {rec.tau_heating, rec.tau_heating, rec.tau_cooling, rec.tau_cycle, rec.heating_entropy,
          rec.heat_hot, rec.heat_cold, rec.work, rec.power};
}

}  // namespace detail

inline std::vector<LevelCurve> compare_n_levels(const CycleConfig& reference, const std::vector<int>& ns,
                                                const LevelStudyOptions& options = {}) {
  reference.validate();
  detail::require(!ns.empty(), ErrorKind::domain, "no level counts requested");
  for (int n : ns) {
    if (n < 2 || n > std::min(kMaxLevels, reference.levels)) {
      detail::fail(ErrorKind::domain, "level count " + std::to_string(n) + " out of range");
    }
  }

  const double horizon = 2.0 * std::ceil(20.0 / reference.heating.min_rate());
  const auto reference_heating = run_heating(reference, horizon);
  const auto map = build_heat_time_map(reference_heating, reference.hot_ladder());

  std::vector<LevelCurve> curves;
  for (int n : ns) {
    const auto model = truncate(reference, n);
    const auto grid = options.grid.value_or(default_sweep_grid(model.config));
    LevelCurve curve{n, std::vector<LevelPoint>(grid.size())};
    const bool identity = n == reference.levels;
    detail::parallel_for(grid.size(), options.threads, [&](std::size_t i) {
      const auto rec = run_cycle(model.config, grid[i]);
      LevelPoint pt = detail::level_point(rec);
      if (!identity) {
        pt.mapped_tau_heating = map.time_for_heat(rec.heat_hot);
        const double cooling = options.mapping == TimeMapping::both_strokes
                                   ? run_cycle(reference, pt.mapped_tau_heating).tau_cooling
                                   : rec.tau_cooling;
        pt.tau_cycle = pt.mapped_tau_heating + cooling + 2.0 * reference.ramp_time;
        pt.power = pt.tau_cycle > 0.0 ? cycle_power(rec.heat_hot, rec.heat_cold, pt.tau_cycle) : 0.0;
      }
      curve.points[i] = pt;
    });
    curves.push_back(std::move(curve));
  }
  return curves;
}

/// Relative power loss along the end of a power-vs-entropy curve: from the
/// power optimum to the point past it where S_B has fallen to
/// `entropy_fraction` of its value at the optimum (linear interpolation).
inline double terminal_power_drop(const std::vector<std::pair<double, double>>& curve,
                                  double entropy_fraction = 0.5) {
  detail::require(!curve.empty(), ErrorKind::domain, "empty curve");
  const auto best = static_cast<std::size_t>(std::distance(
      curve.begin(),
      std::max_element(curve.begin(), curve.end(), [](auto& l, auto& r) { return l.second < r.second; })));
  const double p_max = curve[best].second;
  const double s_target = entropy_fraction * curve[best].first;
  for (std::size_t i = best + 1; i < curve.size(); ++i) {
    if (curve[i].first <= s_target) {
      const auto& [s0, p0] = curve[i - 1];
      const auto& [s1, p1] = curve[i];
      const double w = s0 == s1 ? 1.0 : (s0 - s_target) / (s0 - s1);
      return (p_max - (p0 + w * (p1 - p0))) / p_max;
    }
  }
  detail::fail(ErrorKind::domain, "curve never reaches the requested terminal entropy");
}

}  // namespace qotto
