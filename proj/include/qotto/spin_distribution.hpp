#pragma once

#include <cmath>
#include <compare>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "qotto/error.hpp"

namespace qotto {

/// Slack allowed on negative probabilities before they are treated as an error.
inline constexpr double kNegativeSlack = 1e-12;
/// Allowed deviation of the total probability from one.
inline constexpr double kNormTolerance = 1e-9;

/// Zeeman sublevel of the F = 3 engine manifold, counted from the ground
/// state: n = 3 - m_F, so n = 0 is m_F = +3 and n = 6 is m_F = -3.
struct LevelIndex {
  int n = 0;

  static constexpr int kTopProjection = 3;

  static constexpr LevelIndex from_mf(int mf) { return LevelIndex{kTopProjection - mf}; }
  constexpr int mf() const { return kTopProjection - n; }

  friend constexpr auto operator<=>(LevelIndex, LevelIndex) = default;
};

/// Probability vector over the N ladder levels.
class SpinDistribution {
 public:
  /// Validates p: finite entries, each >= -1e-12 (clamped to zero) and a
  /// total within 1e-9 of one.
  explicit SpinDistribution(std::vector<double> p) : p_(std::move(p)) {
    detail::require(!p_.empty(), ErrorKind::domain, "spin distribution needs at least one level");
    double total = 0.0;
    for (double& v : p_) {
      if (!std::isfinite(v)) detail::fail(ErrorKind::domain, "spin distribution has a non-finite entry");
      if (v < -kNegativeSlack) {
        detail::fail(ErrorKind::domain,
                     "spin distribution has a negative probability " + std::to_string(v));
      }
      if (v < 0.0) v = 0.0;
      total += v;
    }
    if (std::abs(total - 1.0) > kNormTolerance) {
      detail::fail(ErrorKind::domain,
                   "spin distribution is not normalized (sum = " + std::to_string(total) + ")");
    }
  }

  static SpinDistribution delta(int levels, int n) {
    detail::require(levels >= 1 && n >= 0 && n < levels, ErrorKind::domain,
                    "delta distribution index out of range");
    std::vector<double> p(static_cast<std::size_t>(levels), 0.0);
    p[static_cast<std::size_t>(n)] = 1.0;
    return SpinDistribution(std::move(p));
  }

  static SpinDistribution ground(int levels) { return delta(levels, 0); }

  static SpinDistribution uniform(int levels) {
    detail::require(levels >= 1, ErrorKind::domain, "uniform distribution needs levels >= 1");
    return SpinDistribution(
        std::vector<double>(static_cast<std::size_t>(levels), 1.0 / static_cast<double>(levels)));
  }

  /// Builds a distribution from non-negative weights (e.g. measured
  /// histograms or rounded table values) by dividing by their sum.
  static SpinDistribution normalized(std::vector<double> weights) {
    double total = 0.0;
    for (double w : weights) {
      if (!std::isfinite(w) || w < 0.0) {
        detail::fail(ErrorKind::domain, "population weights must be finite and non-negative");
      }
      total += w;
    }
    detail::require(total > 0.0, ErrorKind::domain, "population weights sum to zero");
    for (double& w : weights) w /= total;
    return SpinDistribution(std::move(weights));
  }

  int levels() const noexcept { return static_cast<int>(p_.size()); }
  std::size_t size() const noexcept { return p_.size(); }
  double operator[](std::size_t n) const { return p_[n]; }
  std::span<const double> values() const noexcept { return p_; }
  const std::vector<double>& vector() const noexcept { return p_; }

  /// Sum_n n p_n.
  double mean_level() const noexcept {
    double m = 0.0;
    for (std::size_t n = 0; n < p_.size(); ++n) m += static_cast<double>(n) * p_[n];
    return m;
  }

  /// Level-reversed copy, p_n -> p_{N-1-n}.
  SpinDistribution reversed() const {
    return SpinDistribution(std::vector<double>(p_.rbegin(), p_.rend()));
  }

  bool operator==(const SpinDistribution&) const = default;

 private:
  std::vector<double> p_;
};

inline double total_variation(const SpinDistribution& a, const SpinDistribution& b) {
  detail::require(a.size() == b.size(), ErrorKind::dimension,
                  "total variation of distributions with different level counts");
  double d = 0.0;
  for (std::size_t n = 0; n < a.size(); ++n) d += std::abs(a[n] - b[n]);
  return 0.5 * d;
}

}  // namespace qotto
