#pragma once

// Effective spin temperature from a population vector: least-squares fit of
//   p_n ~ a P(beta_+)_n + (1 - a) P(beta_-)_n,  P(beta)_n = exp(-beta E_n) / Z
// with a in [0, 1], beta_+ >= 0, beta_- <= 0 (beta = 1 / k_B T in 1/nK).

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <string_view>
#include <vector>

#include "qotto/detail/bounded_lm.hpp"
#include "qotto/error.hpp"
#include "qotto/spin_distribution.hpp"
#include "qotto/spin_dynamics.hpp"
#include "qotto/thermo.hpp"

namespace qotto {

enum class Regime { positive, negative, transition };

constexpr std::string_view to_string(Regime r) noexcept {
  switch (r) {
    case Regime::positive: return "positive";
    case Regime::negative: return "negative";
    case Regime::transition: return "transition";
  }
  return "unknown";
}

struct TemperatureFit {
  double a = 1.0;
  double beta_plus = 0.0;   // 1/nK, >= 0
  double beta_minus = 0.0;  // 1/nK, <= 0
  double delta_a = 0.0;     // 1-sigma; +inf when a is not identifiable
  double residual = 0.0;    // sum of squared deviations
  Regime regime = Regime::transition;

  double temperature_plus() const {
    return beta_plus > 0.0 ? 1.0 / beta_plus : std::numeric_limits<double>::infinity();
  }
  double temperature_minus() const {
    return beta_minus < 0.0 ? 1.0 / beta_minus : -std::numeric_limits<double>::infinity();
  }
};

inline constexpr double kRegimeAmplitude = 0.9;
inline constexpr double kRegimeNegativeAmplitude = 0.1;  // written out: 1 - 0.9 rounds below 0.1
inline constexpr double kRegimeUncertainty = 0.1;

inline Regime classify_regime(double a, double delta_a) {
  if (a >= kRegimeAmplitude && delta_a <= kRegimeUncertainty) return Regime::positive;
  if (a <= kRegimeNegativeAmplitude && delta_a <= kRegimeUncertainty) return Regime::negative;
  return Regime::transition;
}

inline Regime classify_regime(const TemperatureFit& fit) { return classify_regime(fit.a, fit.delta_a); }

/// Two-colour regime for plot backgrounds: whichever component carries the
/// larger weight, with no transition band.
inline Regime dominant_regime(const TemperatureFit& fit) {
  return fit.a >= 0.5 ? Regime::positive : Regime::negative;
}

namespace detail {

/// Boltzmann weights over reduced energies e_n for reduced inverse
/// temperature theta, max-shifted before exponentiation.
inline void boltzmann_weights(double theta, std::span<const double> e, std::span<double> out) {
  double shift = -std::numeric_limits<double>::infinity();
  for (double en : e) shift = std::max(shift, -theta * en);
  double z = 0.0;
  for (std::size_t n = 0; n < e.size(); ++n) {
    out[n] = std::exp(-theta * e[n] - shift);
    z += out[n];
  }
  for (double& v : out) v /= z;
}

}  // namespace detail

/// p_n proportional to exp(-beta E_n); beta = 0 is uniform, beta = +inf puts
/// everything in the lowest level and -inf in the highest.
inline SpinDistribution boltzmann_distribution(double beta, const EnergyLadder& ladder) {
  detail::require(!std::isnan(beta), ErrorKind::domain, "beta is NaN");
  const int n = ladder.levels();
  if (std::isinf(beta)) return SpinDistribution::delta(n, beta > 0 ? 0 : n - 1);
  std::vector<double> p(static_cast<std::size_t>(n));
  detail::boltzmann_weights(beta, ladder.energies, p);
  return SpinDistribution::normalized(std::move(p));
}

/// Mean energy of the fitted mixture.
inline double mixture_mean_energy(const TemperatureFit& fit, const EnergyLadder& ladder) {
  return fit.a * mean_energy(boltzmann_distribution(fit.beta_plus, ladder), ladder) +
         (1.0 - fit.a) * mean_energy(boltzmann_distribution(fit.beta_minus, ladder), ladder);
}

namespace detail {

using FitVector = Eigen::Matrix<double, 3, 1>;

inline constexpr double kThetaLimit = 1e3;

/// Mixture residuals in reduced units: x = (a, theta_+, theta_-), theta = beta * lambda B.
class MixtureModel {
 public:
  MixtureModel(std::span<const double> target, std::vector<double> reduced_energies)
      : target_(target.begin(), target.end()),
        e_(std::move(reduced_energies)),
        plus_(e_.size()),
        minus_(e_.size()) {}

  void operator()(const FitVector& x, Eigen::VectorXd& r, Eigen::Matrix<double, Eigen::Dynamic, 3>& jac) {
    const auto m = e_.size();
    r.resize(static_cast<Eigen::Index>(m));
    jac.resize(static_cast<Eigen::Index>(m), 3);
    boltzmann_weights(x(1), e_, plus_);
    boltzmann_weights(x(2), e_, minus_);
    double mean_plus = 0.0, mean_minus = 0.0;
    for (std::size_t n = 0; n < m; ++n) {
      mean_plus += plus_[n] * e_[n];
      mean_minus += minus_[n] * e_[n];
    }
    const double a = x(0);
    for (std::size_t n = 0; n < m; ++n) {
      const auto i = static_cast<Eigen::Index>(n);
      r(i) = a * plus_[n] + (1.0 - a) * minus_[n] - target_[n];
      jac(i, 0) = plus_[n] - minus_[n];
      jac(i, 1) = -a * plus_[n] * (e_[n] - mean_plus);
      jac(i, 2) = -(1.0 - a) * minus_[n] * (e_[n] - mean_minus);
    }
  }

 private:
  std::vector<double> target_;
  std::vector<double> e_;
  std::vector<double> plus_, minus_;
};

/// Single Boltzmann component, x = (theta).
class SingleModel {
 public:
  SingleModel(std::span<const double> target, std::vector<double> reduced_energies)
      : target_(target.begin(), target.end()), e_(std::move(reduced_energies)), w_(e_.size()) {}

  void operator()(const Eigen::Matrix<double, 1, 1>& x, Eigen::VectorXd& r,
                  Eigen::Matrix<double, Eigen::Dynamic, 1>& jac) {
    const auto m = e_.size();
    r.resize(static_cast<Eigen::Index>(m));
    jac.resize(static_cast<Eigen::Index>(m), 1);
    boltzmann_weights(x(0), e_, w_);
    double mean = 0.0;
    for (std::size_t n = 0; n < m; ++n) mean += w_[n] * e_[n];
    for (std::size_t n = 0; n < m; ++n) {
      const auto i = static_cast<Eigen::Index>(n);
      r(i) = w_[n] - target_[n];
      jac(i, 0) = -w_[n] * (e_[n] - mean);
    }
  }

 private:
  std::vector<double> target_;
  std::vector<double> e_;
  std::vector<double> w_;
};

/// 1-sigma uncertainty of a from the Gauss-Newton covariance
/// s^2 (J_F^T J_F)^{-1} over the parameters not pinned at a bound:
/// var(a) = s^2 / |J_a projected off the other free columns|^2.
inline double amplitude_uncertainty(const FitVector& x, const FitVector& lower, const FitVector& upper,
                                    const Eigen::Matrix<double, Eigen::Dynamic, 3>& jac, double cost) {
  auto pinned = [&](int i) { return x(i) <= lower(i) || x(i) >= upper(i); };
  if (pinned(0)) return 0.0;
  const Eigen::Index m = jac.rows();
  std::vector<int> others;
  for (int i = 1; i < 3; ++i) {
    if (!pinned(i)) others.push_back(i);
  }
  const auto free_count = static_cast<Eigen::Index>(others.size()) + 1;
  const double dof = static_cast<double>(std::max<Eigen::Index>(1, m - free_count));
  const double s2 = cost / dof;

  Eigen::VectorXd ja = jac.col(0);
  if (!others.empty()) {
    Eigen::MatrixXd b(m, static_cast<Eigen::Index>(others.size()));
    for (std::size_t k = 0; k < others.size(); ++k) b.col(static_cast<Eigen::Index>(k)) = jac.col(others[k]);
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(b);
    qr.setThreshold(1e-12);
    const Eigen::VectorXd coef = qr.solve(ja);
    ja -= b * coef;
  }
  const double denom = ja.squaredNorm();
  if (denom <= 1e-24) return std::numeric_limits<double>::infinity();
  return std::sqrt(s2 / denom);
}

}  // namespace detail

struct FitOptions {
  /// Starting inverse temperatures (1/nK) for beta_+; beta_- starts mirror these.
  std::vector<double> beta_starts{0.0, 1.0 / 5000.0, 1.0 / 1000.0, 1.0 / 300.0, 1.0 / 100.0};
  std::vector<double> amplitude_starts{0.05, 0.5, 0.95};
  /// Also start from the best single-component fits of either sign.
  bool single_component_seeds = true;
  detail::LmOptions lm{};
};

/// Deterministic multi-start fit of the dual-Boltzmann mixture.
inline TemperatureFit fit_dual_boltzmann(const SpinDistribution& p, const EnergyLadder& ladder,
                                         const FitOptions& options = {}) {
  detail::require(p.levels() == ladder.levels(), ErrorKind::dimension,
                  "distribution and ladder level counts differ");
  const double quantum = ladder.quantum();
  std::vector<double> reduced(ladder.energies.size());
  for (std::size_t n = 0; n < reduced.size(); ++n) reduced[n] = ladder.energies[n] / quantum;

  using detail::FitVector;
  const FitVector lower(0.0, 0.0, -detail::kThetaLimit);
  const FitVector upper(1.0, detail::kThetaLimit, 0.0);

  std::vector<FitVector> starts;
  for (double bp : options.beta_starts) {
    for (double bm : options.beta_starts) {
      for (double a : options.amplitude_starts) starts.emplace_back(a, bp * quantum, -bm * quantum);
    }
  }
  if (options.single_component_seeds) {
    detail::SingleModel single(p.values(), reduced);
    for (int sign : {+1, -1}) {
      using V1 = Eigen::Matrix<double, 1, 1>;
      const V1 lo(sign > 0 ? 0.0 : -detail::kThetaLimit);
      const V1 hi(sign > 0 ? detail::kThetaLimit : 0.0);
      detail::LmResult<1> best;
      for (double b : options.beta_starts) {
        auto r = detail::bounded_levenberg_marquardt<1>(single, V1(sign * b * quantum), lo, hi, options.lm);
        if (r.cost < best.cost) best = r;
      }
      starts.emplace_back(sign > 0 ? 1.0 : 0.0, sign > 0 ? best.x(0) : 0.0, sign > 0 ? 0.0 : best.x(0));
    }
  }

  detail::MixtureModel model(p.values(), reduced);
  auto spread = [](const FitVector& x) {
    return std::hypot(x(0) - 0.5, x(1), x(2));
  };
  std::optional<detail::LmResult<3>> best;
  double best_any = std::numeric_limits<double>::infinity();
  for (const auto& x0 : starts) {
    auto r = detail::bounded_levenberg_marquardt<3>(model, x0, lower, upper, options.lm);
    best_any = std::min(best_any, r.cost);
    if (!r.converged()) continue;
    if (!best) {
      best = std::move(r);
      continue;
    }
    const double tie = 1e-12 * std::max(r.cost, best->cost) + 1e-28;
    if (r.cost < best->cost - tie || (std::abs(r.cost - best->cost) <= tie && spread(r.x) < spread(best->x))) {
      best = std::move(r);
    }
  }
  if (!best) throw FitError("dual-Boltzmann fit: no start converged", best_any);

  TemperatureFit fit;
  fit.a = best->x(0);
  fit.beta_plus = best->x(1) / quantum;
  fit.beta_minus = best->x(2) / quantum;
  fit.residual = best->cost;
  fit.delta_a = detail::amplitude_uncertainty(best->x, lower, upper, best->jacobian, best->cost);
  fit.regime = classify_regime(fit);
  return fit;
}

inline std::vector<TemperatureFit> temperature_trace(const Trajectory& traj, const EnergyLadder& ladder,
                                                     const FitOptions& options = {}) {
  std::vector<TemperatureFit> fits;
  fits.reserve(traj.size());
  for (const auto& state : traj.states) fits.push_back(fit_dual_boltzmann(state, ladder, options));
  return fits;
}

}  // namespace qotto
