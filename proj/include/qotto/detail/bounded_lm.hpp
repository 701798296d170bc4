#pragma once

// Box-constrained Levenberg-Marquardt for small dense problems.
//
// Parameters sitting on a bound whose gradient points out of the box are
// held fixed for the step (active set); trial points are projected back
// into the box.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

namespace qotto::detail {

struct LmOptions {
  int max_iterations = 400;
  double gradient_tolerance = 1e-15;
  double step_tolerance = 1e-15;
  double cost_tolerance = 1e-15;  // relative decrease
  double cost_floor = 1e-32;      // absolute
};

enum class LmStatus { small_gradient, small_step, small_decrease, exact_fit, stalled, max_iterations };

template <int P>
struct LmResult {
  Eigen::Matrix<double, P, 1> x = Eigen::Matrix<double, P, 1>::Zero();
  double cost = std::numeric_limits<double>::infinity();  // sum of squared residuals
  Eigen::VectorXd residual;
  Eigen::Matrix<double, Eigen::Dynamic, P> jacobian;
  LmStatus status = LmStatus::max_iterations;
  int iterations = 0;

  bool converged() const { return status != LmStatus::max_iterations; }
};

/// `model(x, r, J)` fills residuals r (size m) and Jacobian J (m x P).
template <int P, class Model>
LmResult<P> bounded_levenberg_marquardt(Model&& model, Eigen::Matrix<double, P, 1> x,
                                        const Eigen::Matrix<double, P, 1>& lower,
                                        const Eigen::Matrix<double, P, 1>& upper,
                                        const LmOptions& opt = {}) {
  using Vec = Eigen::Matrix<double, P, 1>;
  using Mat = Eigen::Matrix<double, P, P>;

  x = x.cwiseMax(lower).cwiseMin(upper);
  LmResult<P> res;
  Eigen::VectorXd r;
  Eigen::Matrix<double, Eigen::Dynamic, P> jac;
  model(x, r, jac);
  double cost = r.squaredNorm();
  double mu = -1.0;

  Eigen::VectorXd r_trial;
  Eigen::Matrix<double, Eigen::Dynamic, P> jac_trial;

  auto finish = [&](LmStatus status, int it) {
    res.x = x;
    res.cost = cost;
    res.residual = r;
    res.jacobian = jac;
    res.status = status;
    res.iterations = it;
    return res;
  };

  for (int it = 0; it < opt.max_iterations; ++it) {
    if (cost <= opt.cost_floor) return finish(LmStatus::exact_fit, it);

    const Vec g = jac.transpose() * r;
    const Mat h = jac.transpose() * jac;

    std::array<bool, static_cast<std::size_t>(P)> free{};
    double gmax = 0.0;
    for (int i = 0; i < P; ++i) {
      const bool pinned_low = x(i) <= lower(i) && g(i) > 0.0;
      const bool pinned_high = x(i) >= upper(i) && g(i) < 0.0;
      free[static_cast<std::size_t>(i)] = !(pinned_low || pinned_high);
      if (free[static_cast<std::size_t>(i)]) gmax = std::max(gmax, std::abs(g(i)));
    }
    if (gmax <= opt.gradient_tolerance) return finish(LmStatus::small_gradient, it);

    if (mu < 0.0) mu = 1e-3 * std::max(h.diagonal().maxCoeff(), 1e-30);

    bool accepted = false;
    while (!accepted) {
      Mat a = h;
      Vec rhs = -g;
      for (int i = 0; i < P; ++i) {
        if (!free[static_cast<std::size_t>(i)]) {
          a.row(i).setZero();
          a.col(i).setZero();
          a(i, i) = 1.0;
          rhs(i) = 0.0;
        } else {
          a(i, i) += mu * std::max(h(i, i), 1e-30);
        }
      }
      const Vec delta = a.ldlt().solve(rhs);
      const Vec x_trial = (x + delta).cwiseMax(lower).cwiseMin(upper);
      const double step = (x_trial - x).norm();
      if (!(step > opt.step_tolerance * (x.norm() + opt.step_tolerance))) {
        return finish(LmStatus::small_step, it);
      }
      model(x_trial, r_trial, jac_trial);
      const double cost_trial = r_trial.squaredNorm();
      if (std::isfinite(cost_trial) && cost_trial < cost) {
        const double decrease = (cost - cost_trial) / cost;
        x = x_trial;
        std::swap(r, r_trial);
        std::swap(jac, jac_trial);
        cost = cost_trial;
        mu = std::max(mu / 3.0, 1e-20);
        accepted = true;
        if (decrease <= opt.cost_tolerance) return finish(LmStatus::small_decrease, it + 1);
      } else {
        mu *= 4.0;
        if (mu > 1e20) return finish(LmStatus::stalled, it);
      }
    }
  }
  return finish(LmStatus::max_iterations, opt.max_iterations);
}

}  // namespace qotto::detail
