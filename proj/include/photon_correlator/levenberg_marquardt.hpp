#pragma once

// Damped Gauss-Newton (Levenberg-Marquardt) least squares with Marquardt
// diagonal scaling, optional fixed parameters and box bounds.
//
// A problem supplies
//   Eigen::Index residual_count() const;
//   void residuals(const Eigen::VectorXd& p, Eigen::VectorXd& r) const;
//   void jacobian(const Eigen::VectorXd& p, Eigen::MatrixXd& J) const;
// and minimizes 0.5 * |r(p)|^2.

#include <cmath>
#include <limits>
#include <vector>

#include <Eigen/Dense>

namespace phc {

struct LmOptions {
  int max_iterations = 200;
  double relative_step_tolerance = 1e-8;
  double initial_lambda = 1e-3;
  double max_lambda = 1e16;
  double cost_tolerance = 1e-24;  // stop once cost falls below this fraction of the start
};

struct LmResult {
  Eigen::VectorXd params;
  double cost = 0.0;  // 0.5 * sum of squared residuals
  int iterations = 0;
  bool converged = false;
};

struct LmBounds {
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;
  std::vector<bool> fixed;

  static LmBounds unbounded(Eigen::Index n) {
    LmBounds b;
    b.lower = Eigen::VectorXd::Constant(n, -std::numeric_limits<double>::infinity());
    b.upper = Eigen::VectorXd::Constant(n, std::numeric_limits<double>::infinity());
    b.fixed.assign(static_cast<std::size_t>(n), false);
    return b;
  }
};

template <typename Problem>
LmResult levenberg_marquardt(const Problem& problem, Eigen::VectorXd p, const LmBounds& bounds,
                             const LmOptions& opt = {}) {
  const Eigen::Index n = p.size();
  const Eigen::Index m = problem.residual_count();
  p = p.cwiseMax(bounds.lower).cwiseMin(bounds.upper);

  Eigen::VectorXd r(m), r_try(m);
  Eigen::MatrixXd J(m, n);
  problem.residuals(p, r);
  double cost = 0.5 * r.squaredNorm();
  const double cost_floor = opt.cost_tolerance * cost;

  LmResult res;
  double lambda = opt.initial_lambda;
  bool need_jacobian = true;
  Eigen::MatrixXd A(n, n);
  Eigen::VectorXd g(n);

  for (int it = 1; it <= opt.max_iterations; ++it) {
    res.iterations = it;
    if (need_jacobian) {
      problem.jacobian(p, J);
      for (Eigen::Index j = 0; j < n; ++j) {
        if (bounds.fixed[static_cast<std::size_t>(j)]) J.col(j).setZero();
      }
      A = J.transpose() * J;
      g = J.transpose() * r;
      need_jacobian = false;
    }

    Eigen::MatrixXd damped = A;
    for (Eigen::Index j = 0; j < n; ++j) {
      const double d = A(j, j) > 0.0 ? A(j, j) : 1.0;
      damped(j, j) += lambda * d;
    }
    Eigen::VectorXd step = damped.ldlt().solve(-g);
    Eigen::VectorXd trial = (p + step).cwiseMax(bounds.lower).cwiseMin(bounds.upper);
    for (Eigen::Index j = 0; j < n; ++j) {
      if (bounds.fixed[static_cast<std::size_t>(j)]) trial(j) = p(j);
    }
    step = trial - p;

    bool small = true;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (std::abs(step(j)) > opt.relative_step_tolerance * (std::abs(p(j)) + opt.relative_step_tolerance)) {
        small = false;
        break;
      }
    }

    problem.residuals(trial, r_try);
    const double trial_cost = 0.5 * r_try.squaredNorm();
    if (std::isfinite(trial_cost) && trial_cost <= cost) {
      p = trial;
      r = r_try;
      cost = trial_cost;
      lambda = std::max(lambda / 10.0, 1e-12);
      need_jacobian = true;
    } else {
      lambda *= 10.0;
    }
    if (cost <= cost_floor) {
      res.converged = true;  // residual eliminated to working precision
      break;
    }
    if (small || !step.allFinite()) {
      res.converged = step.allFinite();
      break;
    }
    if (lambda > opt.max_lambda) {
      // No descent direction left at working precision.
      res.converged = true;
      break;
    }
  }
  res.params = p;
  res.cost = cost;
  return res;
}

}  // namespace phc
