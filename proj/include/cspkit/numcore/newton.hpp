#pragma once

#include "cspkit/errors.hpp"
#include "cspkit/numcore/fd.hpp"
#include "cspkit/numcore/linalg.hpp"
#include "cspkit/numcore/types.hpp"

#include <string>
#include <vector>

namespace cspkit {

struct NewtonConfig {
  double residual_tol = 1e-14;
  int max_iters = 50;
  /// Initial step-length factor; halved (up to max_halvings times) whenever
  /// a step increases the residual norm.
  double damping = 1.0;
  int max_halvings = 8;

  void validate() const {
    if (!(residual_tol > 0.0)) throw ContractError("NewtonConfig: residual_tol must be positive");
    if (max_iters <= 0) throw ContractError("NewtonConfig: max_iters must be positive");
    if (!(damping > 0.0 && damping <= 1.0)) {
      throw ContractError("NewtonConfig: damping must lie in (0, 1]");
    }
  }
};

struct NewtonResult {
  Vec root;
  double residual_norm = 0.0;
  int iterations = 0;
};

namespace detail {

template <typename Residual, typename Jacobian>
NewtonResult newton_iterate(Residual&& residual, Jacobian&& jacobian, const Vec& z0,
                            const NewtonConfig& cfg) {
  cfg.validate();
  Vec z = z0;
  Vec r = residual(z);
  if (!r.allFinite()) {
    throw NonFiniteError("newton_solve: residual is non-finite at the initial guess", -1);
  }
  double rnorm = r.norm();
  std::vector<double> trace{rnorm};
  int iter = 0;
  while (rnorm > cfg.residual_tol) {
    if (iter == cfg.max_iters) {
      throw NonConvergenceError("newton_solve: no convergence after " +
                                    std::to_string(cfg.max_iters) +
                                    " iterations, residual " + std::to_string(rnorm),
                                rnorm, trace);
    }
    ++iter;
    const Mat jac = jacobian(z);
    const Vec step = checked_lu(jac, "newton_solve Jacobian").solve(r);
    double lambda = cfg.damping;
    Vec trial = z - lambda * step;
    Vec rt = residual(trial);
    for (int k = 0; k < cfg.max_halvings && !(rt.allFinite() && rt.norm() <= rnorm); ++k) {
      lambda *= 0.5;
      trial = z - lambda * step;
      rt = residual(trial);
    }
    if (!rt.allFinite()) {
      throw NonFiniteError("newton_solve: residual became non-finite", -1);
    }
    // A step that no longer moves z cannot reduce the residual further.
    if (trial == z) {
      trace.push_back(rnorm);
      throw NonConvergenceError("newton_solve: stagnated at residual " + std::to_string(rnorm),
                                rnorm, trace);
    }
    z = std::move(trial);
    r = std::move(rt);
    rnorm = r.norm();
    trace.push_back(rnorm);
  }
  return {z, rnorm, iter};
}

}  // namespace detail

/// Damped Newton iteration with a finite-difference Jacobian.
template <typename Residual>
NewtonResult newton_solve(Residual&& residual, const Vec& z0, const NewtonConfig& cfg = {},
                          const FdConfig& fd = {}) {
  auto jac = [&](const Vec& z) { return jacobian_fd(residual, z, fd); };
  return detail::newton_iterate(residual, jac, z0, cfg);
}

/// Damped Newton iteration with an analytic Jacobian.
template <typename Residual, typename Jacobian>
NewtonResult newton_solve_with_jacobian(Residual&& residual, Jacobian&& jacobian, const Vec& z0,
                                        const NewtonConfig& cfg = {}) {
  return detail::newton_iterate(residual, jacobian, z0, cfg);
}

}  // namespace cspkit
