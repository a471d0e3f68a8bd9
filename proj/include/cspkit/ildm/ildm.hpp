#pragma once

// ILDM: the graph z(y) on which the fast Schur vectors are orthogonal to g,
// and the CSP iteration with the dA/dt term dropped, which has the same
// first-order accuracy.

#include "cspkit/csp/chain.hpp"
#include "cspkit/errors.hpp"
#include "cspkit/fastslow/system.hpp"
#include "cspkit/ildm/schur.hpp"
#include "cspkit/numcore/newton.hpp"

namespace cspkit {

namespace detail {

// Q_f is only defined up to an orthogonal change of frame, so Q_f^T g is not
// a smooth function of z. The projector Q_f Q_f^T is; reading it in the fixed
// frame of the starting point gives a smooth residual with the same zeros
// near that point.
inline Vec ildm_residual(const FastSlowSystem& sys, const Vec& y, const Vec& z, double eps,
                         const Mat& frame, const FdConfig& fd) {
  const SchurSplit split = schur_ordered(sys, y, z, eps, fd);
  return frame.transpose() * (split.q_fast * (split.q_fast.transpose() * eval_g(sys, y, z, eps)));
}

}  // namespace detail

/// Fast coordinate of the ILDM over the slow point y, starting Newton from
/// the system's designated fast branch.
inline Vec ildm_solve(const FastSlowSystem& sys, const Vec& y, double eps,
                      const NewtonConfig& newton = {}, const FdConfig& fd = {}) {
  if (y.size() != sys.slow_dim()) throw ContractError("ildm_solve: slow point has wrong dimension");
  const Vec z0 = sys.fast_guess(y);
  const Mat frame = schur_ordered(sys, y, z0, eps, fd).q_fast;
  auto residual = [&](const Vec& z) { return detail::ildm_residual(sys, y, z, eps, frame, fd); };
  try {
    return newton_solve(residual, z0, newton, fd).root;
  } catch (const NonConvergenceError& e) {
    throw NonConvergenceError(std::string("ILDM solve failed at ") + detail::describe_state(sys.join(y, z0), eps) +
                                  ": " + e.what(),
                              e.final_residual(), e.trace());
  }
}

/// The same chain with the dA/dt term removed from every Lambda.
inline CspChain degraded_chain(const CspChain& chain) {
  ChainOptions opts = chain.options();
  opts.csp.time_derivative = false;
  return chain.with_options(opts);
}

/// psi_(q) of the degraded iteration. Reuses `chain` when it already omits
/// the time derivative; otherwise builds a fresh degraded chain, so callers
/// sweeping many points should hold on to degraded_chain() themselves.
inline Vec csp_no_time_derivative(const CspChain& chain, int q, const Vec& y, double eps) {
  if (!chain.options().csp.time_derivative) return chain.psi(q, y, eps);
  return degraded_chain(chain).psi(q, y, eps);
}

}  // namespace cspkit
