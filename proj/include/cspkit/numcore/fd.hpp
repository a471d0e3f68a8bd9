#pragma once

// Central finite differences with optional one-level Richardson extrapolation.
//
// Everything above this layer (Lambda assembly, the basis recursion, the
// expansion oracle) nests these differences, so the defaults are tuned for
// the fourth-order scheme: the step is eps_mach^(1/5) relative to the
// coordinate magnitude.

#include "cspkit/errors.hpp"
#include "cspkit/numcore/types.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace cspkit {

struct FdConfig {
  double rel_step = std::pow(std::numeric_limits<double>::epsilon(), 0.2);
  double abs_floor = 1e-4;
  bool richardson = true;

  void validate() const {
    if (!(rel_step > 0.0) || !(abs_floor > 0.0)) {
      throw ContractError("FdConfig: rel_step and abs_floor must be positive");
    }
  }

  double step_for(double magnitude) const {
    return std::max(rel_step * std::abs(magnitude), abs_floor);
  }
};

namespace detail {

// Combines the two central quotients D(h) and D(h/2) into the extrapolated
// estimate, or returns D(h) alone when Richardson is off.
template <typename Quotient>
auto central_estimate(Quotient&& quotient, double h, bool richardson) {
  auto coarse = quotient(h);
  if (!richardson) return coarse;
  auto fine = quotient(0.5 * h);
  return decltype(coarse)((4.0 * fine - coarse) / 3.0);
}

}  // namespace detail

/// Jacobian of f at x by central differences, column by column.
/// Throws NonFiniteError carrying the perturbed coordinate when f blows up.
template <typename F>
Mat jacobian_fd(F&& f, const Vec& x, const FdConfig& cfg = {}) {
  cfg.validate();
  const Vec f0 = f(x);
  if (!f0.allFinite()) {
    throw NonFiniteError("jacobian_fd: non-finite value at base point", -1);
  }
  Mat jac(f0.size(), x.size());
  Vec xp = x;
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    auto quotient = [&](double h) -> Vec {
      xp(j) = x(j) + h;
      Vec fp = f(xp);
      xp(j) = x(j) - h;
      Vec fm = f(xp);
      xp(j) = x(j);
      if (!fp.allFinite() || !fm.allFinite()) {
        throw NonFiniteError("jacobian_fd: non-finite value when perturbing coordinate " +
                                 std::to_string(j),
                             static_cast<int>(j));
      }
      return (fp - fm) / (2.0 * h);
    };
    jac.col(j) = detail::central_estimate(quotient, cfg.step_for(x(j)), cfg.richardson);
  }
  return jac;
}

/// (DF)(x) v for a matrix-valued F, i.e. dF/dt along the direction v.
/// The spatial step is set from |x| and divided by |v|, so the result is
/// accurate even when v is tiny (as g is near a slow manifold).
template <typename F>
Mat directional_derivative_fd(F&& fn, const Vec& x, const Vec& v, const FdConfig& cfg = {}) {
  cfg.validate();
  const double vnorm = v.norm();
  if (vnorm == 0.0) {
    Mat f0 = fn(x);
    return Mat::Zero(f0.rows(), f0.cols());
  }
  const double h = cfg.step_for(x.lpNorm<Eigen::Infinity>()) / vnorm;
  auto quotient = [&](double t) -> Mat {
    Mat fp = fn(Vec(x + t * v));
    Mat fm = fn(Vec(x - t * v));
    if (!fp.allFinite() || !fm.allFinite()) {
      throw NonFiniteError("directional_derivative_fd: non-finite value along direction", -1);
    }
    return (fp - fm) / (2.0 * t);
  };
  return detail::central_estimate(quotient, h, cfg.richardson);
}

/// Second derivative of a vector-valued function of one scalar parameter at t0.
template <typename F>
Vec second_derivative_fd(F&& fn, double t0, const FdConfig& cfg = {}) {
  cfg.validate();
  const Vec f0 = fn(t0);
  auto quotient = [&](double h) -> Vec {
    return (fn(t0 + h) - 2.0 * f0 + fn(t0 - h)) / (h * h);
  };
  // Second differences lose twice the digits to roundoff, so the step is
  // widened from eps^(1/5) to eps^(1/6) of the parameter scale.
  const double h = std::pow(cfg.rel_step, 5.0 / 6.0) * std::max(std::abs(t0), 1.0);
  return detail::central_estimate(quotient, h, cfg.richardson);
}

}  // namespace cspkit
