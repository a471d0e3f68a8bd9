#pragma once

// Michaelis-Menten-Henri enzyme kinetics in fast-slow form:
//   s' = eps (-s + (s + kappa - lambda) c),   c' = s - (s + kappa) c,
// with slow substrate s and fast complex c.

#include "cspkit/errors.hpp"
#include "cspkit/fastslow/expansion.hpp"
#include "cspkit/fastslow/system.hpp"

#include <cmath>

namespace cspkit {

struct MmhParams {
  double kappa = 2.0;
  double lambda = 1.0;

  void validate() const {
    if (!(lambda > 0.0) || !(kappa > lambda)) {
      throw ParameterError("MMH parameters require kappa > lambda > 0 (got kappa=" +
                           std::to_string(kappa) + ", lambda=" + std::to_string(lambda) + ")");
    }
  }
};

inline FastSlowSystem mmh_system(double kappa, double lambda) {
  const MmhParams p{kappa, lambda};
  p.validate();
  auto scalar = [](double v) { return Vec::Constant(1, v); };
  auto one_by_one = [](double v) { return Mat::Constant(1, 1, v); };

  FieldFn g1 = [p, scalar](const Vec& y, const Vec& z, double) {
    return scalar(-y(0) + (y(0) + p.kappa - p.lambda) * z(0));
  };
  FieldFn g2 = [p, scalar](const Vec& y, const Vec& z, double) {
    return scalar(y(0) - (y(0) + p.kappa) * z(0));
  };
  AnalyticPartials partials;
  partials.dy_g1 = [one_by_one](const Vec&, const Vec& z, double) { return one_by_one(z(0) - 1.0); };
  partials.dz_g1 = [p, one_by_one](const Vec& y, const Vec&, double) {
    return one_by_one(y(0) + p.kappa - p.lambda);
  };
  partials.dy_g2 = [one_by_one](const Vec&, const Vec& z, double) { return one_by_one(1.0 - z(0)); };
  partials.dz_g2 = [p, one_by_one](const Vec& y, const Vec&, double) {
    return one_by_one(-(y(0) + p.kappa));
  };
  partials.deps_g1 = [](const Vec&, const Vec&, double) { return Vec::Zero(1); };
  partials.deps_g2 = [](const Vec&, const Vec&, double) { return Vec::Zero(1); };

  return FastSlowSystem("mmh", 1, 1, std::move(g1), std::move(g2))
      .with_partials(std::move(partials))
      .with_fast_guess([p](const Vec& y) { return Vec::Constant(1, y(0) / (y(0) + p.kappa)); });
}

/// h0 = s/(s+kappa) on [s_lo, s_hi].
inline ReducedManifold mmh_reduced_manifold(double kappa, double lambda, double s_lo = 0.2,
                                            double s_hi = 5.0) {
  MmhParams{kappa, lambda}.validate();
  Box box{Vec::Constant(1, s_lo), Vec::Constant(1, s_hi)};
  VecFn h0 = [kappa](const Vec& y) { return Vec::Constant(1, y(0) / (y(0) + kappa)); };
  return {std::move(h0), std::move(box), {}};
}

/// Closed-form h0, h1, h2 of the MMH slow manifold.
inline ExpansionCoeffs mmh_h_coeffs(double kappa, double lambda) {
  MmhParams{kappa, lambda}.validate();
  const double k = kappa;
  const double l = lambda;
  VecFn h0 = [k](const Vec& y) {
    const double s = y(0);
    return Vec::Constant(1, s / (s + k));
  };
  VecFn h1 = [k, l](const Vec& y) {
    const double s = y(0);
    return Vec::Constant(1, k * l * s / std::pow(s + k, 4));
  };
  VecFn h2 = [k, l](const Vec& y) {
    const double s = y(0);
    return Vec::Constant(1, k * l * s * (2 * k * l - 3 * l * s - k * s - k * k) / std::pow(s + k, 7));
  };
  return {2, {h0, h1, h2}};
}

}  // namespace cspkit
