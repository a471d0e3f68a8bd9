#pragma once

// A linear fast-slow system with a flat reduced manifold:
//   y' = -eps y,   z' = -z + eps y.
// Its slow manifold z = eps/(1 - eps) y is exactly linear, so every
// manifold method reproduces it and h_j = y for all j >= 1.

#include "cspkit/fastslow/expansion.hpp"
#include "cspkit/fastslow/system.hpp"

namespace cspkit {

inline FastSlowSystem linear_test_system(int dim = 1) {
  if (dim < 1) throw ParameterError("linear_test_system: dimension must be positive");
  FieldFn g1 = [](const Vec& y, const Vec&, double) -> Vec { return -y; };
  FieldFn g2 = [](const Vec& y, const Vec& z, double eps) -> Vec { return -z + eps * y; };
  AnalyticPartials partials;
  partials.dy_g1 = [dim](const Vec&, const Vec&, double) -> Mat { return -Mat::Identity(dim, dim); };
  partials.dz_g1 = [dim](const Vec&, const Vec&, double) -> Mat { return Mat::Zero(dim, dim); };
  partials.dy_g2 = [dim](const Vec&, const Vec&, double eps) -> Mat { return eps * Mat::Identity(dim, dim); };
  partials.dz_g2 = [dim](const Vec&, const Vec&, double) -> Mat { return -Mat::Identity(dim, dim); };
  partials.deps_g1 = [dim](const Vec&, const Vec&, double) -> Vec { return Vec::Zero(dim); };
  partials.deps_g2 = [](const Vec& y, const Vec&, double) -> Vec { return y; };
  return FastSlowSystem("linear", dim, dim, std::move(g1), std::move(g2)).with_partials(std::move(partials));
}

inline ExpansionCoeffs linear_test_coeffs() {
  VecFn h0 = [](const Vec& y) -> Vec { return Vec::Zero(y.size()); };
  VecFn hj = [](const Vec& y) -> Vec { return y; };
  return {2, {h0, hj, hj}};
}

/// The exact slow manifold z = eps/(1 - eps) y.
inline Vec linear_test_manifold(const Vec& y, double eps) { return eps / (1.0 - eps) * y; }

}  // namespace cspkit
