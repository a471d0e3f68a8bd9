#pragma once

// Reduced slow manifold, the invariance equation, and the asymptotic
// expansion h_eps = h0 + eps h1 + eps^2 h2 + ... of the slow manifold.

#include "cspkit/errors.hpp"
#include "cspkit/fastslow/system.hpp"
#include "cspkit/numcore/fd.hpp"
#include "cspkit/numcore/linalg.hpp"
#include "cspkit/numcore/newton.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <optional>
#include <vector>

namespace cspkit {

/// Axis-aligned box K in slow-variable space.
struct Box {
  Vec lower;
  Vec upper;

  /// Uniform grid with `per_axis` points along every axis (endpoints included).
  std::vector<Vec> grid(int per_axis) const {
    if (lower.size() != upper.size() || per_axis < 1) throw ContractError("Box::grid: bad box");
    const auto dim = lower.size();
    std::vector<Vec> pts;
    std::vector<int> idx(dim, 0);
    while (true) {
      Vec p(dim);
      for (Eigen::Index d = 0; d < dim; ++d) {
        const double t = per_axis == 1 ? 0.5 : static_cast<double>(idx[d]) / (per_axis - 1);
        p(d) = lower(d) + t * (upper(d) - lower(d));
      }
      pts.push_back(p);
      Eigen::Index d = 0;
      while (d < dim && ++idx[d] == per_axis) idx[d++] = 0;
      if (d == dim) break;
    }
    return pts;
  }
};

/// z = h0(y) solving g2(y, h0(y), 0) = 0 on the box K.
struct ReducedManifold {
  VecFn h0;
  Box domain;
  /// Optional analytic Dh0; finite differences of h0 otherwise.
  MatFn dh0;
};

/// Builds h0 by Newton iteration on g2(y, ., 0) = 0 from the system's
/// designated fast guess.
inline ReducedManifold reduced_manifold(const FastSlowSystem& sys, Box domain,
                                        const NewtonConfig& newton = {}) {
  VecFn h0 = [sys, newton](const Vec& y) {
    auto residual = [&](const Vec& z) { return sys.g2(y, z, 0.0); };
    auto jac = [&](const Vec& z) { return dz_g2(sys, y, z, 0.0); };
    return newton_solve_with_jacobian(residual, jac, sys.fast_guess(y), newton).root;
  };
  return {std::move(h0), std::move(domain), {}};
}

inline Mat dh0_at(const ReducedManifold& mani, const Vec& y, const FdConfig& fd) {
  if (mani.dh0) return mani.dh0(y);
  return jacobian_fd(mani.h0, y, fd);
}

struct ManifoldCheck {
  double max_residual = 0.0;
  /// Largest real part over the spectra of D_z g2(y, h0(y), 0) on the grid.
  double max_real_eigenvalue = -INFINITY;
  bool ok(double tol = 1e-12) const { return max_residual <= tol && max_real_eigenvalue < 0.0; }
};

/// Samples the root and normal-hyperbolicity conditions on a grid of K.
inline ManifoldCheck check_reduced_manifold(const FastSlowSystem& sys, const ReducedManifold& mani,
                                            int per_axis = 10, const FdConfig& fd = {}) {
  ManifoldCheck out;
  for (const Vec& y : mani.domain.grid(per_axis)) {
    const Vec z = mani.h0(y);
    out.max_residual = std::max(out.max_residual, sys.g2(y, z, 0.0).lpNorm<Eigen::Infinity>());
    Eigen::EigenSolver<Mat> es(dz_g2(sys, y, z, 0.0, fd), false);
    out.max_real_eigenvalue = std::max(out.max_real_eigenvalue, es.eigenvalues().real().maxCoeff());
  }
  return out;
}

/// Coefficients h_0 .. h_order of the slow-manifold expansion.
struct ExpansionCoeffs {
  int order = 0;
  std::vector<VecFn> h;

  /// sum_{j <= upto} eps^j h_j(y); upto defaults to the full order.
  Vec truncation(const Vec& y, double eps, std::optional<int> upto = std::nullopt) const {
    const int top = upto.value_or(order);
    if (top > order || top < 0) throw ContractError("ExpansionCoeffs: truncation order out of range");
    Vec sum = h[0](y);
    double power = 1.0;
    for (int j = 1; j <= top; ++j) {
      power *= eps;
      sum += power * h[j](y);
    }
    return sum;
  }
};

namespace detail {
inline Eigen::PartialPivLU<Mat> hyperbolic_lu(const FastSlowSystem& sys, const Vec& y,
                                              const Vec& z0, const FdConfig& fd) {
  try {
    return checked_lu(dz_g2(sys, y, z0, 0.0, fd), "(D_z g2)_0");
  } catch (const SingularityError& e) {
    throw SingularityError(std::string("loss of normal hyperbolicity: ") + e.what());
  }
}
}  // namespace detail

/// h1(y) = -((D_z g2)_0)^{-1} [ (D_eps g2)_0 - (Dh0) g_{1,0} ].
inline Vec expansion_h1(const FastSlowSystem& sys, const ReducedManifold& mani, const Vec& y,
                        const FdConfig& fd = {}) {
  const Vec z0 = mani.h0(y);
  const auto lu = detail::hyperbolic_lu(sys, y, z0, fd);
  const Vec rhs = deps_g2(sys, y, z0, 0.0, fd) - dh0_at(mani, y, fd) * sys.g1(y, z0, 0.0);
  return -lu.solve(rhs);
}

/// h2(y) from the O(eps^2) invariance equation:
///   (D_z g2)_0 h2 + 1/2 (D_z^2 g2)_0(h1, h1) + (D_z D_eps g2)_0 h1 + 1/2 (D_eps^2 g2)_0
///     - (Dh1) g_{1,0} - (Dh0) ((D_z g1)_0 h1 + (D_eps g1)_0) = 0.
/// Second partials come from second differences along h1 and eps; Dh1 from
/// differentiating h1_fn.
inline Vec expansion_h2(const FastSlowSystem& sys, const ReducedManifold& mani, const VecFn& h1_fn,
                        const Vec& y, const FdConfig& fd = {}) {
  const Vec z0 = mani.h0(y);
  const Vec h1 = h1_fn(y);
  const auto lu = detail::hyperbolic_lu(sys, y, z0, fd);

  // Polarization: d^2/dt^2 g2(y, z0 + t h1, t) = Dzz(h1,h1) + 2 DzDe h1 + Dee.
  const Vec dzz = second_derivative_fd([&](double t) { return sys.g2(y, Vec(z0 + t * h1), 0.0); }, 0.0, fd);
  const Vec dee = second_derivative_fd([&](double t) { return sys.g2(y, z0, t); }, 0.0, fd);
  const Vec mixed_all =
      second_derivative_fd([&](double t) { return sys.g2(y, Vec(z0 + t * h1), t); }, 0.0, fd);
  const Vec dzde_h1 = 0.5 * (mixed_all - dzz - dee);

  const Vec g10 = sys.g1(y, z0, 0.0);
  const Mat dh1 = jacobian_fd(h1_fn, y, fd);
  const Vec g11 = dz_g1(sys, y, z0, 0.0, fd) * h1 + deps_g1(sys, y, z0, 0.0, fd);

  const Vec rhs = 0.5 * dzz + dzde_h1 + 0.5 * dee - dh1 * g10 - dh0_at(mani, y, fd) * g11;
  return -lu.solve(rhs);
}

/// Numerically assembled expansion to order 2 (h1 and h2 built on demand).
inline ExpansionCoeffs numeric_expansion(const FastSlowSystem& sys, const ReducedManifold& mani,
                                         const FdConfig& fd = {}) {
  VecFn h1 = [sys, mani, fd](const Vec& y) { return expansion_h1(sys, mani, y, fd); };
  VecFn h2 = [sys, mani, h1, fd](const Vec& y) { return expansion_h2(sys, mani, h1, y, fd); };
  return {2, {mani.h0, h1, h2}};
}

/// g2(y, h(y), eps) - eps (Dh)(y) g1(y, h(y), eps); zero iff the graph of h
/// is invariant at y.
inline Vec invariance_residual(const FastSlowSystem& sys, const VecFn& h, const Vec& y, double eps,
                               const FdConfig& fd = {}) {
  const Vec z = h(y);
  const Mat dh = jacobian_fd(h, y, fd);
  return sys.g2(y, z, eps) - eps * dh * sys.g1(y, z, eps);
}

}  // namespace cspkit
