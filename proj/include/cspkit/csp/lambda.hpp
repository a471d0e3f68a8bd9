#pragma once

// Lambda = B (Dg) A - B dA/dt, the generator of amplitude dynamics, and the
// two basis refinements built on it.

#include "cspkit/csp/basis.hpp"
#include "cspkit/errors.hpp"
#include "cspkit/fastslow/system.hpp"
#include "cspkit/numcore/fd.hpp"
#include "cspkit/numcore/linalg.hpp"

#include <sstream>
#include <string>

namespace cspkit {

struct CspOptions {
  FdConfig fd;
  /// Dropping the dA/dt term turns Lambda into a similarity transform of Dg,
  /// which degrades CSP to ILDM accuracy. Only for comparison studies.
  bool time_derivative = true;
  double max_condition = kMaxCondition;
};

namespace detail {

inline std::string describe_state(const Vec& x, double eps) {
  std::ostringstream os;
  os.precision(17);
  os << "x=(";
  for (Eigen::Index i = 0; i < x.size(); ++i) os << (i ? ", " : "") << x(i);
  os << "), eps=" << eps;
  return os.str();
}

/// Lambda at x for a basis already evaluated there.
inline Mat lambda_matrix(const FastSlowSystem& sys, const BlockBasis& basis, const BasisPoint& bp,
                         const Vec& x, double eps, const CspOptions& cfg) {
  if (!bp.a.allFinite() || !bp.b.allFinite()) {
    throw NonFiniteError("lambda_assemble: non-finite basis at " + describe_state(x, eps), -1);
  }
  Mat lambda = bp.b * jacobian_g(sys, x, eps, cfg.fd) * bp.a;
  if (cfg.time_derivative && !basis.is_constant()) {
    const Vec g = eval_g(sys, x, eps);
    const Mat da_dt = directional_derivative_fd(
        [&](const Vec& xx) { return basis.a(xx, eps); }, x, g, cfg.fd);
    lambda -= bp.b * da_dt;
  }
  return lambda;
}

inline UpdateMatrices update_blocks(const LambdaBlocks& lam, const Mat& previous_p, const Vec& x,
                                    double eps, const CspOptions& cfg) {
  Eigen::PartialPivLU<Mat> lu;
  try {
    lu = checked_lu(lam.l11, "Lambda^11", cfg.max_condition);
  } catch (const SingularityError& e) {
    throw SingularityError(std::string("fast block of Lambda is singular at ") +
                           describe_state(x, eps) + ": " + e.what());
  }
  UpdateMatrices upd;
  upd.u = lu.solve(lam.l12);
  // L = Lambda^21 (Lambda^11)^{-1}  <=>  L^T = (Lambda^11)^{-T} (Lambda^21)^T
  upd.l = Eigen::PartialPivLU<Mat>(lam.l11.transpose()).solve(lam.l21.transpose()).transpose();
  upd.p = previous_p + upd.u;
  return upd;
}

}  // namespace detail

/// Lambda blocks of `basis` at (y, z, eps). The dA/dt correction is a
/// directional difference of the basis evaluator along g; it is exactly zero
/// for constant bases.
inline LambdaBlocks lambda_assemble(const FastSlowSystem& sys, const BlockBasis& basis,
                                    const Vec& y, const Vec& z, double eps,
                                    const CspOptions& cfg = {}) {
  const Vec x = sys.join(y, z);
  return LambdaBlocks::split(detail::lambda_matrix(sys, basis, basis(x, eps), x, eps, cfg),
                             basis.layout());
}

inline LambdaBlocks lambda_assemble(const FastSlowSystem& sys, const BlockBasis& basis,
                                    const Vec& x, double eps, const CspOptions& cfg = {}) {
  return lambda_assemble(sys, basis, sys.slow_part(x), sys.fast_part(x), eps, cfg);
}

/// Full (two-step) refinement:
///   A^(q+1) = A^(q) (I - U)(I + L),  B_(q+1) = (I - L)(I + U) B_(q),
/// with U = (L^11)^{-1} L^12 and L = L^21 (L^11)^{-1} taken from Lambda_(q)
/// at the same state.
inline BlockBasis update_full(const BlockBasis& basis, const FastSlowSystem& sys,
                              const CspOptions& cfg = {}) {
  const BlockLayout lay = basis.layout();
  auto eval = [basis, sys, cfg, lay](const Vec& x, double eps) {
    const BasisPoint base = basis(x, eps);
    const auto lam =
        LambdaBlocks::split(detail::lambda_matrix(sys, basis, base, x, eps, cfg), lay);
    UpdateMatrices upd = detail::update_blocks(lam, base.update.p, x, eps, cfg);
    const Mat id = Mat::Identity(lay.dim(), lay.dim());
    const Mat u = lay.embed_upper(upd.u);
    const Mat l = lay.embed_lower(upd.l);
    return BasisPoint{base.a * (id - u) * (id + l), (id - l) * (id + u) * base.b, std::move(upd)};
  };
  return BlockBasis(lay, basis.q() + 1, Scheme::full, basis.initial_a(), basis.initial_b(),
                    std::move(eval));
}

/// One-step refinement A^(q+1) = A^(q)(I - U), B_(q+1) = (I + U) B_(q).
/// The running sum P = sum_j U_j is carried along so that the explicit form
/// A^(0)(I - P), (I + P) B_(0) is available from BlockBasis::explicit_form.
inline BlockBasis update_one_step(const BlockBasis& basis, const FastSlowSystem& sys,
                                  const CspOptions& cfg = {}) {
  const BlockLayout lay = basis.layout();
  auto eval = [basis, sys, cfg, lay](const Vec& x, double eps) {
    const BasisPoint base = basis(x, eps);
    const auto lam =
        LambdaBlocks::split(detail::lambda_matrix(sys, basis, base, x, eps, cfg), lay);
    UpdateMatrices upd = detail::update_blocks(lam, base.update.p, x, eps, cfg);
    upd.l.setZero();
    const Mat id = Mat::Identity(lay.dim(), lay.dim());
    const Mat u = lay.embed_upper(upd.u);
    return BasisPoint{base.a * (id - u), (id + u) * base.b, std::move(upd)};
  };
  return BlockBasis(lay, basis.q() + 1, Scheme::one_step, basis.initial_a(), basis.initial_b(),
                    std::move(eval));
}

inline BlockBasis update(const BlockBasis& basis, const FastSlowSystem& sys, Scheme scheme,
                         const CspOptions& cfg = {}) {
  return scheme == Scheme::full ? update_full(basis, sys, cfg) : update_one_step(basis, sys, cfg);
}

}  // namespace cspkit
