#pragma once

// Structural diagnostics of the CSP iteration: the transition matrix between
// the full and one-step bases, and numeric checks of the algebraic
// identities the bases and Lambda must satisfy.

#include "cspkit/csp/basis.hpp"
#include "cspkit/csp/chain.hpp"
#include "cspkit/csp/lambda.hpp"
#include "cspkit/fastslow/system.hpp"
#include "cspkit/numcore/fd.hpp"

namespace cspkit {

/// Blocks of T_(q) with B_(q) = T_(q) B~_(q); t11 n x n, t12 n x m, t21 m x n, t22 m x m.
struct TransitionMatrix {
  Mat t11, t12, t21, t22;

  Mat assemble() const {
    Mat out(t11.rows() + t21.rows(), t11.cols() + t12.cols());
    out << t11, t12, t21, t22;
    return out;
  }
};

/// T_(q) = B_(q) A~^(q) at (y, psi_(q-1)(y, eps)), the order-(q-1) manifold of
/// the full scheme. T_(0) = I.
inline TransitionMatrix transition_matrix(const CspChain& chain, int q, const Vec& y, double eps) {
  const FastSlowSystem& sys = chain.system();
  const BlockLayout lay{sys.slow_dim(), sys.fast_dim()};
  const CspChain full = chain.scheme() == Scheme::full
                            ? chain
                            : chain.with_options([&] {
                                auto o = chain.options();
                                o.scheme = Scheme::full;
                                return o;
                              }());
  const Vec x = full.freeze_point(q, y, eps);
  const Mat t = full.basis(q, Scheme::full).b(x, eps) * full.basis(q, Scheme::one_step).a(x, eps);
  const auto blocks = LambdaBlocks::split(t, lay);
  return {blocks.l11, blocks.l12, blocks.l21, blocks.l22};
}

/// Assembles Lambda twice, as B (Dg) A - B (DA) g and as B [A, g] with the
/// columnwise Lie bracket [a, g] = (Dg) a - (Da) g evaluated through
/// directional differences of g and of each column, and returns the largest
/// entry of the difference.
inline double lie_bracket_check(const FastSlowSystem& sys, const BlockBasis& basis, const Vec& y,
                                const Vec& z, double eps, const CspOptions& cfg = {}) {
  const Vec x = sys.join(y, z);
  const Mat lambda = lambda_assemble(sys, basis, y, z, eps, cfg).assemble();

  const BasisPoint bp = basis(x, eps);
  const Vec g = eval_g(sys, x, eps);
  const Mat da_g = directional_derivative_fd([&](const Vec& xx) { return basis.a(xx, eps); }, x, g, cfg.fd);
  Mat bracket(bp.a.rows(), bp.a.cols());
  for (Eigen::Index j = 0; j < bp.a.cols(); ++j) {
    const Vec col = bp.a.col(j);
    const Mat dg_a = directional_derivative_fd(
        [&](const Vec& xx) -> Mat { return eval_g(sys, xx, eps); }, x, col, cfg.fd);
    bracket.col(j) = dg_a.col(0) - da_g.col(j);
  }
  return (lambda - bp.b * bracket).cwiseAbs().maxCoeff();
}

/// max |(dB/dt) A + B (dA/dt)| at x; zero for an exact inverse pair.
inline double inverse_pair_deviation(const FastSlowSystem& sys, const BlockBasis& basis, const Vec& x,
                                     double eps, const FdConfig& fd = {}) {
  const BasisPoint bp = basis(x, eps);
  const Vec g = eval_g(sys, x, eps);
  const Mat db = directional_derivative_fd([&](const Vec& xx) { return basis.b(xx, eps); }, x, g, fd);
  const Mat da = directional_derivative_fd([&](const Vec& xx) { return basis.a(xx, eps); }, x, g, fd);
  return (db * bp.a + bp.b * da).cwiseAbs().maxCoeff();
}

/// The basis (A C, C^{-1} B) for a (possibly state-dependent) invertible C.
inline BlockBasis transform_basis(const BlockBasis& basis,
                                  std::function<Mat(const Vec& x, double eps)> c) {
  auto eval = [basis, c](const Vec& x, double eps) {
    BasisPoint bp = basis(x, eps);
    const Mat cx = c(x, eps);
    return BasisPoint{bp.a * cx, checked_inverse(cx, "transform C") * bp.b, bp.update};
  };
  return BlockBasis(basis.layout(), basis.q(), basis.scheme(), basis.initial_a(), basis.initial_b(),
                    std::move(eval));
}

/// Deviation of Lambda in the transformed basis (A C, C^{-1} B) from
/// C^{-1} Lambda C - C^{-1} (DC) g. For constant C the correction term is
/// zero and the relation is a similarity.
inline double transformation_law_deviation(const FastSlowSystem& sys, const BlockBasis& basis,
                                           const std::function<Mat(const Vec&, double)>& c,
                                           const Vec& x, double eps, const CspOptions& cfg = {}) {
  const Mat lambda = lambda_assemble(sys, basis, x, eps, cfg).assemble();
  const Mat lambda_hat = lambda_assemble(sys, transform_basis(basis, c), x, eps, cfg).assemble();
  const Mat cx = c(x, eps);
  const Mat c_inv = checked_inverse(cx, "transform C");
  const Vec g = eval_g(sys, x, eps);
  const Mat dc_dt = directional_derivative_fd([&](const Vec& xx) { return c(xx, eps); }, x, g, cfg.fd);
  return (lambda_hat - (c_inv * lambda * cx - c_inv * dc_dt)).cwiseAbs().maxCoeff();
}

/// Lambda~_(q+1) predicted from Lambda~_(q) by the one-step block recursions
///   L11' = L11 + U L21,  L12' = U L22 - U L21 U + dU/dt,
///   L21' = L21,          L22' = L22 - L21 U.
inline LambdaBlocks one_step_lambda_recursion(const FastSlowSystem& sys, const BlockBasis& basis_q,
                                              const Vec& x, double eps, const CspOptions& cfg = {}) {
  const LambdaBlocks lam = lambda_assemble(sys, basis_q, x, eps, cfg);
  const BlockBasis next = update_one_step(basis_q, sys, cfg);
  const Mat u = next(x, eps).update.u;
  const Vec g = eval_g(sys, x, eps);
  const Mat du_dt = directional_derivative_fd([&](const Vec& xx) { return next(xx, eps).update.u; }, x, g, cfg.fd);
  return {lam.l11 + u * lam.l21, u * lam.l22 - u * lam.l21 * u + du_dt, lam.l21, lam.l22 - lam.l21 * u};
}

}  // namespace cspkit
