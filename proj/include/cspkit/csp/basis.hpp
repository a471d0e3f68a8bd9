#pragma once

// State-dependent CSP bases (A, B = A^{-1}) in 2x2 block form.
//
// Two orderings meet here and are easy to transpose by accident:
//   * states x = (y, z) are ordered slow-then-fast (m rows, then n rows);
//   * amplitudes f = B g are ordered fast-then-slow (f^1: n, then f^2: m).
// So A = (A_1 | A_2) has n fast columns then m slow columns, and its row
// blocks follow the state: A_11 is m x n, A_12 m x m, A_21 n x n, A_22 n x m.
// B = (B^1 ; B^2) has n fast rows then m slow rows: B^11 n x m, B^12 n x n,
// B^21 m x m, B^22 m x n. BlockLayout is the single place that encodes this.

#include "cspkit/errors.hpp"
#include "cspkit/numcore/linalg.hpp"
#include "cspkit/numcore/types.hpp"

#include <functional>
#include <memory>
#include <string>
#include <utility>

namespace cspkit {

enum class Scheme { full, one_step };

inline const char* to_string(Scheme s) { return s == Scheme::full ? "full" : "one-step"; }

struct BlockLayout {
  int m = 0;  ///< slow dimension
  int n = 0;  ///< fast dimension

  int dim() const { return m + n; }

  // Column blocks of A (amplitude index) and row blocks of B.
  auto fast_columns(const Mat& a) const { return a.leftCols(n); }
  auto slow_columns(const Mat& a) const { return a.rightCols(m); }
  auto fast_rows(const Mat& b) const { return b.topRows(n); }
  auto slow_rows(const Mat& b) const { return b.bottomRows(m); }

  // Blocks of A: rows follow the state (slow first), columns the amplitudes (fast first).
  Mat a11(const Mat& a) const { return a.topLeftCorner(m, n); }
  Mat a12(const Mat& a) const { return a.topRightCorner(m, m); }
  Mat a21(const Mat& a) const { return a.bottomLeftCorner(n, n); }
  Mat a22(const Mat& a) const { return a.bottomRightCorner(n, m); }

  // Blocks of B: rows follow the amplitudes (fast first), columns the state (slow first).
  Mat b11(const Mat& b) const { return b.topLeftCorner(n, m); }
  Mat b12(const Mat& b) const { return b.topRightCorner(n, n); }
  Mat b21(const Mat& b) const { return b.bottomLeftCorner(m, m); }
  Mat b22(const Mat& b) const { return b.bottomRightCorner(m, n); }

  /// Embeds an n x m block as the upper-right block of an amplitude-space matrix.
  Mat embed_upper(const Mat& block) const {
    Mat out = Mat::Zero(dim(), dim());
    out.topRightCorner(n, m) = block;
    return out;
  }
  /// Embeds an m x n block as the lower-left block of an amplitude-space matrix.
  Mat embed_lower(const Mat& block) const {
    Mat out = Mat::Zero(dim(), dim());
    out.bottomLeftCorner(m, n) = block;
    return out;
  }
};

/// Blocks of Lambda in amplitude ordering: l11 n x n (fast-fast), l12 n x m,
/// l21 m x n, l22 m x m.
struct LambdaBlocks {
  Mat l11, l12, l21, l22;

  static LambdaBlocks split(const Mat& lambda, const BlockLayout& lay) {
    return {lambda.topLeftCorner(lay.n, lay.n), lambda.topRightCorner(lay.n, lay.m),
            lambda.bottomLeftCorner(lay.m, lay.n), lambda.bottomRightCorner(lay.m, lay.m)};
  }

  Mat assemble() const {
    const auto n = l11.rows();
    const auto m = l22.rows();
    Mat out(n + m, n + m);
    out << l11, l12, l21, l22;
    return out;
  }
};

/// Nonzero blocks of the update matrices U (n x m, upper-right) and L
/// (m x n, lower-left), plus the accumulated one-step sum P = sum_j U_j.
struct UpdateMatrices {
  Mat u;
  Mat l;
  Mat p;
};

/// A basis evaluated at one state. `update` holds the U, L (and running P)
/// that produced this level from its parent; all zero at q = 0.
struct BasisPoint {
  Mat a;
  Mat b;
  UpdateMatrices update;
};

/// A state-dependent basis x -> (A(x), B(x)), together with the iteration
/// index and scheme that produced it. Copies share the evaluator.
class BlockBasis {
 public:
  using Evaluator = std::function<BasisPoint(const Vec& x, double eps)>;

  BlockBasis(BlockLayout layout, int q, Scheme scheme, Mat a0, Mat b0, Evaluator eval,
             bool constant = false)
      : layout_(layout),
        q_(q),
        scheme_(scheme),
        constant_(constant),
        initial_(std::make_shared<const std::pair<Mat, Mat>>(std::move(a0), std::move(b0))),
        eval_(std::make_shared<const Evaluator>(std::move(eval))) {}

  const BlockLayout& layout() const { return layout_; }
  int q() const { return q_; }
  Scheme scheme() const { return scheme_; }
  /// True when A and B do not depend on the state (dA/dt = 0 exactly).
  bool is_constant() const { return constant_; }

  BasisPoint operator()(const Vec& x, double eps) const {
    if (x.size() != layout_.dim()) throw ContractError("BlockBasis: state dimension mismatch");
    return (*eval_)(x, eps);
  }
  Mat a(const Vec& x, double eps) const { return (*this)(x, eps).a; }
  Mat b(const Vec& x, double eps) const { return (*this)(x, eps).b; }

  /// The constant starting basis A^(0), B_(0) this basis descends from.
  const Mat& initial_a() const { return initial_->first; }
  const Mat& initial_b() const { return initial_->second; }

  /// Closed one-step form A^(0)(I - P), (I + P)B_(0), with P the accumulated
  /// update of the evaluation. Equals the product form for one-step bases.
  BasisPoint explicit_form(const Vec& x, double eps) const {
    BasisPoint bp = (*this)(x, eps);
    const Mat p = layout_.embed_upper(bp.update.p);
    const Mat id = Mat::Identity(layout_.dim(), layout_.dim());
    return {initial_a() * (id - p), (id + p) * initial_b(), bp.update};
  }

 private:
  BlockLayout layout_;
  int q_;
  Scheme scheme_;
  bool constant_;
  std::shared_ptr<const std::pair<Mat, Mat>> initial_;
  std::shared_ptr<const Evaluator> eval_;
};

/// Constant starting basis with A_11 = 0:
///   A^(0) = [[0, A12], [A21, A22]],
///   B_(0) = [[-A21^{-1} A22 A12^{-1}, A21^{-1}], [A12^{-1}, 0]].
/// A12 is m x m, A21 n x n, A22 n x m; A12 and A21 must be invertible.
inline BlockBasis initial_basis(const Mat& a12, const Mat& a21, const Mat& a22) {
  const int m = static_cast<int>(a12.rows());
  const int n = static_cast<int>(a21.rows());
  if (a12.cols() != m || a21.cols() != n || a22.rows() != n || a22.cols() != m) {
    throw ContractError("initial_basis: block shapes must be A12 m x m, A21 n x n, A22 n x m");
  }
  auto inverse = [](const Mat& blk, const char* name) {
    try {
      return checked_inverse(blk, name);
    } catch (const SingularityError& e) {
      throw SingularityError(std::string("initial_basis: rank-deficient block: ") + e.what());
    }
  };
  const Mat a12_inv = inverse(a12, "A12");
  const Mat a21_inv = inverse(a21, "A21");

  Mat a0 = Mat::Zero(m + n, m + n);
  a0.topRightCorner(m, m) = a12;
  a0.bottomLeftCorner(n, n) = a21;
  a0.bottomRightCorner(n, m) = a22;
  Mat b0 = Mat::Zero(m + n, m + n);
  b0.topLeftCorner(n, m) = -a21_inv * a22 * a12_inv;
  b0.topRightCorner(n, n) = a21_inv;
  b0.bottomLeftCorner(m, m) = a12_inv;

  const BlockLayout lay{m, n};
  BasisPoint point{a0, b0, {Mat::Zero(n, m), Mat::Zero(m, n), Mat::Zero(n, m)}};
  return BlockBasis(lay, 0, Scheme::one_step, a0, b0,
                    [point](const Vec&, double) { return point; }, true);
}

/// The default A^(0) = [[0, I_m], [I_n, 0]]; for a planar system this is the
/// stoichiometric basis.
inline BlockBasis default_initial_basis(int m, int n) {
  return initial_basis(Mat::Identity(m, m), Mat::Identity(n, n), Mat::Zero(n, m));
}

}  // namespace cspkit
