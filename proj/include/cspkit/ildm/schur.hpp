#pragma once

// Real Schur decomposition with the diagonal ordered by descending real part
// (slow eigenvalues first). Eigen computes the factorization; LAPACK's
// dtrexc performs the block swaps, which keeps complex-conjugate pairs in
// standardized 2x2 blocks.

#include "cspkit/errors.hpp"
#include "cspkit/fastslow/system.hpp"
#include "cspkit/numcore/fd.hpp"
#include "cspkit/numcore/types.hpp"

#include <Eigen/Eigenvalues>
#include <lapacke.h>

#include <string>
#include <vector>

namespace cspkit {

inline constexpr double kSpectralGapThreshold = 1e-8;

struct SchurSplit {
  Mat q_slow;   ///< (m+n) x m, orthonormal basis of the slow invariant subspace
  Mat q_fast;   ///< (m+n) x n, its orthogonal complement
  Mat n_upper;  ///< quasi upper-triangular, real parts of eigenvalues non-increasing
  /// Real parts of the eigenvalues along the diagonal.
  Vec real_parts;

  Mat q() const {
    Mat out(q_slow.rows(), q_slow.cols() + q_fast.cols());
    out << q_slow, q_fast;
    return out;
  }
};

namespace detail {

// Start index and size (1 or 2) of each diagonal block of a quasi-triangular T.
inline std::vector<std::pair<int, int>> schur_blocks(const Mat& t) {
  std::vector<std::pair<int, int>> blocks;
  const int dim = static_cast<int>(t.rows());
  for (int i = 0; i < dim;) {
    const int size = (i + 1 < dim && t(i + 1, i) != 0.0) ? 2 : 1;
    blocks.emplace_back(i, size);
    i += size;
  }
  return blocks;
}

inline double block_real_part(const Mat& t, std::pair<int, int> blk) {
  const auto [i, size] = blk;
  return size == 1 ? t(i, i) : 0.5 * (t(i, i) + t(i + 1, i + 1));
}

}  // namespace detail

/// Orders a real Schur form (t, u) so that the real parts of the diagonal
/// blocks are non-increasing. Returns the real part at every diagonal position.
inline Vec reorder_schur_descending(Mat& t, Mat& u) {
  const int dim = static_cast<int>(t.rows());
  int pos = 0;
  while (pos < dim) {
    auto blocks = detail::schur_blocks(t);
    std::size_t first = 0;
    while (blocks[first].first < pos) ++first;
    std::size_t best = first;
    for (std::size_t b = first + 1; b < blocks.size(); ++b) {
      if (detail::block_real_part(t, blocks[b]) > detail::block_real_part(t, blocks[best])) best = b;
    }
    if (best != first) {
      lapack_int ifst = blocks[best].first + 1;
      lapack_int ilst = pos + 1;
      const lapack_int info = LAPACKE_dtrexc(LAPACK_COL_MAJOR, 'V', dim, t.data(), dim, u.data(), dim,
                                             &ifst, &ilst);
      if (info != 0) {
        throw NoSpectralGapError("reorder_schur_descending: block swap failed (dtrexc info " +
                                 std::to_string(info) + "); eigenvalues too close to separate");
      }
    }
    // The moved block now starts at pos; dtrexc may have split or merged 2x2 blocks.
    blocks = detail::schur_blocks(t);
    for (const auto& blk : blocks) {
      if (blk.first == pos) {
        pos += blk.second;
        break;
      }
    }
  }
  Vec re(dim);
  for (const auto& blk : detail::schur_blocks(t)) {
    for (int k = 0; k < blk.second; ++k) re(blk.first + k) = detail::block_real_part(t, blk);
  }
  return re;
}

/// Ordered Schur split of an arbitrary square matrix with `m` slow directions.
inline SchurSplit schur_ordered(const Mat& jac, int m, double gap_threshold = kSpectralGapThreshold) {
  const int dim = static_cast<int>(jac.rows());
  if (jac.cols() != dim || m <= 0 || m >= dim) throw ContractError("schur_ordered: bad shape");
  if (!jac.allFinite()) throw NonFiniteError("schur_ordered: non-finite Jacobian", -1);
  Eigen::RealSchur<Mat> rs(jac);
  if (rs.info() != Eigen::Success) throw SolverError("schur_ordered: Schur iteration failed");
  Mat t = rs.matrixT();
  Mat u = rs.matrixU();
  const Vec re = reorder_schur_descending(t, u);
  const double gap = re(m - 1) - re(m);
  if (!(gap > gap_threshold) || (t(m, m - 1) != 0.0)) {
    throw NoSpectralGapError("schur_ordered: no spectral gap between positions " + std::to_string(m) +
                             " and " + std::to_string(m + 1) + " (gap " + std::to_string(gap) + ")");
  }
  return {u.leftCols(m), u.rightCols(dim - m), t, re};
}

/// Ordered Schur split of Dg at (y, z, eps).
inline SchurSplit schur_ordered(const FastSlowSystem& sys, const Vec& y, const Vec& z, double eps,
                                const FdConfig& fd = {}) {
  return schur_ordered(jacobian_g(sys, sys.join(y, z), eps, fd), sys.slow_dim());
}

}  // namespace cspkit
