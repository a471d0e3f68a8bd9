#pragma once

#include "cspkit/errors.hpp"
#include "cspkit/numcore/types.hpp"

#include <Eigen/LU>

#include <string>

namespace cspkit {

/// Largest admissible condition number for the dense solves below.
inline constexpr double kMaxCondition = 1e12;

/// LU factorization that refuses to hand back a solver for an
/// ill-conditioned matrix. `what` names the matrix in the error message.
inline Eigen::PartialPivLU<Mat> checked_lu(const Mat& m, const std::string& what,
                                           double max_condition = kMaxCondition) {
  if (m.rows() != m.cols()) {
    throw ContractError(what + ": matrix is not square");
  }
  if (!m.allFinite()) {
    throw SingularityError(what + ": matrix has non-finite entries");
  }
  Eigen::PartialPivLU<Mat> lu(m);
  const double rcond = lu.rcond();
  if (!(rcond * max_condition >= 1.0)) {
    throw SingularityError(what + ": matrix is singular or ill-conditioned (rcond " +
                           std::to_string(rcond) + ")");
  }
  return lu;
}

inline Mat checked_inverse(const Mat& m, const std::string& what,
                           double max_condition = kMaxCondition) {
  return checked_lu(m, what, max_condition).inverse();
}

}  // namespace cspkit
