#pragma once

#include <Eigen/Dense>

#include <functional>

namespace cspkit {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

using VecFn = std::function<Vec(const Vec&)>;
using MatFn = std::function<Mat(const Vec&)>;

inline bool all_finite(const Mat& m) { return m.allFinite(); }

}  // namespace cspkit
