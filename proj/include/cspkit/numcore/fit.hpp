#pragma once

#include "cspkit/errors.hpp"

#include <cmath>
#include <cstddef>
#include <limits>
#include <set>
#include <vector>

namespace cspkit {

struct OrderSample {
  double eps = 0.0;
  double error = 0.0;
};

/// Least-squares line through (log eps, log error). `slope` is the
/// empirical convergence order; `intercept` is the natural log of the
/// leading constant.
struct ConvergenceFit {
  std::vector<OrderSample> samples;
  std::vector<OrderSample> excluded;
  double slope = 0.0;
  double intercept = 0.0;
};

/// Errors at or below this floor are treated as exact and left out of the fit.
inline constexpr double kFitErrorFloor = 100.0 * std::numeric_limits<double>::epsilon();

inline ConvergenceFit fit_order(const std::vector<OrderSample>& samples) {
  if (samples.size() < 3) {
    throw ContractError("fit_order: at least 3 samples are required");
  }
  std::set<double> seen;
  for (const auto& s : samples) {
    if (!(s.eps > 0.0) || !std::isfinite(s.eps)) {
      throw ContractError("fit_order: eps values must be positive and finite");
    }
    if (!seen.insert(s.eps).second) {
      throw ContractError("fit_order: eps values must be distinct");
    }
    if (!(s.error >= 0.0)) {
      throw ContractError("fit_order: errors must be non-negative");
    }
  }

  ConvergenceFit fit;
  for (const auto& s : samples) {
    (s.error > kFitErrorFloor && std::isfinite(s.error) ? fit.samples : fit.excluded).push_back(s);
  }
  if (fit.samples.size() < 2) {
    throw InsufficientDataError("fit_order: fewer than 2 samples with error above the floor");
  }

  const double count = static_cast<double>(fit.samples.size());
  double mx = 0.0, my = 0.0;
  for (const auto& s : fit.samples) {
    mx += std::log(s.eps);
    my += std::log(s.error);
  }
  mx /= count;
  my /= count;
  double sxx = 0.0, sxy = 0.0;
  for (const auto& s : fit.samples) {
    const double dx = std::log(s.eps) - mx;
    sxx += dx * dx;
    sxy += dx * (std::log(s.error) - my);
  }
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  return fit;
}

}  // namespace cspkit
