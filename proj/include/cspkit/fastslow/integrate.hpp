#pragma once

// Adaptive Dormand-Prince 5(4) integration of a fast-slow system on the fast
// time scale t. Explicit, so only mildly stiff problems (desk-scale eps and
// horizons) are in range; step underflow is reported as a stiffness error.

#include "cspkit/errors.hpp"
#include "cspkit/fastslow/system.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>
#include <vector>

namespace cspkit {

enum class Timescale { fast, slow };

struct Trajectory {
  std::vector<double> times;
  std::vector<Vec> y;
  std::vector<Vec> z;
  double eps = 0.0;
  Timescale timescale = Timescale::fast;

  std::size_t size() const { return times.size(); }
};

struct IntegrateOptions {
  double tol = 1e-10;
  /// Record states on a uniform grid of this spacing (and at t_end); 0
  /// records every accepted step.
  double output_dt = 0.0;
  double initial_step = 1e-3;
  /// Steps below min_step * max(1, |t|) count as underflow.
  double min_step = 1e-13;
  long max_steps = 5'000'000;
};

namespace detail {

struct DormandPrince {
  static constexpr std::array<double, 7> c{0.0, 1.0 / 5, 3.0 / 10, 4.0 / 5, 8.0 / 9, 1.0, 1.0};
  static constexpr double a[7][6] = {
      {},
      {1.0 / 5},
      {3.0 / 40, 9.0 / 40},
      {44.0 / 45, -56.0 / 15, 32.0 / 9},
      {19372.0 / 6561, -25360.0 / 2187, 64448.0 / 6561, -212.0 / 729},
      {9017.0 / 3168, -355.0 / 33, 46732.0 / 5247, 49.0 / 176, -5103.0 / 18656},
      {35.0 / 384, 0.0, 500.0 / 1113, 125.0 / 192, -2187.0 / 6784, 11.0 / 84}};
  // Fifth-order weights are the last row of a; these are the embedded
  // fourth-order ones.
  static constexpr std::array<double, 7> b4{5179.0 / 57600,    0.0,         7571.0 / 16695, 393.0 / 640,
                                            -92097.0 / 339200, 187.0 / 2100, 1.0 / 40};
};

}  // namespace detail

/// Integrates x' = (eps g1, g2) from (y0, z0) over [0, t_end] with local
/// error per step at most `tol` (mixed absolute/relative, max norm).
inline Trajectory integrate(const FastSlowSystem& sys, const Vec& y0, const Vec& z0, double eps,
                            double t_end, const IntegrateOptions& opt = {}) {
  if (!(t_end > 0.0)) throw ContractError("integrate: t_end must be positive");
  if (!(opt.tol > 0.0)) throw ContractError("integrate: tol must be positive");
  using DP = detail::DormandPrince;

  Trajectory traj;
  traj.eps = eps;
  auto record = [&](double t, const Vec& x) {
    traj.times.push_back(t);
    traj.y.push_back(x.head(sys.slow_dim()));
    traj.z.push_back(x.tail(sys.fast_dim()));
  };

  Vec x = sys.join(y0, z0);
  double t = 0.0;
  record(t, x);
  double h = std::min(opt.initial_step, t_end);
  double next_output = opt.output_dt > 0.0 ? opt.output_dt : t_end;
  long output_index = 1;

  std::array<Vec, 7> k;
  k[0] = eval_g(sys, x, eps);
  long steps = 0;
  while (t < t_end) {
    if (++steps > opt.max_steps) throw StiffnessError("integrate: step budget exhausted");
    const double target = opt.output_dt > 0.0 ? std::min(next_output, t_end) : t_end;
    const bool hits_target = t + h >= target;
    const double step = hits_target ? target - t : h;

    for (int i = 1; i < 7; ++i) {
      Vec xi = x;
      for (int j = 0; j < i; ++j) xi += step * DP::a[i][j] * k[j];
      k[i] = eval_g(sys, xi, eps);
    }
    // The last stage row doubles as the fifth-order weights (FSAL).
    Vec x5 = x;
    Vec x4 = x;
    for (int j = 0; j < 6; ++j) x5 += step * DP::a[6][j] * k[j];
    for (int j = 0; j < 7; ++j) x4 += step * DP::b4[j] * k[j];

    double err = 0.0;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      const double scale = opt.tol * std::max({1.0, std::abs(x(i)), std::abs(x5(i))});
      err = std::max(err, std::abs(x5(i) - x4(i)) / scale);
    }
    if (!std::isfinite(err)) err = 1e10;
    const double factor = err == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(err, -0.2), 0.2, 5.0);

    if (err <= 1.0) {
      t = hits_target ? target : t + step;
      x = x5;
      k[0] = k[6];
      if (opt.output_dt <= 0.0) {
        record(t, x);
      } else if (hits_target) {
        record(t, x);
        next_output = static_cast<double>(++output_index) * opt.output_dt;
      }
      // A step shortened to land on an output time says little about the
      // admissible size, so it never shrinks h.
      h = hits_target ? std::max(h, step * factor) : step * factor;
    } else {
      h = step * factor;
      if (h < opt.min_step * std::max(1.0, t)) {
        throw StiffnessError("integrate: step size underflow at t=" + std::to_string(t) +
                             " (eps=" + std::to_string(eps) +
                             "); too stiff for the explicit integrator, reduce the eps*t_end "
                             "budget or the tolerance");
      }
    }
  }
  return traj;
}

}  // namespace cspkit
