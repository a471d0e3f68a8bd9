#pragma once

// Convergence studies, method comparisons and trajectory runs driven by an
// ExperimentConfig. Results are plain tables; formatting lives in output.hpp.

#include "cspkit/csp/chain.hpp"
#include "cspkit/experiment/config.hpp"
#include "cspkit/fastslow/integrate.hpp"
#include "cspkit/ildm/ildm.hpp"
#include "cspkit/numcore/fit.hpp"

#include <algorithm>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace cspkit {

struct ResultRow {
  std::string system;
  Method scheme = Method::one_step;
  int q = 0;
  Vec y;
  double eps = 0.0;
  Vec z_value;
  double residual = 0.0;
  Vec reference_value;
  double abs_error = 0.0;
  /// Empty unless the solve failed; the numeric fields are then NaN.
  std::string error;
};

struct FitRecord {
  Method scheme = Method::one_step;
  int q = 0;
  Vec y;
  std::optional<ConvergenceFit> fit;
  std::string error;
};

struct AssertionResult {
  SlopeAssertion assertion;
  Vec y;
  double slope = 0.0;  ///< NaN when no fit was available
  bool passed = false;
};

struct StudyResult {
  std::string command;
  std::vector<ResultRow> rows;
  std::vector<FitRecord> fits;
  std::vector<AssertionResult> assertions;

  bool has_solver_failure() const {
    return std::any_of(rows.begin(), rows.end(), [](const ResultRow& r) { return !r.error.empty(); });
  }
  bool assertions_passed() const {
    return std::all_of(assertions.begin(), assertions.end(), [](const AssertionResult& a) { return a.passed; });
  }
};

namespace detail {

inline bool vec_less(const Vec& a, const Vec& b) {
  return std::lexicographical_compare(a.data(), a.data() + a.size(), b.data(), b.data() + b.size());
}

inline bool vec_equal(const Vec& a, const Vec& b) { return a.size() == b.size() && a == b; }

/// Solves for one manifold value and wraps it as a result row.
class MethodRunner {
 public:
  explicit MethodRunner(const ExperimentConfig& cfg)
      : cfg_(cfg),
        sys_(cfg.make_system()),
        reference_(cfg.make_reference(sys_)),
        one_step_(sys_, default_initial_basis(sys_.slow_dim(), sys_.fast_dim()), cfg.chain_options(Scheme::one_step)),
        full_(one_step_.with_options(cfg.chain_options(Scheme::full))),
        degraded_(degraded_chain(one_step_)) {}

  const FastSlowSystem& system() const { return sys_; }
  const ExpansionCoeffs& reference() const { return reference_; }

  ResultRow row(Method method, int q, const Vec& y, double eps) const {
    ResultRow r;
    r.system = sys_.name();
    r.scheme = method;
    r.q = method == Method::ildm ? 0 : q;
    r.y = y;
    r.eps = eps;
    try {
      r.reference_value = reference_.truncation(y, eps, cfg_.reference_order);
      switch (method) {
        case Method::one_step: fill(r, one_step_.solve(q, y, eps)); break;
        case Method::full: fill(r, full_.solve(q, y, eps)); break;
        case Method::csp_no_dt: fill(r, degraded_.solve(q, y, eps)); break;
        case Method::ildm: {
          r.z_value = ildm_solve(sys_, y, eps, cfg_.newton, cfg_.fd);
          const auto split = schur_ordered(sys_, y, r.z_value, eps, cfg_.fd);
          r.residual = (split.q_fast.transpose() * eval_g(sys_, y, r.z_value, eps)).norm();
          break;
        }
      }
      r.abs_error = (r.z_value - r.reference_value).lpNorm<Eigen::Infinity>();
    } catch (const SolverError& e) {
      mark_failed(r, e.what());
    }
    return r;
  }

  /// Distance from x to the graph of the q-th manifold of the configured scheme.
  double distance(const Vec& y, const Vec& z, double eps, int q) const {
    Vec zm;
    switch (cfg_.scheme) {
      case Method::one_step: zm = one_step_.psi(q, y, eps); break;
      case Method::full: zm = full_.psi(q, y, eps); break;
      case Method::csp_no_dt: zm = degraded_.psi(q, y, eps); break;
      case Method::ildm: zm = ildm_solve(sys_, y, eps, cfg_.newton, cfg_.fd); break;
    }
    return (z - zm).lpNorm<Eigen::Infinity>();
  }

 private:
  static void fill(ResultRow& r, const CspmPoint& p) {
    r.z_value = p.z;
    r.residual = p.residual;
  }

  static void mark_failed(ResultRow& r, const std::string& what) {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    r.error = what;
    r.residual = nan;
    r.abs_error = nan;
    if (r.z_value.size() == 0) r.z_value = Vec::Constant(1, nan);
    if (r.reference_value.size() == 0) r.reference_value = Vec::Constant(1, nan);
  }

  const ExperimentConfig& cfg_;
  FastSlowSystem sys_;
  ExpansionCoeffs reference_;
  CspChain one_step_;
  CspChain full_;
  CspChain degraded_;
};

inline void sort_rows(std::vector<ResultRow>& rows) {
  std::stable_sort(rows.begin(), rows.end(), [](const ResultRow& a, const ResultRow& b) {
    if (a.scheme != b.scheme) return std::string(to_string(a.scheme)) < to_string(b.scheme);
    if (a.q != b.q) return a.q < b.q;
    if (!vec_equal(a.y, b.y)) return vec_less(a.y, b.y);
    return a.eps > b.eps;
  });
}

/// One fit per (scheme, q, y) series of the (sorted) rows.
inline std::vector<FitRecord> fit_series(const std::vector<ResultRow>& rows) {
  std::vector<FitRecord> fits;
  for (std::size_t i = 0; i < rows.size();) {
    std::size_t j = i;
    std::vector<OrderSample> samples;
    bool failed = false;
    while (j < rows.size() && rows[j].scheme == rows[i].scheme && rows[j].q == rows[i].q &&
           vec_equal(rows[j].y, rows[i].y)) {
      failed = failed || !rows[j].error.empty();
      samples.push_back({rows[j].eps, rows[j].abs_error});
      ++j;
    }
    FitRecord rec{rows[i].scheme, rows[i].q, rows[i].y, std::nullopt, {}};
    if (failed) {
      rec.error = "solver failure in series";
    } else {
      try {
        rec.fit = fit_order(samples);
      } catch (const Error& e) {
        rec.error = e.what();
      }
    }
    fits.push_back(std::move(rec));
    i = j;
  }
  return fits;
}

inline std::vector<AssertionResult> check_assertions(const ExperimentConfig& cfg,
                                                     const std::vector<FitRecord>& fits) {
  std::vector<AssertionResult> out;
  for (const auto& a : cfg.assertions) {
    bool matched = false;
    for (const auto& f : fits) {
      const bool same_q = f.scheme == Method::ildm || f.q == a.q;
      if (f.scheme != a.scheme || !same_q) continue;
      if (a.y && !vec_equal(*a.y, f.y)) continue;
      matched = true;
      const double slope = f.fit ? f.fit->slope : std::numeric_limits<double>::quiet_NaN();
      out.push_back({a, f.y, slope, f.fit.has_value() && a.accepts(slope)});
    }
    // An assertion that matches no series cannot pass.
    if (!matched) {
      out.push_back({a, a.y.value_or(Vec()), std::numeric_limits<double>::quiet_NaN(), false});
    }
  }
  return out;
}

inline StudyResult finish(std::string command, const ExperimentConfig& cfg, std::vector<ResultRow> rows) {
  sort_rows(rows);
  StudyResult res;
  res.command = std::move(command);
  res.fits = fit_series(rows);
  res.assertions = check_assertions(cfg, res.fits);
  res.rows = std::move(rows);
  return res;
}

}  // namespace detail

/// For the configured scheme: every q in 0..q_max (a single series for
/// ILDM), every grid point and every eps. Errors are measured against the
/// order-`reference_order` truncation and fitted per (q, y).
inline StudyResult run_converge(const ExperimentConfig& cfg) {
  cfg.validate();
  const detail::MethodRunner runner(cfg);
  std::vector<ResultRow> rows;
  const int q_top = cfg.scheme == Method::ildm ? 0 : cfg.q_max;
  for (int q = 0; q <= q_top; ++q) {
    for (const Vec& y : cfg.y_grid) {
      for (double eps : cfg.eps_grid) rows.push_back(runner.row(cfg.scheme, q, y, eps));
    }
  }
  return detail::finish("converge", cfg, std::move(rows));
}

/// All four methods side by side at q = q_max.
inline StudyResult run_compare(const ExperimentConfig& cfg) {
  cfg.validate();
  const detail::MethodRunner runner(cfg);
  std::vector<ResultRow> rows;
  for (Method m : {Method::full, Method::one_step, Method::ildm, Method::csp_no_dt}) {
    for (const Vec& y : cfg.y_grid) {
      for (double eps : cfg.eps_grid) rows.push_back(runner.row(m, cfg.q_max, y, eps));
    }
  }
  return detail::finish("compare", cfg, std::move(rows));
}

struct TrajectoryRow {
  double t = 0.0;
  Vec y;
  Vec z;
  double distance = 0.0;
};

struct TrajectoryResult {
  std::string system;
  Method scheme = Method::one_step;
  int q = 0;
  double eps = 0.0;
  std::vector<TrajectoryRow> rows;
};

/// Integrates from the configured start and reports the distance of every
/// recorded state from the graph of psi_(q_max) of the configured scheme.
inline TrajectoryResult run_trajectory(const ExperimentConfig& cfg) {
  cfg.validate();
  const detail::MethodRunner runner(cfg);
  const FastSlowSystem& sys = runner.system();
  const TrajectorySpec& ts = cfg.trajectory;
  if (ts.y0.size() != sys.slow_dim()) throw ConfigError("trajectory.y0 has the wrong dimension");
  const double eps = ts.eps.value_or(cfg.eps_grid.front());
  if (!(eps >= 0.0 && eps < 0.5)) throw ConfigError("trajectory.eps must lie in [0, 0.5)");

  Vec z0 = ts.z0.value_or(runner.reference().h[0](ts.y0));
  if (ts.z0 && ts.z_offset) throw ConfigError("trajectory: give z0 or z_offset, not both");
  if (ts.z_offset) z0 += *ts.z_offset;
  if (z0.size() != sys.fast_dim()) throw ConfigError("trajectory start has the wrong fast dimension");

  TrajectoryResult out{sys.name(), cfg.scheme, cfg.scheme == Method::ildm ? 0 : cfg.q_max, eps, {}};
  auto emit = [&](double t, const Vec& y, const Vec& z) {
    out.rows.push_back({t, y, z, runner.distance(y, z, eps, out.q)});
  };
  if (ts.t_end == 0.0) {
    emit(0.0, ts.y0, z0);
    return out;
  }
  IntegrateOptions opt;
  opt.tol = ts.tol;
  opt.output_dt = ts.output_dt;
  const Trajectory traj = integrate(sys, ts.y0, z0, eps, ts.t_end, opt);
  for (std::size_t i = 0; i < traj.size(); ++i) emit(traj.times[i], traj.y[i], traj.z[i]);
  return out;
}

}  // namespace cspkit
