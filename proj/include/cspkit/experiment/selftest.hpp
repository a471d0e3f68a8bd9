#pragma once

// Property suites over random MMH states: algebraic identities of the CSP
// bases and Lambda, and order properties of the expansion. Each check yields
// a measured value and the threshold it must stay under (or above).

#include "cspkit/csp/diagnostics.hpp"
#include "cspkit/experiment/config.hpp"
#include "cspkit/fastslow/expansion.hpp"
#include "cspkit/fastslow/mmh.hpp"
#include "cspkit/numcore/fit.hpp"

#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

namespace cspkit {

struct PropertyCheck {
  std::string name;
  double value = 0.0;
  double threshold = 0.0;
  /// When true the value must be >= threshold, otherwise <= threshold.
  bool lower_bound = false;
  bool passed = false;
  std::string detail;
};

namespace detail {

struct MmhState {
  Vec y;
  Vec z;
  double eps;
};

/// States near the MMH reduced manifold, where Lambda^11 is safely invertible.
inline std::vector<MmhState> random_mmh_states(std::uint64_t seed, int count, double kappa) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> s_dist(0.3, 3.0);
  std::uniform_real_distribution<double> dz_dist(-0.1, 0.1);
  std::uniform_real_distribution<double> log_eps(-3.0, -1.5);
  std::vector<MmhState> out;
  for (int i = 0; i < count; ++i) {
    const double s = s_dist(rng);
    const double c = s / (s + kappa) + dz_dist(rng);
    out.push_back({Vec::Constant(1, s), Vec::Constant(1, c), std::pow(10.0, log_eps(rng))});
  }
  return out;
}

inline PropertyCheck upper(std::string name, double value, double threshold, std::string detail = {}) {
  return {std::move(name), value, threshold, false, value <= threshold, std::move(detail)};
}

inline PropertyCheck lower(std::string name, double value, double threshold, std::string detail = {}) {
  return {std::move(name), value, threshold, true, value >= threshold, std::move(detail)};
}

/// Runs `body` and turns a library error into a failed check.
inline PropertyCheck guarded(const std::string& name, double threshold, bool lower_bound,
                             const std::function<PropertyCheck()>& body) {
  try {
    return body();
  } catch (const Error& e) {
    return {name, std::numeric_limits<double>::quiet_NaN(), threshold, lower_bound, false, e.what()};
  }
}

inline double max_over(const std::vector<MmhState>& states, const std::function<double(const MmhState&)>& f) {
  double worst = 0.0;
  for (const auto& st : states) worst = std::max(worst, f(st));
  return worst;
}

}  // namespace detail

/// All property suites on MMH(kappa, lambda) with states drawn from `seed`.
inline std::vector<PropertyCheck> run_selftest(std::uint64_t seed, double kappa = 2.0, double lambda = 1.0,
                                               const FdConfig& fd = {}) {
  using detail::MmhState;
  const FastSlowSystem sys = mmh_system(kappa, lambda);
  const auto states = detail::random_mmh_states(seed, 20, kappa);
  CspOptions cfg;
  cfg.fd = fd;
  ChainOptions copts;
  copts.csp = cfg;
  const CspChain one(sys, default_initial_basis(1, 1), copts);
  std::vector<PropertyCheck> out;

  for (Scheme scheme : {Scheme::one_step, Scheme::full}) {
    for (int q : {1, 2}) {
      const std::string name = std::string("basis_inverse/") + to_string(scheme) + "/q" + std::to_string(q);
      out.push_back(detail::guarded(name, 1e-9, false, [&] {
        const BlockBasis b = one.basis(q, scheme);
        return detail::upper(name, detail::max_over(states, [&](const MmhState& st) {
          const BasisPoint bp = b(sys.join(st.y, st.z), st.eps);
          return (bp.b * bp.a - Mat::Identity(2, 2)).cwiseAbs().maxCoeff();
        }), 1e-9);
      }));
    }
  }

  out.push_back(detail::guarded("nilpotency/U,L,P", 0.0, false, [&] {
    const BlockLayout lay{1, 1};
    const BlockBasis full2 = one.basis(2, Scheme::full);
    const BlockBasis one2 = one.basis(2, Scheme::one_step);
    return detail::upper("nilpotency/U,L,P", detail::max_over(states, [&](const MmhState& st) {
      const Vec x = sys.join(st.y, st.z);
      const UpdateMatrices uf = full2(x, st.eps).update;
      const UpdateMatrices uo = one2(x, st.eps).update;
      double m = 0.0;
      for (const Mat& sq : {Mat(lay.embed_upper(uf.u) * lay.embed_upper(uf.u)),
                            Mat(lay.embed_lower(uf.l) * lay.embed_lower(uf.l)),
                            Mat(lay.embed_upper(uo.p) * lay.embed_upper(uo.p))}) {
        m = std::max(m, sq.cwiseAbs().maxCoeff());
      }
      return m;
    }), 0.0);
  }));

  out.push_back(detail::guarded("explicit_form/one-step/q2", 1e-10, false, [&] {
    const BlockBasis b = one.basis(2, Scheme::one_step);
    return detail::upper("explicit_form/one-step/q2", detail::max_over(states, [&](const MmhState& st) {
      const Vec x = sys.join(st.y, st.z);
      const BasisPoint prod = b(x, st.eps);
      const BasisPoint expl = b.explicit_form(x, st.eps);
      return std::max((prod.a - expl.a).cwiseAbs().maxCoeff(), (prod.b - expl.b).cwiseAbs().maxCoeff());
    }), 1e-10);
  }));

  for (int q : {0, 1, 2}) {
    const std::string name = "lie_bracket/one-step/q" + std::to_string(q);
    out.push_back(detail::guarded(name, 1e-6, false, [&] {
      const BlockBasis b = one.basis(q, Scheme::one_step);
      return detail::upper(name, detail::max_over(states, [&](const MmhState& st) {
        return lie_bracket_check(sys, b, st.y, st.z, st.eps, cfg);
      }), 1e-6);
    }));
  }

  for (Scheme scheme : {Scheme::one_step, Scheme::full}) {
    for (int q : {1, 2}) {
      const std::string name = std::string("inverse_pair/") + to_string(scheme) + "/q" + std::to_string(q);
      out.push_back(detail::guarded(name, 1e-6, false, [&] {
        const BlockBasis b = one.basis(q, scheme);
        return detail::upper(name, detail::max_over(states, [&](const MmhState& st) {
          return inverse_pair_deviation(sys, b, sys.join(st.y, st.z), st.eps, fd);
        }), 1e-6);
      }));
    }
  }

  {
    std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
    std::uniform_real_distribution<double> u(-0.5, 0.5);
    Mat c_const(2, 2);
    c_const << 1.0 + u(rng), u(rng), u(rng), 1.0 + u(rng);
    const auto constant_c = [c_const](const Vec&, double) { return c_const; };
    const auto state_c = [](const Vec& x, double) {
      Mat c(2, 2);
      c << 1.0 + 0.2 * std::sin(x(0)), 0.3 * x(1), 0.1 * x(0) * x(1), 1.0 + 0.2 * std::cos(x(1));
      return c;
    };
    const BlockBasis b1 = one.basis(1, Scheme::one_step);
    out.push_back(detail::guarded("transformation_law/constant_C", 1e-6, false, [&] {
      return detail::upper("transformation_law/constant_C", detail::max_over(states, [&](const MmhState& st) {
        return transformation_law_deviation(sys, b1, constant_c, sys.join(st.y, st.z), st.eps, cfg);
      }), 1e-6);
    }));
    out.push_back(detail::guarded("transformation_law/state_C", 1e-5, false, [&] {
      return detail::upper("transformation_law/state_C", detail::max_over(states, [&](const MmhState& st) {
        return transformation_law_deviation(sys, b1, state_c, sys.join(st.y, st.z), st.eps, cfg);
      }), 1e-5);
    }));
  }

  for (int q : {0, 1}) {
    const std::string name = "lambda_recursion/q" + std::to_string(q) + "->q" + std::to_string(q + 1);
    out.push_back(detail::guarded(name, 1e-6, false, [&] {
      const BlockBasis bq = one.basis(q, Scheme::one_step);
      const BlockBasis bn = one.basis(q + 1, Scheme::one_step);
      return detail::upper(name, detail::max_over(states, [&](const MmhState& st) {
        const Vec x = sys.join(st.y, st.z);
        const Mat predicted = one_step_lambda_recursion(sys, bq, x, st.eps, cfg).assemble();
        const Mat assembled = lambda_assemble(sys, bn, x, st.eps, cfg).assemble();
        return (predicted - assembled).cwiseAbs().maxCoeff();
      }), 1e-6);
    }));
  }

  const ExpansionCoeffs h = mmh_h_coeffs(kappa, lambda);
  const std::vector<double> eps_grid{1e-2, 3.1622776601683795e-3, 1e-3, 3.1622776601683794e-4};
  for (int q : {0, 1, 2}) {
    const std::string name = "invariance_residual_slope/order" + std::to_string(q);
    out.push_back(detail::guarded(name, q + 0.7, true, [&] {
      double worst = INFINITY;
      for (double s : {0.5, 1.0, 2.0}) {
        const Vec y = Vec::Constant(1, s);
        std::vector<OrderSample> samples;
        for (double e : eps_grid) {
          const VecFn trunc = [&h, e, q](const Vec& yy) { return h.truncation(yy, e, q); };
          samples.push_back({e, invariance_residual(sys, trunc, y, e, fd).norm()});
        }
        worst = std::min(worst, fit_order(samples).slope);
      }
      return detail::lower(name, worst, q + 0.7, "minimum over s in {0.5, 1, 2}");
    }));
  }

  // dV/dt on the one-step q=1 manifold against its leading term
  // eps (dV0/dy) g_{1,0}, for a generic nonlinear test matrix V.
  out.push_back(detail::guarded("dVdt_leading_order/q1", 1.7, true, [&] {
    const auto v = [](const Vec& x, double e) {
      Mat m(2, 2);
      m << x(0) * x(1), std::sin(x(1)), x(0) * x(0), e + std::exp(-x(1));
      return m;
    };
    double worst = INFINITY;
    for (double s : {0.5, 1.0, 2.0}) {
      const Vec y = Vec::Constant(1, s);
      const VecFn h0 = h.h[0];
      const auto v0 = [&](const Vec& yy) -> Mat { return v(sys.join(yy, h0(yy)), 0.0); };
      const Vec g10 = sys.g1(y, h0(y), 0.0);
      const Mat dv0_g10 = directional_derivative_fd(v0, y, g10, fd);
      std::vector<OrderSample> samples;
      for (double e : eps_grid) {
        const Vec x = sys.join(y, one.psi(1, y, e));
        const Mat dv_dt = directional_derivative_fd([&](const Vec& xx) { return v(xx, e); }, x,
                                                    eval_g(sys, x, e), fd);
        samples.push_back({e, (dv_dt - e * dv0_g10).cwiseAbs().maxCoeff()});
      }
      worst = std::min(worst, fit_order(samples).slope);
    }
    return detail::lower("dVdt_leading_order/q1", worst, 1.7, "minimum over s in {0.5, 1, 2}");
  }));

  return out;
}

}  // namespace cspkit
