#include "cspkit/csp/chain.hpp"
#include "cspkit/fastslow/expansion.hpp"
#include "cspkit/fastslow/integrate.hpp"
#include "cspkit/fastslow/linear.hpp"
#include "cspkit/fastslow/mmh.hpp"
#include "cspkit/numcore/fit.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace cspkit;

namespace {

constexpr double kKappa = 2.0;
constexpr double kLambda = 1.0;

Vec scalar(double v) { return Vec::Constant(1, v); }

const std::vector<double> kEpsGrid{1e-2, 3.1622776601683795e-3, 1e-3, 3.1622776601683794e-4};

// y' = -eps (1 - eps) y,  z' = y^2 - z. Its slow manifold is
// z = y^2 / (1 - 2 eps (1 - eps)), so h0 = y^2 and h1 = h2 = 2 y^2.
// g1 depends on eps, which exercises the (D_eps g1)_0 term of h2.
FastSlowSystem eps_dependent_g1_system() {
  FieldFn g1 = [](const Vec& y, const Vec&, double e) -> Vec { return -(1.0 - e) * y; };
  FieldFn g2 = [](const Vec& y, const Vec& z, double) -> Vec { return y.cwiseProduct(y) - z; };
  return FastSlowSystem("quadratic", 1, 1, g1, g2).with_fast_guess([](const Vec& y) -> Vec { return y.cwiseProduct(y); });
}

// g1 = 0 and g2 independent of eps: the reduced manifold is invariant.
FastSlowSystem frozen_slow_system() {
  FieldFn g1 = [](const Vec& y, const Vec&, double) -> Vec { return Vec::Zero(y.size()); };
  FieldFn g2 = [](const Vec& y, const Vec& z, double) -> Vec { return Vec(y.array().sin() - z.array()); };
  return FastSlowSystem("frozen", 1, 1, g1, g2);
}

}  // namespace

TEST(FastSlowSystem, RejectsBadDimensions) {
  FieldFn f = [](const Vec& y, const Vec&, double) { return y; };
  EXPECT_THROW(FastSlowSystem("bad", 0, 1, f, f), ContractError);
}

TEST(EvalG, MmhStackedField) {
  const FastSlowSystem sys = mmh_system(kKappa, kLambda);
  const Vec g = eval_g(sys, scalar(1.0), scalar(1.0 / 3.0), 0.1);
  EXPECT_NEAR(g(0), -0.1 / 3.0, 1e-15);
  EXPECT_NEAR(g(1), 0.0, 1e-15);
}

TEST(EvalG, ZeroFieldGivesZero) {
  FieldFn zero = [](const Vec& y, const Vec&, double) -> Vec { return Vec::Zero(y.size()); };
  const FastSlowSystem sys("zero", 1, 1, zero, zero);
  EXPECT_EQ(eval_g(sys, scalar(2.0), scalar(3.0), 0.3).norm(), 0.0);
}

TEST(EvalG, SlowBlockVanishesAtEpsZero) {
  const FastSlowSystem sys = mmh_system(kKappa, kLambda);
  EXPECT_EQ(eval_g(sys, scalar(1.3), scalar(0.8), 0.0)(0), 0.0);
}

TEST(EvalG, DimensionMismatchIsContractError) {
  const FastSlowSystem sys = mmh_system(kKappa, kLambda);
  EXPECT_THROW(eval_g(sys, Vec::Zero(2), scalar(0.0), 0.1), ContractError);
  EXPECT_THROW(eval_g(sys, Vec::Zero(3), 0.1), ContractError);
}

TEST(MmhSystem, ReducedManifoldRootAndHyperbolicity) {
  const FastSlowSystem sys = mmh_system(kKappa, kLambda);
  EXPECT_NEAR(sys.g2(scalar(1.0), scalar(1.0 / 3.0), 0.37)(0), 0.0, 1e-15);
  EXPECT_DOUBLE_EQ(dz_g2(sys, scalar(1.0), scalar(1.0 / 3.0), 0.0)(0, 0), -3.0);
}

TEST(MmhSystem, ParameterValidation) {
  EXPECT_THROW(mmh_system(1.0, 2.0), ParameterError);
  EXPECT_THROW(mmh_system(2.0, 0.0), ParameterError);
  EXPECT_THROW(mmh_system(1.0, 1.0), ParameterError);
}

TEST(MmhSystem, AnalyticPartialsMatchFiniteDifferences) {
  const FastSlowSystem sys = mmh_system(kKappa, kLambda);
  const FastSlowSystem bare("mmh-bare", 1, 1, [&](const Vec& y, const Vec& z, double e) { return sys.g1(y, z, e); },
                            [&](const Vec& y, const Vec& z, double e) { return sys.g2(y, z, e); });
  Vec x(2);
  x << 0.8, 0.45;
  EXPECT_LE((jacobian_g(sys, x, 0.02) - jacobian_g(bare, x, 0.02)).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(MmhSystem, OrderOneOnWorkingDomain) {
  const FastSlowSystem sys = mmh_system(kKappa, kLambda);
  for (double s : {0.2, 1.0, 5.0}) {
    EXPECT_TRUE(order_one_check(sys, scalar(s), scalar(s / (s + kKappa))));
  }
}

TEST(MmhCoeffs, ValuesAtUnitSubstrate) {
  const auto h = mmh_h_coeffs(kKappa, kLambda);
  const Vec y = scalar(1.0);
  EXPECT_NEAR(h.h[0](y)(0), 1.0 / 3.0, 1e-15);
  EXPECT_NEAR(h.h[1](y)(0), 2.0 / 81.0, 1e-15);
  EXPECT_NEAR(h.h[2](y)(0), -10.0 / 2187.0, 1e-15);
}

TEST(ReducedManifold, NewtonRootMatchesClosedForm) {
  const FastSlowSystem sys = mmh_system(kKappa, kLambda);
  const ReducedManifold mani = reduced_manifold(sys, Box{scalar(0.2), scalar(5.0)});
  const auto check = check_reduced_manifold(sys, mani, 10);
  EXPECT_TRUE(check.ok());
  EXPECT_LE(check.max_residual, 1e-12);
  EXPECT_LT(check.max_real_eigenvalue, 0.0);
  const auto h = mmh_h_coeffs(kKappa, kLambda);
  for (const Vec& y : mani.domain.grid(10)) EXPECT_NEAR(mani.h0(y)(0), h.h[0](y)(0), 1e-12);
}

TEST(ReducedManifold, FastGuessSelectsBranch) {
  // g2 = (z - 1)(z + 1) has two roots; the designated guess picks one.
  FieldFn g1 = [](const Vec& y, const Vec&, double) -> Vec { return -y; };
  FieldFn g2 = [](const Vec&, const Vec& z, double) -> Vec { return Vec(z.array() * z.array() - 1.0); };
  const FastSlowSystem up = FastSlowSystem("two-branch", 1, 1, g1, g2).with_fast_guess([](const Vec&) { return scalar(0.8); });
  const FastSlowSystem down = up.with_fast_guess([](const Vec&) { return scalar(-0.8); });
  const Box box{scalar(0.0), scalar(1.0)};
  EXPECT_NEAR(reduced_manifold(up, box).h0(scalar(0.5))(0), 1.0, 1e-14);
  EXPECT_NEAR(reduced_manifold(down, box).h0(scalar(0.5))(0), -1.0, 1e-14);
}

TEST(Expansion, MmhCoefficientsOnGrid) {
  const FastSlowSystem sys = mmh_system(kKappa, kLambda);
  const ReducedManifold mani = mmh_reduced_manifold(kKappa, kLambda, 0.2, 5.0);
  const auto exact = mmh_h_coeffs(kKappa, kLambda);
  const auto numeric = numeric_expansion(sys, mani);
  for (const Vec& y : mani.domain.grid(10)) {
    const double h1 = exact.h[1](y)(0), h2 = exact.h[2](y)(0);
    EXPECT_LE(std::abs(numeric.h[0](y)(0) - exact.h[0](y)(0)), 1e-12);
    EXPECT_LE(std::abs(numeric.h[1](y)(0) - h1), 1e-6 * std::abs(h1)) << "s=" << y(0);
    EXPECT_LE(std::abs(numeric.h[2](y)(0) - h2), 1e-4 * std::abs(h2)) << "s=" << y(0);
  }
}

TEST(Expansion, MmhAtUnitSubstrate) {
  const FastSlowSystem sys = mmh_system(kKappa, kLambda);
  const ReducedManifold mani = reduced_manifold(sys, Box{scalar(0.2), scalar(5.0)});
  const Vec y = scalar(1.0);
  EXPECT_NEAR(expansion_h1(sys, mani, y)(0), 2.0 / 81.0, 1e-7);
  const VecFn h1 = [&](const Vec& yy) { return expansion_h1(sys, mani, yy); };
  EXPECT_NEAR(expansion_h2(sys, mani, h1, y)(0), -10.0 / 2187.0, 1e-4 * 10.0 / 2187.0);
}

TEST(Expansion, FrozenSlowDynamicsHaveNoCorrections) {
  const FastSlowSystem sys = frozen_slow_system();
  const ReducedManifold mani = reduced_manifold(sys, Box{scalar(-1.0), scalar(1.0)});
  const VecFn h1 = [&](const Vec& yy) { return expansion_h1(sys, mani, yy); };
  for (double y : {-0.7, 0.1, 0.9}) {
    EXPECT_NEAR(h1(scalar(y))(0), 0.0, 1e-12);
    EXPECT_NEAR(expansion_h2(sys, mani, h1, scalar(y))(0), 0.0, 1e-9);
  }
}

TEST(Expansion, LinearSystemHandAlgebra) {
  const FastSlowSystem sys = linear_test_system();
  const ReducedManifold mani = reduced_manifold(sys, Box{scalar(-2.0), scalar(2.0)});
  const VecFn h1 = [&](const Vec& yy) { return expansion_h1(sys, mani, yy); };
  for (double y : {-1.5, 0.25, 2.0}) {
    EXPECT_NEAR(h1(scalar(y))(0), y, 1e-10);
    EXPECT_NEAR(expansion_h2(sys, mani, h1, scalar(y))(0), y, 1e-7);
  }
}

TEST(Expansion, EpsDependentSlowFieldEntersSecondOrderWithPlusSign) {
  const FastSlowSystem sys = eps_dependent_g1_system();
  const ReducedManifold mani = reduced_manifold(sys, Box{scalar(0.2), scalar(2.0)});
  const auto coeffs = numeric_expansion(sys, mani);
  for (double y : {0.3, 0.7, 1.5}) {
    EXPECT_NEAR(coeffs.h[1](scalar(y))(0), 2 * y * y, 1e-8);
    EXPECT_NEAR(coeffs.h[2](scalar(y))(0), 2 * y * y, 1e-5);
  }
  std::vector<OrderSample> samples;
  for (double e : kEpsGrid) {
    const VecFn trunc = [&](const Vec& yy) { return coeffs.truncation(yy, e); };
    samples.push_back({e, invariance_residual(sys, trunc, scalar(0.7), e).norm()});
  }
  EXPECT_GE(fit_order(samples).slope, 2.7);
}

TEST(Expansion, LossOfHyperbolicityIsReported) {
  FieldFn g1 = [](const Vec& y, const Vec&, double) -> Vec { return -y; };
  FieldFn g2 = [](const Vec& y, const Vec& z, double) -> Vec { return Vec(y.array() - z.array().cube()); };
  const FastSlowSystem sys("fold", 1, 1, g1, g2);
  ReducedManifold mani{[](const Vec& y) -> Vec { return Vec::Constant(1, std::cbrt(y(0))); }, Box{scalar(-1.0), scalar(1.0)}, {}};
  try {
    expansion_h1(sys, mani, scalar(0.0));
    FAIL() << "expected SingularityError";
  } catch (const SingularityError& e) {
    EXPECT_NE(std::string(e.what()).find("hyperbolicity"), std::string::npos);
  }
}

TEST(InvarianceResidual, ReducedManifoldAtEpsZero) {
  const FastSlowSystem sys = mmh_system(kKappa, kLambda);
  const auto h = mmh_h_coeffs(kKappa, kLambda);
  EXPECT_LE(invariance_residual(sys, h.h[0], scalar(1.0), 0.0).norm(), 1e-15);
}

TEST(InvarianceResidual, TruncationOrdersOnMmh) {
  const FastSlowSystem sys = mmh_system(kKappa, kLambda);
  const auto h = mmh_h_coeffs(kKappa, kLambda);
  for (int q : {0, 1, 2}) {
    for (double s : {0.5, 1.0, 2.0}) {
      std::vector<OrderSample> samples;
      for (double e : kEpsGrid) {
        const VecFn trunc = [&](const Vec& yy) { return h.truncation(yy, e, q); };
        samples.push_back({e, invariance_residual(sys, trunc, scalar(s), e).norm()});
      }
      const double slope = fit_order(samples).slope;
      EXPECT_GE(slope, q + 0.7) << "q=" << q << " s=" << s;
      EXPECT_LE(slope, q + 1.3) << "q=" << q << " s=" << s;
    }
  }
}

TEST(InvarianceResidual, SecondOrderTruncationIsCubicSmall) {
  const FastSlowSystem sys = mmh_system(kKappa, kLambda);
  const auto h = mmh_h_coeffs(kKappa, kLambda);
  const double e = 1e-3;
  const VecFn trunc = [&](const Vec& yy) { return h.truncation(yy, e); };
  EXPECT_LE(invariance_residual(sys, trunc, scalar(1.0), e).norm(), e * e * e);
}

TEST(Integrate, ScalarDecay) {
  FieldFn g1 = [](const Vec& y, const Vec&, double) -> Vec { return Vec::Zero(y.size()); };
  FieldFn g2 = [](const Vec&, const Vec& z, double) -> Vec { return -z; };
  const FastSlowSystem sys("decay", 1, 1, g1, g2);
  IntegrateOptions opt;
  opt.tol = 1e-10;
  opt.output_dt = 0.25;
  const Trajectory traj = integrate(sys, scalar(0.5), scalar(2.0), 0.1, 3.0, opt);
  ASSERT_EQ(traj.size(), 13u);
  for (std::size_t i = 0; i < traj.size(); ++i) {
    EXPECT_NEAR(traj.z[i](0), 2.0 * std::exp(-traj.times[i]), 1e-8);
    EXPECT_EQ(traj.y[i](0), 0.5);
  }
  EXPECT_DOUBLE_EQ(traj.times.back(), 3.0);
}

TEST(Integrate, TimesIncrease) {
  const FastSlowSystem sys = mmh_system(kKappa, kLambda);
  const Trajectory traj = integrate(sys, scalar(1.0), scalar(0.9), 0.01, 5.0);
  for (std::size_t i = 1; i < traj.size(); ++i) EXPECT_GT(traj.times[i], traj.times[i - 1]);
}

TEST(Integrate, RejectsNonPositiveHorizon) {
  const FastSlowSystem sys = mmh_system(kKappa, kLambda);
  EXPECT_THROW(integrate(sys, scalar(1.0), scalar(0.5), 0.01, 0.0), ContractError);
}

TEST(Integrate, LayerProblemRelaxesToReducedManifold) {
  const FastSlowSystem sys = mmh_system(kKappa, kLambda);
  const Trajectory traj = integrate(sys, scalar(1.0), scalar(0.9), 0.0, 20.0);
  EXPECT_EQ(traj.y.back()(0), 1.0);
  EXPECT_NEAR(traj.z.back()(0), 1.0 / 3.0, 1e-9);
}

TEST(Integrate, MmhTrajectoryIsAttractedToManifold) {
  const FastSlowSystem sys = mmh_system(kKappa, kLambda);
  const double eps = 1e-2;
  const CspChain chain(sys, default_initial_basis(1, 1));
  IntegrateOptions opt;
  opt.output_dt = 0.5;
  const Trajectory traj = integrate(sys, scalar(1.0), scalar(0.9), eps, 10.0, opt);
  std::vector<double> dist;
  for (std::size_t i = 0; i < traj.size(); ++i) {
    dist.push_back(std::abs(traj.z[i](0) - chain.psi(2, traj.y[i], eps)(0)));
  }
  // Past the fast transient the distance keeps shrinking until roundoff.
  for (std::size_t i = 3; i < dist.size(); ++i) {
    if (dist[i - 1] > 1e-9) {
      EXPECT_LT(dist[i], dist[i - 1]) << "t=" << traj.times[i];
    }
  }
}

TEST(Integrate, StartsNearManifoldApproachOrderTwoTruncation) {
  // By t = 5 the fast transient has died out and what remains is the O(eps^3)
  // gap between the true manifold and the truncation, which drifts with s. So
  // the later comparison allows that floor.
  const FastSlowSystem sys = mmh_system(kKappa, kLambda);
  const auto h = mmh_h_coeffs(kKappa, kLambda);
  const double eps = 1e-2;
  const double floor = eps * eps * eps;
  IntegrateOptions opt;
  opt.output_dt = 1.0;
  for (double s : {0.5, 1.0, 3.0}) {
    for (double dz : {-0.3, 0.2, 0.5}) {
      const Vec y0 = scalar(s);
      const Trajectory traj = integrate(sys, y0, Vec(h.h[0](y0) + scalar(dz)), eps, 10.0, opt);
      ASSERT_EQ(traj.size(), 11u);
      auto distance = [&](std::size_t i) { return std::abs(traj.z[i](0) - h.truncation(traj.y[i], eps)(0)); };
      EXPECT_LT(distance(5), distance(1)) << "s=" << s << " dz=" << dz;
      EXPECT_LT(distance(10), distance(5) + floor) << "s=" << s << " dz=" << dz;
      EXPECT_LT(distance(10), floor) << "s=" << s << " dz=" << dz;
    }
  }
}
