// Walks through the CSP iteration on the Michaelis-Menten-Henri system:
// manifold values of both schemes against the slow-manifold expansion, and
// the ILDM for comparison.

#include "cspkit/csp/chain.hpp"
#include "cspkit/fastslow/mmh.hpp"
#include "cspkit/ildm/ildm.hpp"

#include <cmath>
#include <cstdio>

int main() {
  using namespace cspkit;
  const double kappa = 2.0, lambda = 1.0, eps = 1e-2;
  const FastSlowSystem sys = mmh_system(kappa, lambda);
  const ExpansionCoeffs h = mmh_h_coeffs(kappa, lambda);

  const CspChain one_step(sys, default_initial_basis(1, 1));
  ChainOptions full_opts;
  full_opts.scheme = Scheme::full;
  const CspChain full = one_step.with_options(full_opts);

  std::printf("eps = %g, error against h0 + eps h1 + eps^2 h2\n\n", eps);
  std::printf("%6s %4s %14s %14s %14s\n", "s", "q", "one-step", "full", "ildm");
  for (double s : {0.5, 1.0, 2.0}) {
    const Vec y = Vec::Constant(1, s);
    const double ref = h.truncation(y, eps)(0);
    const double ildm = std::abs(ildm_solve(sys, y, eps)(0) - ref);
    for (int q = 0; q <= 2; ++q) {
      std::printf("%6.2f %4d %14.3e %14.3e %14.3e\n", s, q, std::abs(one_step.psi(q, y, eps)(0) - ref),
                  std::abs(full.psi(q, y, eps)(0) - ref), ildm);
    }
  }
  return 0;
}
