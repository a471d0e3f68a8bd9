#pragma once

// The CSP iteration as a lazily built chain of bases and the manifolds
// psi_(q)(y, eps) cut out by the CSP condition B^1_(q) g = 0.

#include "cspkit/csp/basis.hpp"
#include "cspkit/csp/lambda.hpp"
#include "cspkit/errors.hpp"
#include "cspkit/fastslow/system.hpp"
#include "cspkit/numcore/newton.hpp"

#include <map>
#include <mutex>
#include <tuple>
#include <vector>

namespace cspkit {

struct ChainOptions {
  Scheme scheme = Scheme::one_step;
  CspOptions csp;
  NewtonConfig newton;
};

/// Result of solving the CSP condition at one slow point.
struct CspmPoint {
  Vec z;
  double residual = 0.0;
};

class CspChain {
 public:
  CspChain(FastSlowSystem sys, BlockBasis initial, ChainOptions options = {})
      : sys_(std::move(sys)), initial_(std::move(initial)), options_(std::move(options)) {
    if (initial_.q() != 0 || !initial_.is_constant()) {
      throw ContractError("CspChain: the chain must start from a constant q = 0 basis");
    }
    if (initial_.layout().m != sys_.slow_dim() || initial_.layout().n != sys_.fast_dim()) {
      throw ContractError("CspChain: basis layout does not match the system dimensions");
    }
  }

  CspChain(const CspChain& other)
      : sys_(other.sys_), initial_(other.initial_), options_(other.options_) {}

  const FastSlowSystem& system() const { return sys_; }
  const ChainOptions& options() const { return options_; }
  Scheme scheme() const { return options_.scheme; }

  /// A chain over the same system and starting basis with other options;
  /// shares no cache with this one.
  CspChain with_options(ChainOptions options) const { return CspChain(sys_, initial_, std::move(options)); }

  /// Basis of iteration q for this chain's scheme.
  BlockBasis basis(int q) const { return basis(q, options_.scheme); }

  /// Basis of iteration q for either scheme (both start from the same A^(0)).
  BlockBasis basis(int q, Scheme scheme) const {
    if (q < 0) throw ContractError("CspChain::basis: q must be non-negative");
    std::lock_guard lock(bases_mutex_);
    auto& seq = scheme == Scheme::full ? full_ : one_step_;
    if (seq.empty()) seq.push_back(initial_);
    while (static_cast<int>(seq.size()) <= q) {
      seq.push_back(update(seq.back(), sys_, scheme, options_.csp));
    }
    return seq[q];
  }

  /// z = psi_(q)(y, eps), solving B^1_(q)(y, psi_(q-1)(y, eps), eps) g(y, z, eps) = 0.
  CspmPoint solve(int q, const Vec& y, double eps) const {
    const Key key{q, std::vector<double>(y.data(), y.data() + y.size()), eps};
    {
      std::lock_guard lock(cache_mutex_);
      if (auto it = cache_.find(key); it != cache_.end()) return it->second;
    }
    CspmPoint point = solve_uncached(q, y, eps);
    std::lock_guard lock(cache_mutex_);
    cache_[key] = point;
    return point;
  }

  Vec psi(int q, const Vec& y, double eps) const { return solve(q, y, eps).z; }

  /// State on the order-(q-1) CSP manifold where the order-q basis is frozen
  /// for the CSP condition; for q = 0 the designated fast guess.
  Vec freeze_point(int q, const Vec& y, double eps) const {
    const Vec z = q == 0 ? sys_.fast_guess(y) : psi(q - 1, y, eps);
    return sys_.join(y, z);
  }

 private:
  using Key = std::tuple<int, std::vector<double>, double>;

  CspmPoint solve_uncached(int q, const Vec& y, double eps) const {
    if (y.size() != sys_.slow_dim()) throw ContractError("cspm_solve: slow point has wrong dimension");
    const Vec x_frozen = freeze_point(q, y, eps);
    const int n = sys_.fast_dim();
    const Mat b1 = basis(q)(x_frozen, eps).b.topRows(n);

    auto residual = [&](const Vec& z) -> Vec { return b1 * eval_g(sys_, y, z, eps); };
    auto jacobian = [&](const Vec& z) -> Mat {
      return b1 * jacobian_g(sys_, sys_.join(y, z), eps, options_.csp.fd).rightCols(n);
    };
    try {
      const auto res = newton_solve_with_jacobian(residual, jacobian, sys_.fast_part(x_frozen),
                                                  options_.newton);
      return {res.root, res.residual_norm};
    } catch (const NonConvergenceError& e) {
      throw NonConvergenceError("CSP manifold solve failed (q=" + std::to_string(q) + ", " +
                                    detail::describe_state(x_frozen, eps) + "): " + e.what(),
                                e.final_residual(), e.trace());
    }
  }

  FastSlowSystem sys_;
  BlockBasis initial_;
  ChainOptions options_;

  mutable std::mutex bases_mutex_;
  mutable std::vector<BlockBasis> full_;
  mutable std::vector<BlockBasis> one_step_;

  // Values are deterministic, so concurrent writers of one key store the same result.
  mutable std::mutex cache_mutex_;
  mutable std::map<Key, CspmPoint> cache_;
};

inline Vec cspm_solve(const CspChain& chain, int q, const Vec& y, double eps) {
  return chain.psi(q, y, eps);
}

}  // namespace cspkit
