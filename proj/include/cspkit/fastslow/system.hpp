#pragma once

// Fast-slow systems y' = eps g1(y, z, eps), z' = g2(y, z, eps) on the fast
// time scale. The stacked state is ordered slow-then-fast: x = (y, z).

#include "cspkit/errors.hpp"
#include "cspkit/numcore/fd.hpp"
#include "cspkit/numcore/types.hpp"

#include <algorithm>
#include <functional>
#include <optional>
#include <string>
#include <utility>

namespace cspkit {

using FieldFn = std::function<Vec(const Vec& y, const Vec& z, double eps)>;
using PartialFn = std::function<Mat(const Vec& y, const Vec& z, double eps)>;

/// Analytic first partials of g1 and g2. Any member may be left empty, in
/// which case that partial falls back to finite differences.
struct AnalyticPartials {
  PartialFn dy_g1, dz_g1, dy_g2, dz_g2;
  FieldFn deps_g1, deps_g2;
};

class FastSlowSystem {
 public:
  FastSlowSystem(std::string name, int slow_dim, int fast_dim, FieldFn g1, FieldFn g2)
      : name_(std::move(name)), m_(slow_dim), n_(fast_dim), g1_(std::move(g1)), g2_(std::move(g2)) {
    if (m_ <= 0 || n_ <= 0) throw ContractError("FastSlowSystem: dimensions must be positive");
    if (!g1_ || !g2_) throw ContractError("FastSlowSystem: g1 and g2 must be provided");
  }

  FastSlowSystem with_partials(AnalyticPartials partials) const {
    FastSlowSystem copy = *this;
    copy.partials_ = std::move(partials);
    return copy;
  }

  /// Designates the branch of g2(y, z, 0) = 0 to follow: Newton solves for
  /// h0 start from this guess.
  FastSlowSystem with_fast_guess(VecFn guess) const {
    FastSlowSystem copy = *this;
    copy.fast_guess_ = std::move(guess);
    return copy;
  }

  const std::string& name() const { return name_; }
  int slow_dim() const { return m_; }
  int fast_dim() const { return n_; }
  int dim() const { return m_ + n_; }

  Vec g1(const Vec& y, const Vec& z, double eps) const {
    check_dims(y, z, "g1");
    Vec out = g1_(y, z, eps);
    if (out.size() != m_) throw ContractError("FastSlowSystem::g1 returned wrong dimension");
    return out;
  }

  Vec g2(const Vec& y, const Vec& z, double eps) const {
    check_dims(y, z, "g2");
    Vec out = g2_(y, z, eps);
    if (out.size() != n_) throw ContractError("FastSlowSystem::g2 returned wrong dimension");
    return out;
  }

  const std::optional<AnalyticPartials>& partials() const { return partials_; }

  Vec fast_guess(const Vec& y) const {
    if (fast_guess_) return fast_guess_(y);
    return Vec::Zero(n_);
  }

  Vec slow_part(const Vec& x) const {
    check_state(x);
    return x.head(m_);
  }
  Vec fast_part(const Vec& x) const {
    check_state(x);
    return x.tail(n_);
  }
  Vec join(const Vec& y, const Vec& z) const {
    check_dims(y, z, "join");
    Vec x(m_ + n_);
    x << y, z;
    return x;
  }

  void check_state(const Vec& x) const {
    if (x.size() != m_ + n_) {
      throw ContractError("FastSlowSystem '" + name_ + "': state has dimension " +
                          std::to_string(x.size()) + ", expected " + std::to_string(m_ + n_));
    }
  }

 private:
  void check_dims(const Vec& y, const Vec& z, const char* what) const {
    if (y.size() != m_ || z.size() != n_) {
      throw ContractError(std::string("FastSlowSystem '") + name_ + "': dimension mismatch in " +
                          what);
    }
  }

  std::string name_;
  int m_;
  int n_;
  FieldFn g1_;
  FieldFn g2_;
  std::optional<AnalyticPartials> partials_;
  VecFn fast_guess_;
};

/// Stacked field (eps g1, g2), slow block first.
inline Vec eval_g(const FastSlowSystem& sys, const Vec& y, const Vec& z, double eps) {
  Vec out(sys.dim());
  out << eps * sys.g1(y, z, eps), sys.g2(y, z, eps);
  return out;
}

inline Vec eval_g(const FastSlowSystem& sys, const Vec& x, double eps) {
  return eval_g(sys, sys.slow_part(x), sys.fast_part(x), eps);
}

// Partial derivatives, analytic when attached and finite differences otherwise.

inline Mat dy_g1(const FastSlowSystem& s, const Vec& y, const Vec& z, double e, const FdConfig& fd = {}) {
  if (s.partials() && s.partials()->dy_g1) return s.partials()->dy_g1(y, z, e);
  return jacobian_fd([&](const Vec& v) { return s.g1(v, z, e); }, y, fd);
}
inline Mat dz_g1(const FastSlowSystem& s, const Vec& y, const Vec& z, double e, const FdConfig& fd = {}) {
  if (s.partials() && s.partials()->dz_g1) return s.partials()->dz_g1(y, z, e);
  return jacobian_fd([&](const Vec& v) { return s.g1(y, v, e); }, z, fd);
}
inline Mat dy_g2(const FastSlowSystem& s, const Vec& y, const Vec& z, double e, const FdConfig& fd = {}) {
  if (s.partials() && s.partials()->dy_g2) return s.partials()->dy_g2(y, z, e);
  return jacobian_fd([&](const Vec& v) { return s.g2(v, z, e); }, y, fd);
}
inline Mat dz_g2(const FastSlowSystem& s, const Vec& y, const Vec& z, double e, const FdConfig& fd = {}) {
  if (s.partials() && s.partials()->dz_g2) return s.partials()->dz_g2(y, z, e);
  return jacobian_fd([&](const Vec& v) { return s.g2(y, v, e); }, z, fd);
}

namespace detail {
// d/d(eps) by a central difference; g must be defined for slightly negative eps.
inline Vec deps_fd(const std::function<Vec(double)>& f, double e, const FdConfig& fd) {
  Vec arg(1);
  arg << e;
  return jacobian_fd([&](const Vec& v) { return f(v(0)); }, arg, fd).col(0);
}
}  // namespace detail

inline Vec deps_g1(const FastSlowSystem& s, const Vec& y, const Vec& z, double e, const FdConfig& fd = {}) {
  if (s.partials() && s.partials()->deps_g1) return s.partials()->deps_g1(y, z, e);
  return detail::deps_fd([&](double t) { return s.g1(y, z, t); }, e, fd);
}
inline Vec deps_g2(const FastSlowSystem& s, const Vec& y, const Vec& z, double e, const FdConfig& fd = {}) {
  if (s.partials() && s.partials()->deps_g2) return s.partials()->deps_g2(y, z, e);
  return detail::deps_fd([&](double t) { return s.g2(y, z, t); }, e, fd);
}

/// Jacobian Dg of the stacked field with respect to x = (y, z).
inline Mat jacobian_g(const FastSlowSystem& s, const Vec& x, double e, const FdConfig& fd = {}) {
  const Vec y = s.slow_part(x);
  const Vec z = s.fast_part(x);
  const int m = s.slow_dim();
  const int n = s.fast_dim();
  Mat jac(m + n, m + n);
  jac.topLeftCorner(m, m) = e * dy_g1(s, y, z, e, fd);
  jac.topRightCorner(m, n) = e * dz_g1(s, y, z, e, fd);
  jac.bottomLeftCorner(n, m) = dy_g2(s, y, z, e, fd);
  jac.bottomRightCorner(n, n) = dz_g2(s, y, z, e, fd);
  return jac;
}

/// Samples g1, g2 and their first partials at eps = 1e-2 and 1e-6 and checks
/// that the two samples stay within a factor of 10 of each other, i.e. that
/// none of them is secretly scaled by eps.
inline bool order_one_check(const FastSlowSystem& s, const Vec& y, const Vec& z,
                            const FdConfig& fd = {}) {
  auto sample = [&](double e) {
    return std::vector<double>{s.g1(y, z, e).norm(),         s.g2(y, z, e).norm(),
                               dy_g1(s, y, z, e, fd).norm(), dz_g1(s, y, z, e, fd).norm(),
                               dy_g2(s, y, z, e, fd).norm(), dz_g2(s, y, z, e, fd).norm()};
  };
  const auto a = sample(1e-2);
  const auto b = sample(1e-6);
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double hi = std::max(a[i], b[i]);
    const double lo = std::min(a[i], b[i]);
    if (hi > 1e-12 && hi > 10.0 * lo) return false;
  }
  return true;
}

}  // namespace cspkit
