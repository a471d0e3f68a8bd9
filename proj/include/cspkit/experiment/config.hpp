#pragma once

// Experiment configuration: one JSON document per study. Every key has a
// default, so an empty object is a valid (MMH, one-step) configuration.

#include "cspkit/csp/chain.hpp"
#include "cspkit/errors.hpp"
#include "cspkit/fastslow/expansion.hpp"
#include "cspkit/fastslow/linear.hpp"
#include "cspkit/fastslow/mmh.hpp"
#include "cspkit/numcore/fd.hpp"
#include "cspkit/numcore/newton.hpp"

#include "json.hpp"

#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace cspkit {

/// Manifold methods a study can run. The first two are CSP proper.
enum class Method { full, one_step, ildm, csp_no_dt };

inline const char* to_string(Method m) {
  switch (m) {
    case Method::full: return "full";
    case Method::one_step: return "one-step";
    case Method::ildm: return "ildm";
    case Method::csp_no_dt: return "csp-no-dt";
  }
  return "?";
}

inline Method parse_method(const std::string& s) {
  if (s == "full") return Method::full;
  if (s == "one-step") return Method::one_step;
  if (s == "ildm") return Method::ildm;
  if (s == "csp-no-dt") return Method::csp_no_dt;
  throw ConfigError("unknown scheme '" + s + "' (expected full, one-step, ildm or csp-no-dt)");
}

enum class OutputFormat { csv, json };

struct SystemSpec {
  std::string kind = "mmh";  ///< "mmh" or the builtin "linear"
  double kappa = 2.0;
  double lambda = 1.0;
};

/// A slope check on the fit of one (scheme, q) series. Without `y` it applies
/// to every slow grid point.
struct SlopeAssertion {
  Method scheme = Method::one_step;
  int q = 0;
  std::optional<Vec> y;
  double expected = 0.0;
  double tolerance = 0.3;
  /// Only the lower end of the band is enforced.
  bool at_least = false;

  bool accepts(double slope) const {
    if (!(slope >= expected - tolerance)) return false;
    return at_least || slope <= expected + tolerance;
  }
};

struct TrajectorySpec {
  Vec y0;
  /// Either an absolute start z0, or an offset added to h0(y0).
  std::optional<Vec> z0;
  std::optional<Vec> z_offset;
  std::optional<double> eps;  ///< defaults to the first entry of eps_grid
  double t_end = 10.0;
  double output_dt = 0.5;
  double tol = 1e-10;
};

struct ExperimentConfig {
  SystemSpec system;
  Method scheme = Method::one_step;
  int q_max = 2;
  /// Order of the truncated expansion sum_{j <= order} eps^j h_j used as reference.
  int reference_order = 2;
  /// "closed-form" uses the system's known coefficients, "numeric" the
  /// invariance-equation expansion.
  std::string reference = "closed-form";
  std::vector<Vec> y_grid;
  std::vector<double> eps_grid;
  NewtonConfig newton;
  FdConfig fd;
  std::string output_path;  ///< empty or "-" writes to stdout
  OutputFormat format = OutputFormat::csv;
  std::uint64_t seed = 20020101;
  std::vector<SlopeAssertion> assertions;
  TrajectorySpec trajectory;

  /// Throws ConfigError on any violated constraint.
  void validate() const {
    if (system.kind == "mmh") {
      try {
        MmhParams{system.kappa, system.lambda}.validate();
      } catch (const ParameterError& e) {
        throw ConfigError(e.what());
      }
    } else if (system.kind != "linear") {
      throw ConfigError("unknown system '" + system.kind + "' (expected mmh or linear)");
    }
    if (q_max < 0 || q_max > 3) throw ConfigError("q_max must lie in 0..3");
    if (reference_order < 0 || reference_order > 2) throw ConfigError("reference_order must lie in 0..2");
    if (reference != "closed-form" && reference != "numeric") {
      throw ConfigError("reference must be 'closed-form' or 'numeric'");
    }
    if (eps_grid.empty()) throw ConfigError("eps_grid must not be empty");
    for (std::size_t i = 0; i < eps_grid.size(); ++i) {
      if (!(eps_grid[i] > 0.0 && eps_grid[i] < 0.5)) throw ConfigError("eps_grid entries must lie in (0, 0.5)");
      if (i > 0 && !(eps_grid[i] < eps_grid[i - 1])) throw ConfigError("eps_grid must be strictly decreasing");
    }
    if (y_grid.empty()) throw ConfigError("y_grid (or s_grid) must not be empty");
    for (const Vec& y : y_grid) {
      if (y.size() != 1) throw ConfigError("grid points must be one-dimensional for the built-in systems");
    }
    try {
      newton.validate();
      fd.validate();
    } catch (const ContractError& e) {
      throw ConfigError(e.what());
    }
    for (const auto& a : assertions) {
      if (a.q < 0 || a.q > q_max) throw ConfigError("assertion q outside 0..q_max");
      if (!(a.tolerance >= 0.0)) throw ConfigError("assertion tolerance must be non-negative");
    }
    if (!(trajectory.t_end >= 0.0)) throw ConfigError("trajectory.t_end must be non-negative");
    if (!(trajectory.tol > 0.0)) throw ConfigError("trajectory.tol must be positive");
    if (!(trajectory.output_dt >= 0.0)) throw ConfigError("trajectory.output_dt must be non-negative");
  }

  FastSlowSystem make_system() const {
    if (system.kind == "linear") return linear_test_system(1);
    return mmh_system(system.kappa, system.lambda);
  }

  /// Reference expansion coefficients for the configured system.
  ExpansionCoeffs make_reference(const FastSlowSystem& sys) const {
    if (reference == "numeric") {
      Vec lo = y_grid.front(), hi = y_grid.front();
      for (const Vec& y : y_grid) {
        lo = lo.cwiseMin(y);
        hi = hi.cwiseMax(y);
      }
      const auto h0 = reduced_manifold(sys, Box{lo, hi}, newton);
      return numeric_expansion(sys, h0, fd);
    }
    if (system.kind == "linear") return linear_test_coeffs();
    return mmh_h_coeffs(system.kappa, system.lambda);
  }

  ChainOptions chain_options(Scheme s) const {
    ChainOptions opts;
    opts.scheme = s;
    opts.csp.fd = fd;
    opts.newton = newton;
    return opts;
  }
};

/// Acceptance-grid defaults: MMH (2, 1), s in {0.5, 1, 2}, eps in
/// {1e-2, 10^-2.5, 1e-3, 10^-3.5}.
inline ExperimentConfig default_config() {
  ExperimentConfig cfg;
  for (double s : {0.5, 1.0, 2.0}) cfg.y_grid.push_back(Vec::Constant(1, s));
  cfg.eps_grid = {1e-2, 3.1622776601683795e-3, 1e-3, 3.1622776601683794e-4};
  cfg.trajectory.y0 = cfg.y_grid.front();
  return cfg;
}

namespace detail {

using nlohmann::json;

inline Vec json_vec(const json& j, const char* key) {
  if (j.is_number()) return Vec::Constant(1, j.get<double>());
  if (!j.is_array() || j.empty()) throw ConfigError(std::string(key) + ": expected a number or non-empty array");
  Vec v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
  return v;
}

template <typename T>
void read_opt(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

inline void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || it.key() == a;
    if (!ok) throw ConfigError("unknown key '" + it.key() + "' in " + where);
  }
}

}  // namespace detail

/// Parses a configuration document over default_config(). Unknown keys are
/// rejected so typos fail loudly; value checks are left to validate().
inline ExperimentConfig parse_config(const nlohmann::json& j) {
  using detail::json;
  ExperimentConfig cfg = default_config();
  bool y0_given = false;
  try {
    if (!j.is_object()) throw ConfigError("configuration must be a JSON object");
    detail::check_keys(j,
                       {"system", "scheme", "q_max", "reference_order", "reference", "y_grid", "s_grid",
                        "eps_grid", "newton", "fd", "output", "seed", "assertions", "trajectory"},
                       "configuration");
    if (j.contains("system")) {
      const json& s = j.at("system");
      if (s.is_string()) {
        cfg.system.kind = s.get<std::string>();
      } else if (s.contains("mmh")) {
        cfg.system.kind = "mmh";
        const json& p = s.at("mmh");
        detail::check_keys(p, {"kappa", "lambda"}, "system.mmh");
        detail::read_opt(p, "kappa", cfg.system.kappa);
        detail::read_opt(p, "lambda", cfg.system.lambda);
      } else if (s.contains("builtin")) {
        cfg.system.kind = s.at("builtin").get<std::string>();
      } else {
        throw ConfigError("system: expected {\"mmh\": {...}} or {\"builtin\": name}");
      }
    }
    if (j.contains("scheme")) cfg.scheme = parse_method(j.at("scheme").get<std::string>());
    detail::read_opt(j, "q_max", cfg.q_max);
    detail::read_opt(j, "reference_order", cfg.reference_order);
    detail::read_opt(j, "reference", cfg.reference);
    if (j.contains("y_grid") && j.contains("s_grid")) throw ConfigError("give either y_grid or s_grid, not both");
    for (const char* key : {"y_grid", "s_grid"}) {
      if (!j.contains(key)) continue;
      cfg.y_grid.clear();
      for (const json& p : j.at(key)) cfg.y_grid.push_back(detail::json_vec(p, key));
    }
    if (j.contains("eps_grid")) cfg.eps_grid = j.at("eps_grid").get<std::vector<double>>();
    if (j.contains("newton")) {
      const json& n = j.at("newton");
      detail::check_keys(n, {"residual_tol", "max_iters", "damping", "max_halvings"}, "newton");
      detail::read_opt(n, "residual_tol", cfg.newton.residual_tol);
      detail::read_opt(n, "max_iters", cfg.newton.max_iters);
      detail::read_opt(n, "damping", cfg.newton.damping);
      detail::read_opt(n, "max_halvings", cfg.newton.max_halvings);
    }
    if (j.contains("fd")) {
      const json& f = j.at("fd");
      detail::check_keys(f, {"rel_step", "abs_floor", "richardson"}, "fd");
      detail::read_opt(f, "rel_step", cfg.fd.rel_step);
      detail::read_opt(f, "abs_floor", cfg.fd.abs_floor);
      detail::read_opt(f, "richardson", cfg.fd.richardson);
    }
    if (j.contains("output")) {
      const json& o = j.at("output");
      detail::check_keys(o, {"path", "format"}, "output");
      detail::read_opt(o, "path", cfg.output_path);
      if (o.contains("format")) {
        const auto f = o.at("format").get<std::string>();
        if (f == "csv") cfg.format = OutputFormat::csv;
        else if (f == "json") cfg.format = OutputFormat::json;
        else throw ConfigError("output.format must be csv or json");
      }
    }
    detail::read_opt(j, "seed", cfg.seed);
    if (j.contains("assertions")) {
      for (const json& a : j.at("assertions")) {
        detail::check_keys(a, {"scheme", "q", "y", "s", "expected", "tolerance", "at_least"}, "assertions[]");
        SlopeAssertion sa;
        if (a.contains("scheme")) sa.scheme = parse_method(a.at("scheme").get<std::string>());
        detail::read_opt(a, "q", sa.q);
        if (a.contains("y")) sa.y = detail::json_vec(a.at("y"), "assertions[].y");
        if (a.contains("s")) sa.y = detail::json_vec(a.at("s"), "assertions[].s");
        if (!a.contains("expected")) throw ConfigError("assertions[]: 'expected' is required");
        sa.expected = a.at("expected").get<double>();
        detail::read_opt(a, "tolerance", sa.tolerance);
        detail::read_opt(a, "at_least", sa.at_least);
        cfg.assertions.push_back(std::move(sa));
      }
    }
    if (j.contains("trajectory")) {
      const json& t = j.at("trajectory");
      detail::check_keys(t, {"y0", "z0", "z_offset", "eps", "t_end", "output_dt", "tol"}, "trajectory");
      if (t.contains("y0")) {
        cfg.trajectory.y0 = detail::json_vec(t.at("y0"), "trajectory.y0");
        y0_given = true;
      }
      if (t.contains("z0")) cfg.trajectory.z0 = detail::json_vec(t.at("z0"), "trajectory.z0");
      if (t.contains("z_offset")) cfg.trajectory.z_offset = detail::json_vec(t.at("z_offset"), "trajectory.z_offset");
      if (t.contains("eps")) cfg.trajectory.eps = t.at("eps").get<double>();
      detail::read_opt(t, "t_end", cfg.trajectory.t_end);
      detail::read_opt(t, "output_dt", cfg.trajectory.output_dt);
      detail::read_opt(t, "tol", cfg.trajectory.tol);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed configuration: ") + e.what());
  }
  if (!y0_given && !cfg.y_grid.empty()) cfg.trajectory.y0 = cfg.y_grid.front();
  return cfg;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open configuration file '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("'" + path + "' is not valid JSON: " + e.what());
  }
  return parse_config(j);
}

}  // namespace cspkit
