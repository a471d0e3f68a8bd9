// cspkit: convergence studies, method comparisons and trajectories for
// fast-slow systems. Exit codes: 0 pass, 1 assertion failure, 2 config
// error, 3 solver failure.

#include "cspkit/experiment/config.hpp"
#include "cspkit/experiment/output.hpp"
#include "cspkit/experiment/runner.hpp"
#include "cspkit/experiment/selftest.hpp"

#include "CLI11.hpp"

#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace {

enum Exit { kPass = 0, kAssertion = 1, kConfig = 2, kSolver = 3 };

// Flag values that override the configuration file; names mirror its keys.
struct Overrides {
  std::string config_path;
  std::optional<std::string> system;
  std::optional<double> kappa;
  std::optional<double> lambda;
  std::optional<std::string> scheme;
  std::optional<int> q_max;
  std::optional<int> reference_order;
  std::optional<std::string> reference;
  std::vector<double> s_grid;
  std::vector<double> eps_grid;
  std::optional<double> residual_tol;
  std::optional<double> rel_step;
  std::optional<std::string> output;
  std::optional<std::string> format;
  std::optional<std::uint64_t> seed;
  std::optional<double> t_end;
  std::optional<double> output_dt;
  std::optional<double> traj_eps;
  std::optional<double> z_offset;
};

void add_common(CLI::App* cmd, Overrides& o) {
  cmd->add_option("-c,--config", o.config_path, "JSON configuration file");
  cmd->add_option("--system", o.system, "mmh or linear");
  cmd->add_option("--kappa", o.kappa, "MMH kappa");
  cmd->add_option("--lambda", o.lambda, "MMH lambda");
  cmd->add_option("--scheme", o.scheme, "full, one-step, ildm or csp-no-dt");
  cmd->add_option("--q-max,--q_max", o.q_max, "highest CSP iteration (0..3)");
  cmd->add_option("--reference-order,--reference_order", o.reference_order, "order of the reference truncation");
  cmd->add_option("--reference", o.reference, "closed-form or numeric");
  cmd->add_option("--s-grid,--s_grid", o.s_grid, "slow grid points")->delimiter(',');
  cmd->add_option("--eps-grid,--eps_grid", o.eps_grid, "strictly decreasing eps values")->delimiter(',');
  cmd->add_option("--residual-tol,--residual_tol", o.residual_tol, "Newton residual tolerance");
  cmd->add_option("--rel-step,--rel_step", o.rel_step, "finite-difference relative step");
  cmd->add_option("-o,--output", o.output, "output path ('-' for stdout)");
  cmd->add_option("--format", o.format, "csv or json");
  cmd->add_option("--seed", o.seed, "seed for randomized checks");
}

cspkit::ExperimentConfig resolve(const Overrides& o) {
  using namespace cspkit;
  ExperimentConfig cfg = o.config_path.empty() ? default_config() : load_config(o.config_path);
  if (o.system) cfg.system.kind = *o.system;
  if (o.kappa) cfg.system.kappa = *o.kappa;
  if (o.lambda) cfg.system.lambda = *o.lambda;
  if (o.scheme) cfg.scheme = parse_method(*o.scheme);
  if (o.q_max) cfg.q_max = *o.q_max;
  if (o.reference_order) cfg.reference_order = *o.reference_order;
  if (o.reference) cfg.reference = *o.reference;
  if (!o.s_grid.empty()) {
    cfg.y_grid.clear();
    for (double s : o.s_grid) cfg.y_grid.push_back(Vec::Constant(1, s));
  }
  if (!o.eps_grid.empty()) cfg.eps_grid = o.eps_grid;
  if (o.residual_tol) cfg.newton.residual_tol = *o.residual_tol;
  if (o.rel_step) cfg.fd.rel_step = *o.rel_step;
  if (o.output) cfg.output_path = *o.output;
  if (o.format) {
    if (*o.format == "csv") cfg.format = OutputFormat::csv;
    else if (*o.format == "json") cfg.format = OutputFormat::json;
    else throw ConfigError("--format must be csv or json");
  }
  if (o.seed) cfg.seed = *o.seed;
  if (o.t_end) cfg.trajectory.t_end = *o.t_end;
  if (o.output_dt) cfg.trajectory.output_dt = *o.output_dt;
  if (o.traj_eps) cfg.trajectory.eps = *o.traj_eps;
  if (o.z_offset) cfg.trajectory.z_offset = Vec::Constant(1, *o.z_offset);
  cfg.validate();
  return cfg;
}

template <typename Result>
void emit(const cspkit::ExperimentConfig& cfg, const Result& res) {
  std::ofstream file;
  const bool to_stdout = cfg.output_path.empty() || cfg.output_path == "-";
  if (!to_stdout) {
    file.open(cfg.output_path, std::ios::binary);
    if (!file) throw cspkit::ConfigError("cannot write output file '" + cfg.output_path + "'");
  }
  std::ostream& os = to_stdout ? std::cout : file;
  if (cfg.format == cspkit::OutputFormat::json) {
    os << cspkit::to_json(res).dump(2) << '\n';
  } else {
    cspkit::write_csv(os, res);
  }
}

void summarize(const cspkit::StudyResult& res) {
  for (const auto& a : res.assertions) {
    std::cerr << (a.passed ? "PASS " : "FAIL ") << cspkit::to_string(a.assertion.scheme) << " q=" << a.assertion.q
              << " y=" << cspkit::detail::fmt_vec(a.y) << " slope=" << cspkit::detail::fmt_short(a.slope) << " ("
              << cspkit::detail::assertion_message(a.assertion) << ")\n";
  }
  for (const auto& r : res.rows) {
    if (!r.error.empty()) std::cerr << "solver failure: " << r.error << '\n';
  }
}

int study_exit(const cspkit::StudyResult& res) {
  summarize(res);
  if (res.has_solver_failure()) return kSolver;
  return res.assertions_passed() ? kPass : kAssertion;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"CSP, ILDM and slow-manifold expansion studies for fast-slow systems"};
  app.require_subcommand(1);

  Overrides converge_o, compare_o, trajectory_o, selftest_o;
  auto* converge = app.add_subcommand("converge", "order-of-accuracy study for one scheme");
  add_common(converge, converge_o);
  auto* compare = app.add_subcommand("compare", "full CSP, one-step CSP, ILDM and CSP without dA/dt side by side");
  add_common(compare, compare_o);
  auto* trajectory = app.add_subcommand("trajectory", "integrate and report distance to the CSP manifold");
  add_common(trajectory, trajectory_o);
  trajectory->add_option("--t-end,--t_end", trajectory_o.t_end, "final fast time (0 for a single row)");
  trajectory->add_option("--output-dt,--output_dt", trajectory_o.output_dt, "output spacing");
  trajectory->add_option("--eps", trajectory_o.traj_eps, "eps of the run");
  trajectory->add_option("--z-offset,--z_offset", trajectory_o.z_offset, "start offset from h0(y0)");
  auto* selftest = app.add_subcommand("selftest", "run all property suites");
  add_common(selftest, selftest_o);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kPass : kConfig;
  }

  try {
    if (*converge) {
      const auto cfg = resolve(converge_o);
      const auto res = cspkit::run_converge(cfg);
      emit(cfg, res);
      return study_exit(res);
    }
    if (*compare) {
      const auto cfg = resolve(compare_o);
      const auto res = cspkit::run_compare(cfg);
      emit(cfg, res);
      return study_exit(res);
    }
    if (*trajectory) {
      const auto cfg = resolve(trajectory_o);
      emit(cfg, cspkit::run_trajectory(cfg));
      return kPass;
    }
    const auto cfg = resolve(selftest_o);
    const auto checks = cspkit::run_selftest(cfg.seed, cfg.system.kappa, cfg.system.lambda, cfg.fd);
    emit(cfg, checks);
    bool ok = true;
    for (const auto& c : checks) {
      std::cerr << (c.passed ? "PASS " : "FAIL ") << c.name << " value=" << cspkit::detail::fmt_short(c.value)
                << (c.lower_bound ? " min=" : " max=") << cspkit::detail::fmt_short(c.threshold)
                << (c.detail.empty() ? "" : " (" + c.detail + ")") << '\n';
      ok = ok && c.passed;
    }
    return ok ? kPass : kAssertion;
  } catch (const cspkit::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const cspkit::ParameterError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const cspkit::SolverError& e) {
    std::cerr << "solver failure: " << e.what() << '\n';
    return kSolver;
  } catch (const cspkit::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kConfig;
  }
}
