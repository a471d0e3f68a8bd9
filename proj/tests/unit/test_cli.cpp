#include "cspkit/csp/chain.hpp"
#include "cspkit/experiment/config.hpp"
#include "cspkit/experiment/output.hpp"
#include "cspkit/experiment/runner.hpp"
#include "cspkit/fastslow/mmh.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <sys/wait.h>

using namespace cspkit;
using nlohmann::json;

namespace {

constexpr double K = 2.0;
constexpr double L = 1.0;

Vec scalar(double v) { return Vec::Constant(1, v); }

ExperimentConfig small_config() {
  ExperimentConfig cfg = default_config();
  cfg.y_grid = {scalar(1.0)};
  cfg.eps_grid = {1e-2, 1e-3, 1e-4};
  return cfg;
}

const ResultRow& find_row(const StudyResult& res, Method m, int q, double y, double eps) {
  for (const auto& r : res.rows) {
    if (r.scheme == m && r.q == q && r.y(0) == y && r.eps == eps) return r;
  }
  throw std::runtime_error("row not found");
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(CSPKIT_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string config_path(const std::string& name) { return std::string(CSPKIT_CONFIG_DIR) + "/" + name; }

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("cspkit_test_" + name)).string();
}

}  // namespace

TEST(Config, DefaultIsAcceptanceGrid) {
  const ExperimentConfig cfg = default_config();
  EXPECT_NO_THROW(cfg.validate());
  EXPECT_EQ(cfg.y_grid.size(), 3u);
  ASSERT_EQ(cfg.eps_grid.size(), 4u);
  EXPECT_DOUBLE_EQ(cfg.eps_grid[1], std::pow(10.0, -2.5));
  EXPECT_EQ(cfg.system.kappa, 2.0);
  EXPECT_EQ(cfg.system.lambda, 1.0);
}

TEST(Config, RejectsInvalidGrids) {
  ExperimentConfig cfg = small_config();
  cfg.eps_grid.clear();
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg.eps_grid = {1e-3, 1e-2};
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg.eps_grid = {1e-2, 1e-2};
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg.eps_grid = {0.6, 1e-2};
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg.eps_grid = {1e-2, 0.0};
  EXPECT_THROW(cfg.validate(), ConfigError);
}

TEST(Config, RejectsQMaxAboveThree) {
  ExperimentConfig cfg = small_config();
  cfg.q_max = 4;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg.q_max = 3;
  EXPECT_NO_THROW(cfg.validate());
}

TEST(Config, ParsesDocument) {
  const json j = json::parse(R"({
    "system": {"mmh": {"kappa": 3.0, "lambda": 0.5}},
    "scheme": "full", "q_max": 1,
    "s_grid": [0.5, 2.0],
    "eps_grid": [1e-2, 1e-3, 1e-4],
    "newton": {"residual_tol": 1e-12},
    "output": {"path": "out.json", "format": "json"},
    "seed": 7,
    "assertions": [{"scheme": "full", "q": 1, "s": 0.5, "expected": 2.0}]
  })");
  const ExperimentConfig cfg = parse_config(j);
  EXPECT_EQ(cfg.system.kappa, 3.0);
  EXPECT_EQ(cfg.system.lambda, 0.5);
  EXPECT_EQ(cfg.scheme, Method::full);
  EXPECT_EQ(cfg.q_max, 1);
  ASSERT_EQ(cfg.y_grid.size(), 2u);
  EXPECT_EQ(cfg.y_grid[1](0), 2.0);
  EXPECT_EQ(cfg.newton.residual_tol, 1e-12);
  EXPECT_EQ(cfg.format, OutputFormat::json);
  EXPECT_EQ(cfg.output_path, "out.json");
  EXPECT_EQ(cfg.seed, 7u);
  ASSERT_EQ(cfg.assertions.size(), 1u);
  EXPECT_EQ((*cfg.assertions[0].y)(0), 0.5);
  EXPECT_EQ(cfg.trajectory.y0(0), 0.5);
}

TEST(Config, RejectsUnknownKeysAndBadValues) {
  EXPECT_THROW(parse_config(json::parse(R"({"eps_grd": [0.01]})")), ConfigError);
  EXPECT_THROW(parse_config(json::parse(R"({"newton": {"tol": 1}})")), ConfigError);
  EXPECT_THROW(parse_config(json::parse(R"({"scheme": "two-step"})")), ConfigError);
  EXPECT_THROW(parse_config(json::parse(R"({"q_max": "two"})")), ConfigError);
  EXPECT_THROW(parse_config(json::parse(R"({"assertions": [{"q": 1}]})")), ConfigError);
  EXPECT_THROW(parse_config(json::parse(R"([1, 2])")), ConfigError);
}

TEST(Config, SampleConfigsLoad) {
  for (const char* name :
       {"mmh_one_step.json", "mmh_full.json", "mmh_compare.json", "linear_compare.json", "trajectory.json"}) {
    EXPECT_NO_THROW(load_config(config_path(name)).validate()) << name;
  }
  EXPECT_THROW(load_config(config_path("missing.json")), ConfigError);
}

TEST(RunConverge, ZerothIterateErrorIsTruncationTail) {
  // psi_(0) = h0 exactly, so the error is the rest of the order-2 series.
  ExperimentConfig cfg = small_config();
  cfg.y_grid = {scalar(0.5), scalar(1.0), scalar(2.0)};
  cfg.q_max = 0;
  const StudyResult res = run_converge(cfg);
  const ExpansionCoeffs h = mmh_h_coeffs(K, L);
  for (const auto& r : res.rows) {
    ASSERT_TRUE(r.error.empty()) << r.error;
    const double tail = std::abs(r.eps * h.h[1](r.y)(0) + r.eps * r.eps * h.h[2](r.y)(0));
    EXPECT_NEAR(r.abs_error, tail, 1e-12) << "s=" << r.y(0) << " eps=" << r.eps;
    EXPECT_LE(r.residual, cfg.newton.residual_tol);
  }
  EXPECT_EQ(res.fits.size(), 3u);
}

TEST(RunConverge, RowsSortedAndFitted) {
  ExperimentConfig cfg = small_config();
  cfg.q_max = 2;
  cfg.assertions = {{Method::one_step, 1, std::nullopt, 2.0, 0.3, false}};
  const StudyResult res = run_converge(cfg);
  ASSERT_EQ(res.rows.size(), 9u);
  for (std::size_t i = 0; i + 1 < res.rows.size(); ++i) {
    const auto& a = res.rows[i];
    const auto& b = res.rows[i + 1];
    EXPECT_TRUE(a.q < b.q || (a.q == b.q && a.eps > b.eps));
  }
  ASSERT_EQ(res.assertions.size(), 1u);
  EXPECT_TRUE(res.assertions_passed());
  EXPECT_NEAR(res.assertions[0].slope, 2.0, 0.1);
}

TEST(RunConverge, UnmatchedAssertionFails) {
  ExperimentConfig cfg = small_config();
  cfg.q_max = 1;
  cfg.assertions = {{Method::full, 1, std::nullopt, 2.0, 0.3, false}};
  EXPECT_FALSE(run_converge(cfg).assertions_passed());
}

TEST(RunConverge, WrongAssertionBandFails) {
  ExperimentConfig cfg = small_config();
  cfg.q_max = 1;
  cfg.assertions = {{Method::one_step, 1, std::nullopt, 3.0, 0.3, false}};
  EXPECT_FALSE(run_converge(cfg).assertions_passed());
}

TEST(RunCompare, LinearSystemMethodsAgree) {
  ExperimentConfig cfg = load_config(config_path("linear_compare.json"));
  const StudyResult res = run_compare(cfg);
  for (const Vec& y : cfg.y_grid) {
    for (double e : cfg.eps_grid) {
      const double exact = e / (1.0 - e) * y(0);
      for (Method m : {Method::full, Method::one_step, Method::ildm, Method::csp_no_dt}) {
        EXPECT_NEAR(find_row(res, m, m == Method::ildm ? 0 : cfg.q_max, y(0), e).z_value(0), exact, 1e-9)
            << to_string(m) << " y=" << y(0) << " eps=" << e;
      }
    }
  }
}

TEST(RunCompare, CspBeatsIldmAtSmallEps) {
  ExperimentConfig cfg = small_config();
  const StudyResult res = run_compare(cfg);
  const double csp = find_row(res, Method::full, 2, 1.0, 1e-3).abs_error;
  const double ildm = find_row(res, Method::ildm, 0, 1.0, 1e-3).abs_error;
  EXPECT_LT(csp, ildm);
  EXPECT_LT(find_row(res, Method::one_step, 2, 1.0, 1e-3).abs_error, ildm);
}

TEST(RunCompare, TinyEpsCollapsesToReducedManifold) {
  ExperimentConfig cfg = small_config();
  cfg.y_grid = {scalar(0.5), scalar(1.0), scalar(2.0)};
  cfg.eps_grid = {1e-6, 1e-7, 1e-8};
  const StudyResult res = run_compare(cfg);
  EXPECT_EQ(res.rows.size(), 36u);
  for (const auto& r : res.rows) {
    if (r.eps != 1e-8) continue;
    ASSERT_TRUE(r.error.empty()) << r.error;
    EXPECT_NEAR(r.z_value(0), r.y(0) / (r.y(0) + K), 1e-6) << to_string(r.scheme) << " s=" << r.y(0);
  }
}

TEST(RunTrajectory, StartOnManifoldStaysClose) {
  ExperimentConfig cfg = small_config();
  cfg.scheme = Method::full;
  cfg.trajectory.y0 = scalar(1.0);
  cfg.trajectory.t_end = 5.0;
  cfg.trajectory.output_dt = 0.5;
  cfg.trajectory.tol = 1e-10;
  // Off-manifold drift is O(eps^3) at q = 2, far below the integrator tolerance at eps = 1e-3.
  cfg.trajectory.eps = 1e-3;
  const CspChain chain(mmh_system(K, L), default_initial_basis(1, 1), cfg.chain_options(Scheme::full));
  cfg.trajectory.z0 = chain.psi(2, scalar(1.0), 1e-3);
  const TrajectoryResult res = run_trajectory(cfg);
  ASSERT_EQ(res.rows.size(), 11u);
  for (const auto& r : res.rows) EXPECT_LE(r.distance, 10 * cfg.trajectory.tol) << "t=" << r.t;
}

TEST(RunTrajectory, OffsetStartIsAttracted) {
  const ExperimentConfig cfg = load_config(config_path("trajectory.json"));
  const TrajectoryResult res = run_trajectory(cfg);
  double d1 = -1, d10 = -1;
  for (const auto& r : res.rows) {
    if (r.t == 1.0) d1 = r.distance;
    if (r.t == 10.0) d10 = r.distance;
  }
  ASSERT_GT(d1, 0.0);
  ASSERT_GE(d10, 0.0);
  EXPECT_LT(d10, d1);
  EXPECT_NEAR(res.rows.front().distance, 0.5, 1e-3);
}

TEST(RunTrajectory, ZeroEndTimeGivesSingleRow) {
  ExperimentConfig cfg = small_config();
  cfg.trajectory.y0 = scalar(1.0);
  cfg.trajectory.t_end = 0.0;
  const TrajectoryResult res = run_trajectory(cfg);
  ASSERT_EQ(res.rows.size(), 1u);
  EXPECT_EQ(res.rows[0].t, 0.0);
}

TEST(RunTrajectory, RejectsConflictingStart) {
  ExperimentConfig cfg = small_config();
  cfg.trajectory.y0 = scalar(1.0);
  cfg.trajectory.z0 = scalar(0.3);
  cfg.trajectory.z_offset = scalar(0.1);
  EXPECT_THROW(run_trajectory(cfg), ConfigError);
}

TEST(Output, CsvQuotingAndLineEnds) {
  EXPECT_EQ(detail::csv_field("plain"), "plain");
  EXPECT_EQ(detail::csv_field("a,b"), "\"a,b\"");
  EXPECT_EQ(detail::csv_field("say \"hi\""), "\"say \"\"hi\"\"\"");
  EXPECT_EQ(detail::csv_field("two\nlines"), "\"two\nlines\"");
  std::ostringstream os;
  detail::csv_line(os, {"x", "y,z"});
  EXPECT_EQ(os.str(), "x,\"y,z\"\r\n");
}

TEST(Output, SeventeenDigitFloats) {
  EXPECT_EQ(detail::fmt_double(0.1), "0.10000000000000001");
  EXPECT_EQ(detail::fmt_double(1.0 / 3.0), "0.33333333333333331");
  EXPECT_EQ(detail::fmt_double(std::nan("")), "nan");
}

TEST(Output, StudyCsvColumnsAndJsonSchema) {
  ExperimentConfig cfg = small_config();
  cfg.q_max = 0;
  const StudyResult res = run_converge(cfg);
  std::ostringstream os;
  write_csv(os, res);
  const std::string csv = os.str();
  EXPECT_EQ(csv.substr(0, csv.find("\r\n")),
            "record,system,scheme,q,y,eps,z_value,residual,reference_value,abs_error,slope,intercept,status,message");
  const json j = to_json(res);
  EXPECT_EQ(j.at("schema_version"), 1);
  EXPECT_EQ(j.at("command"), "converge");
  EXPECT_EQ(j.at("rows").size(), res.rows.size());
  EXPECT_EQ(j.at("rows")[0].at("scheme"), "one-step");
}

TEST(Output, IdenticalConfigGivesIdenticalBytes) {
  ExperimentConfig cfg = small_config();
  auto render = [&] {
    std::ostringstream os;
    write_csv(os, run_compare(cfg));
    os << to_json(run_compare(cfg)).dump(2);
    return os.str();
  };
  EXPECT_EQ(render(), render());
}

TEST(CliBinary, ExitCodes) {
  EXPECT_EQ(run_cli("converge -c " + config_path("mmh_one_step.json") + " -o " + temp_path("ok.csv")), 0);
  // Asserting one-step order 3 at q = 1 must fail.
  const std::string bad = temp_path("bad.json");
  std::ofstream(bad) << R"({"s_grid": [1.0], "q_max": 1, "assertions": [{"scheme": "one-step", "q": 1, "expected": 3.0}]})";
  EXPECT_EQ(run_cli("converge -c " + bad + " -o " + temp_path("bad.csv")), 1);
  EXPECT_EQ(run_cli("converge --eps-grid 0.001,0.01"), 2);
  EXPECT_EQ(run_cli("converge --q-max 7"), 2);
  EXPECT_EQ(run_cli("converge -c " + config_path("missing.json")), 2);
  EXPECT_EQ(run_cli("converge --no-such-flag"), 2);
  EXPECT_EQ(run_cli("trajectory --t-end 0 -o " + temp_path("t.csv")), 0);
}

TEST(CliBinary, SolverFailureExitCode) {
  // A fast point with no hyperbolic branch: s = -kappa makes dg2/dz vanish on h0.
  EXPECT_EQ(run_cli("converge --s-grid -2 --eps-grid 0.01,0.001,0.0001 -o " + temp_path("fail.csv")), 3);
}

TEST(CliBinary, ByteIdenticalFiles) {
  const std::string a = temp_path("a.json"), b = temp_path("b.json");
  const std::string args = "compare -c " + config_path("mmh_compare.json") + " --format json -o ";
  ASSERT_EQ(run_cli(args + a), 0);
  ASSERT_EQ(run_cli(args + b), 0);
  const std::string da = read_file(a);
  EXPECT_FALSE(da.empty());
  EXPECT_EQ(da, read_file(b));
}
