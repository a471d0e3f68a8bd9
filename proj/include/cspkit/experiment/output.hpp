#pragma once

// CSV and JSON renderings of study results.
//
// CSV (one table per file, header first, RFC 4180 quoting):
//   study:      record,system,scheme,q,y,eps,z_value,residual,reference_value,
//               abs_error,slope,intercept,status,message
//               record is "row", "fit" or "assertion"; unused cells are empty.
//   trajectory: system,scheme,q,eps,t,y,z,distance
//   selftest:   check,value,threshold,bound,status,detail
// Vectors are written as space-separated components. Floats use 17
// significant digits so that values round-trip exactly.

#include "cspkit/experiment/runner.hpp"
#include "cspkit/experiment/selftest.hpp"

#include "json.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>
#include <string>
#include <vector>

namespace cspkit {

inline constexpr int kSchemaVersion = 1;

namespace detail {

inline std::string fmt_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string fmt_vec(const Vec& v) {
  std::string out;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (i) out += ' ';
    out += fmt_double(v(i));
  }
  return out;
}

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

inline void csv_line(std::ostream& os, const std::vector<std::string>& cells) {
  for (std::size_t i = 0; i < cells.size(); ++i) os << (i ? "," : "") << csv_field(cells[i]);
  os << "\r\n";
}

inline nlohmann::json json_num(double v) {
  if (!std::isfinite(v)) return nullptr;
  return v;
}

inline nlohmann::json json_vec(const Vec& v) {
  nlohmann::json arr = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(json_num(v(i)));
  return arr;
}

// Short form for human-readable messages; data columns keep 17 digits.
inline std::string fmt_short(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

inline std::string assertion_message(const SlopeAssertion& a) {
  return (a.at_least ? "slope >= " + fmt_short(a.expected - a.tolerance)
                     : "slope in " + fmt_short(a.expected) + " +/- " + fmt_short(a.tolerance));
}

}  // namespace detail

inline void write_csv(std::ostream& os, const StudyResult& res) {
  using detail::fmt_double;
  using detail::fmt_vec;
  detail::csv_line(os, {"record", "system", "scheme", "q", "y", "eps", "z_value", "residual", "reference_value",
                        "abs_error", "slope", "intercept", "status", "message"});
  const std::string system = res.rows.empty() ? std::string() : res.rows.front().system;
  for (const auto& r : res.rows) {
    detail::csv_line(os, {"row", r.system, to_string(r.scheme), std::to_string(r.q), fmt_vec(r.y), fmt_double(r.eps),
                          fmt_vec(r.z_value), fmt_double(r.residual), fmt_vec(r.reference_value),
                          fmt_double(r.abs_error), "", "", r.error.empty() ? "ok" : "error", r.error});
  }
  for (const auto& f : res.fits) {
    std::string message = f.error;
    if (f.fit && !f.fit->excluded.empty()) message = std::to_string(f.fit->excluded.size()) + " sample(s) below error floor";
    detail::csv_line(os, {"fit", system, to_string(f.scheme), std::to_string(f.q), fmt_vec(f.y), "", "", "", "", "",
                          f.fit ? fmt_double(f.fit->slope) : "", f.fit ? fmt_double(f.fit->intercept) : "",
                          f.fit ? "ok" : "error", message});
  }
  for (const auto& a : res.assertions) {
    detail::csv_line(os, {"assertion", system, to_string(a.assertion.scheme), std::to_string(a.assertion.q),
                          fmt_vec(a.y), "", "", "", "", "", fmt_double(a.slope), "", a.passed ? "pass" : "fail",
                          detail::assertion_message(a.assertion)});
  }
}

inline nlohmann::json to_json(const StudyResult& res) {
  using detail::json_num;
  using detail::json_vec;
  nlohmann::json j;
  j["schema_version"] = kSchemaVersion;
  j["command"] = res.command;
  j["rows"] = nlohmann::json::array();
  for (const auto& r : res.rows) {
    j["rows"].push_back({{"system", r.system}, {"scheme", to_string(r.scheme)}, {"q", r.q}, {"y", json_vec(r.y)},
                         {"eps", json_num(r.eps)}, {"z_value", json_vec(r.z_value)},
                         {"residual", json_num(r.residual)}, {"reference_value", json_vec(r.reference_value)},
                         {"abs_error", json_num(r.abs_error)}, {"error", r.error}});
  }
  j["fits"] = nlohmann::json::array();
  for (const auto& f : res.fits) {
    nlohmann::json fj{{"scheme", to_string(f.scheme)}, {"q", f.q}, {"y", json_vec(f.y)}, {"error", f.error}};
    if (f.fit) {
      fj["slope"] = json_num(f.fit->slope);
      fj["intercept"] = json_num(f.fit->intercept);
      fj["samples_used"] = f.fit->samples.size();
      fj["samples_excluded"] = f.fit->excluded.size();
    }
    j["fits"].push_back(std::move(fj));
  }
  j["assertions"] = nlohmann::json::array();
  for (const auto& a : res.assertions) {
    j["assertions"].push_back({{"scheme", to_string(a.assertion.scheme)}, {"q", a.assertion.q}, {"y", json_vec(a.y)},
                               {"slope", json_num(a.slope)}, {"expected", a.assertion.expected},
                               {"tolerance", a.assertion.tolerance}, {"at_least", a.assertion.at_least},
                               {"passed", a.passed}});
  }
  return j;
}

inline void write_csv(std::ostream& os, const TrajectoryResult& res) {
  using detail::fmt_double;
  detail::csv_line(os, {"system", "scheme", "q", "eps", "t", "y", "z", "distance"});
  for (const auto& r : res.rows) {
    detail::csv_line(os, {res.system, to_string(res.scheme), std::to_string(res.q), fmt_double(res.eps),
                          fmt_double(r.t), detail::fmt_vec(r.y), detail::fmt_vec(r.z), fmt_double(r.distance)});
  }
}

inline nlohmann::json to_json(const TrajectoryResult& res) {
  nlohmann::json j{{"schema_version", kSchemaVersion}, {"command", "trajectory"}, {"system", res.system},
                   {"scheme", to_string(res.scheme)}, {"q", res.q}, {"eps", res.eps}};
  j["rows"] = nlohmann::json::array();
  for (const auto& r : res.rows) {
    j["rows"].push_back({{"t", detail::json_num(r.t)}, {"y", detail::json_vec(r.y)}, {"z", detail::json_vec(r.z)},
                         {"distance", detail::json_num(r.distance)}});
  }
  return j;
}

inline void write_csv(std::ostream& os, const std::vector<PropertyCheck>& checks) {
  detail::csv_line(os, {"check", "value", "threshold", "bound", "status", "detail"});
  for (const auto& c : checks) {
    detail::csv_line(os, {c.name, detail::fmt_double(c.value), detail::fmt_double(c.threshold),
                          c.lower_bound ? "min" : "max", c.passed ? "pass" : "fail", c.detail});
  }
}

inline nlohmann::json to_json(const std::vector<PropertyCheck>& checks) {
  nlohmann::json j{{"schema_version", kSchemaVersion}, {"command", "selftest"}};
  j["checks"] = nlohmann::json::array();
  for (const auto& c : checks) {
    j["checks"].push_back({{"check", c.name}, {"value", detail::json_num(c.value)}, {"threshold", c.threshold},
                           {"bound", c.lower_bound ? "min" : "max"}, {"passed", c.passed}, {"detail", c.detail}});
  }
  return j;
}

}  // namespace cspkit
