#pragma once

// Machine-readable run reports: checks with tolerances, tables written as CSV,
// provenance and the frozen convention sheet.

#include "ipl/hitchin.hpp"
#include "ipl/io.hpp"
#include "ipl/moduli.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace ipl {

inline constexpr const char* kVersion = "0.1.0";

/// Conventions every numerical result depends on. Its hash goes into each report.
inline json convention_sheet(const TorusSpec& t = {}) {
  const auto q = quaternion_check();
  const auto basis = dual_lattice(t);
  return {
      {"periods", {t.period_x, t.period_y}},
      {"dual_lattice_basis", {to_json(basis[0]), to_json(basis[1])}},
      {"coordinates", "(r, theta, x, y) on (R^2 \\ 0) x T, w = r e^{i theta}, metric |dx| = |dy| = |dw| = 1"},
      {"orientation", "dx ^ dy ^ dw1 ^ dw2"},
      {"hodge_star", {{"dx^dy", "dw1^dw2"}, {"dx^dw1", "dw2^dy"}, {"dx^dw2", "dy^dw1"}}},
      {"self_dual_basis", {"F_xy + F_rt", "F_xr - F_yt", "F_xt + F_yr"}},
      {"psi_identification", "a_x = i (psi + psi^dag), a_y = psi - psi^dag"},
      {"equivalence", {{"curvature", kEquivalenceCurvature}, {"dbar", kEquivalenceDbar}}},
      {"zeta", "dbar + zeta dzbar, zeta(xi) = -pi xi2 / Ly + i pi xi1 / Lx"},
      {"holonomy", "P exp(-int A), alpha = phi_theta / 2 pi"},
      {"complex_structures", {{"I1I2", "I3"}, {"I1I2I3", q.triple_sign}}},
      {"weyl", "xi0 lexicographic; order two: Re mu > 0; mu = 0: alpha >= 0"},
  };
}

inline std::string hex64(std::uint64_t h) {
  std::ostringstream s;
  s << std::hex << std::setw(16) << std::setfill('0') << h;
  return s.str();
}

inline json provenance() {
  return {
      {"ipl", kVersion},
      {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                    std::to_string(EIGEN_MINOR_VERSION)},
      {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                            std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                            std::to_string(NLOHMANN_JSON_VERSION_PATCH)},
      {"conventions_hash", hex64(fnv1a(convention_sheet().dump()))},
  };
}

enum class Relation { at_most, at_least, above, equal };

inline std::string to_string(Relation r) {
  switch (r) {
    case Relation::at_most: return "<=";
    case Relation::at_least: return ">=";
    case Relation::above: return ">";
    case Relation::equal: return "==";
  }
  return "?";
}

struct Check {
  std::string name;
  double value = 0.0;
  double tolerance = 0.0;
  Relation relation = Relation::at_most;
  bool pass = false;
  std::string note;
};

/// Rows of numbers under named columns; written as <stem>.<name>.csv.
struct Table {
  std::string name;
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
};

class Report {
 public:
  std::string subcommand;
  json inputs = json::object();
  json results = json::object();
  std::vector<Check> checks;
  std::vector<Table> tables;
  double wall_time_s = 0.0;

  /// NaN never passes.
  const Check& check(const std::string& name, double value, Relation rel, double tol,
                     std::string note = {}) {
    Check c{name, value, tol, rel, false, std::move(note)};
    switch (rel) {
      case Relation::at_most: c.pass = value <= tol; break;
      case Relation::at_least: c.pass = value >= tol; break;
      case Relation::above: c.pass = value > tol; break;
      case Relation::equal: c.pass = value == tol; break;
    }
    checks.push_back(c);
    return checks.back();
  }
  const Check& at_most(const std::string& name, double value, double tol, std::string note = {}) {
    return check(name, value, Relation::at_most, tol, std::move(note));
  }
  const Check& at_least(const std::string& name, double value, double bound, std::string note = {}) {
    return check(name, value, Relation::at_least, bound, std::move(note));
  }
  const Check& flag(const std::string& name, bool ok, std::string note = {}) {
    return check(name, ok ? 1.0 : 0.0, Relation::equal, 1.0, std::move(note));
  }

  bool passed() const {
    for (const auto& c : checks)
      if (!c.pass) return false;
    return true;
  }
  int failures() const {
    int n = 0;
    for (const auto& c : checks) n += !c.pass;
    return n;
  }

  json to_json() const {
    json cs = json::array();
    for (const auto& c : checks) {
      json j = {{"name", c.name}, {"value", finite_or_string(c.value)}, {"relation", to_string(c.relation)},
                {"tolerance", c.tolerance}, {"pass", c.pass}};
      if (!c.note.empty()) j["note"] = c.note;
      cs.push_back(std::move(j));
    }
    json ts = json::object();
    for (const auto& t : tables) ts[t.name] = {{"columns", t.columns}, {"rows", t.rows.size()}};
    return {{"subcommand", subcommand},
            {"pass", passed()},
            {"inputs", inputs},
            {"checks", cs},
            {"results", results},
            {"tables", ts},
            {"provenance", provenance()},
            {"wall_time_s", wall_time_s}};
  }

  static json finite_or_string(double v) {
    if (std::isfinite(v)) return v;
    return std::isnan(v) ? "nan" : (v > 0 ? "inf" : "-inf");
  }
};

/// Drops every "wall_time_s" entry, recursively.
inline json strip_timing(json j) {
  if (j.is_object()) {
    j.erase("wall_time_s");
    for (auto& [k, v] : j.items()) v = strip_timing(v);
  } else if (j.is_array()) {
    for (auto& v : j) v = strip_timing(v);
  }
  return j;
}

inline std::string csv_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// Writes <dir>/<stem>.report.json and one CSV per table.
inline std::vector<std::filesystem::path> write_outputs(const Report& r, const std::filesystem::path& dir,
                                                        const std::string& stem) {
  std::filesystem::create_directories(dir);
  std::vector<std::filesystem::path> written;
  const auto json_path = dir / (stem + ".report.json");
  {
    std::ofstream f(json_path);
    f << r.to_json().dump(2) << "\n";
    if (!f) throw Error("cannot write " + json_path.string());
  }
  written.push_back(json_path);
  for (const auto& t : r.tables) {
    const auto p = dir / (stem + "." + t.name + ".csv");
    std::ofstream f(p);
    for (std::size_t i = 0; i < t.columns.size(); ++i) f << (i ? "," : "") << t.columns[i];
    f << "\n";
    for (const auto& row : t.rows) {
      for (std::size_t i = 0; i < row.size(); ++i) f << (i ? "," : "") << csv_number(row[i]);
      f << "\n";
    }
    if (!f) throw Error("cannot write " + p.string());
    written.push_back(p);
  }
  return written;
}

}  // namespace ipl
