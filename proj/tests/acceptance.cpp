// Acceptance runner: one config per criterion, one line per criterion.
// Usage: acceptance [N ...] to run a subset.

#include "ipl/ipl.hpp"

#include <cstdio>
#include <iostream>
#include <set>

namespace {

struct Criterion {
  int id;
  const char* name;
  const char* config;
  double budget_s;
};

const Criterion kCriteria[] = {
    {1, "exact-solution residuals", "c1_residuals.json", 30},
    {2, "decay laws", "c2_decay.json", 60},
    {3, "invariant round trip", "c3_invariants.json", 300},
    {4, "spectral correspondence", "c4_spectral.json", 10},
    {5, "eigenvalue dichotomy", "c5_dichotomy.json", 10},
    {6, "inequality suite", "c6_inequalities.json", 120},
    {7, "stability and obstructions", "c7_stability.json", 1},
    {8, "moduli layer", "c8_moduli.json", 10},
    {9, "determinism", "c9_determinism.json", 600},
};

}  // namespace

int main(int argc, char** argv) {
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));
  const std::filesystem::path dir = IPL_ACCEPTANCE_DIR;
  int failed = 0;
  for (const auto& c : kCriteria) {
    if (!only.empty() && !only.count(c.id)) continue;
    const auto start = std::chrono::steady_clock::now();
    std::string detail;
    bool pass = false;
    try {
      const ipl::Report r = ipl::run_config_file(dir / c.config);
      pass = r.passed();
      for (const auto& k : r.checks)
        if (!k.pass)
          detail += "\n      " + k.name + " = " + std::to_string(k.value) + " (" + ipl::to_string(k.relation) +
                    " " + std::to_string(k.tolerance) + ")";
    } catch (const std::exception& e) {
      detail = std::string("\n      error: ") + e.what();
    }
    const double t = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (t > c.budget_s) {
      pass = false;
      detail += "\n      runtime over budget";
    }
    failed += !pass;
    char line[160];
    std::snprintf(line, sizeof line, "criterion %d  %-4s  %-28s %9.3f s  (budget %g s)", c.id,
                  pass ? "PASS" : "FAIL", c.name, t, c.budget_s);
    std::cout << line << detail << std::endl;
  }
  std::cout << (failed ? std::to_string(failed) + " criteria failed" : std::string("all criteria passed")) << "\n";
  return failed ? 1 : 0;
}
