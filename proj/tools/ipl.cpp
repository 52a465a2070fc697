#include "ipl/ipl.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace {

struct Args {
  std::string config;
  std::string out = "./out";
  std::optional<std::uint64_t> seed;
  bool quiet = false;
};

void add_run_flags(CLI::App* app, Args& a) {
  app->add_option("--config", a.config, "JSON config file")->required()->check(CLI::ExistingFile);
  app->add_option("--out", a.out, "output directory")->capture_default_str();
  app->add_option("--seed", a.seed, "seed, overrides the config");
  app->add_flag("--quiet", a.quiet, "print nothing on success");
}

void print_summary(const ipl::Report& r, const std::filesystem::path& report_path) {
  for (const auto& c : r.checks)
    std::cout << (c.pass ? "  ok    " : "  FAIL  ") << c.name << " = " << c.value << " ("
              << ipl::to_string(c.relation) << " " << c.tolerance << ")\n";
  std::cout << r.subcommand << ": " << (r.passed() ? "pass" : "FAIL") << ", " << r.checks.size()
            << " checks, " << r.wall_time_s << " s, report " << report_path.string() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ipl: verification pipelines for doubly-periodic instantons"};
  app.require_subcommand(1);
  Args args;
  std::string chosen;
  for (const auto& name : ipl::pipeline::subcommands()) {
    auto* sub = app.add_subcommand(name, "run the " + name + " pipeline");
    add_run_flags(sub, args);
    sub->callback([&chosen, name] { chosen = name; });
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  const std::filesystem::path cfg(args.config);
  ipl::PreparedRun prepared;
  try {
    prepared = ipl::prepare(cfg, args.seed, chosen);
  } catch (const ipl::Error& e) {
    std::cerr << "ipl: schema error: " << e.what() << "\n";
    return 2;
  }
  const ipl::Report report = ipl::run(prepared);
  const auto stem = ipl::pipeline::entry_stem(cfg);
  try {
    const auto written = ipl::write_outputs(report, args.out, stem);
    if (!args.quiet || !report.passed()) print_summary(report, written.front());
  } catch (const std::exception& e) {
    std::cerr << "ipl: " << e.what() << "\n";
    return 1;
  }
  return ipl::exit_code(report);
}
