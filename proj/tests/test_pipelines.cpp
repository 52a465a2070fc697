#include "ipl/ipl.hpp"

#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <sys/wait.h>

using namespace ipl;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("ipl_pipelines_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  return dir / name;
}

fs::path write_config(const std::string& name, const std::string& text) {
  const fs::path p = scratch(name);
  std::ofstream(p) << text;
  return p;
}

fs::path write_config(const std::string& name, const json& j) { return write_config(name, j.dump(2)); }

json stability_doc() {
  return {{"schema_version", 1},
          {"subcommand", "stability"},
          {"obstructions",
           {{{"k", 1}, {"xi0", {0.0, 0.0}}, {"mu", 0}, {"expected", "blocked_order2_k1"}},
            {{"k", 2}, {"xi0", {0.3, 0.1}}, {"mu", 1}, {"expected", "ok"}}}}};
}

json residual_doc() {
  return {{"schema_version", 1},
          {"subcommand", "model-check"},
          {"seed", 5},
          {"models", {{"lambda", {0.1, 0.05}}, {"mu", 1}, {"alpha", 0.25}}},
          {"residual", {{"samples", 20}}}};
}

void expect_schema_error(const json& doc) {
  const auto p = write_config("bad.json", doc);
  EXPECT_THROW(prepare(p), SchemaError) << doc.dump();
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(IPL_CLI) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST(Schema, AcceptsValidDocument) {
  const auto p = write_config("ok.json", stability_doc());
  const PreparedRun run = prepare(p);
  EXPECT_EQ(pipeline::common_of(run.config).subcommand, "stability");
}

TEST(Schema, RejectsMalformedDocuments) {
  json d = stability_doc();
  d["extra"] = 1;
  expect_schema_error(d);

  d = stability_doc();
  d.erase("schema_version");
  expect_schema_error(d);

  d = stability_doc();
  d["schema_version"] = 2;
  expect_schema_error(d);

  d = stability_doc();
  d["subcommand"] = "plot";
  expect_schema_error(d);

  d = stability_doc();
  d["obstructions"][0]["typo"] = true;
  expect_schema_error(d);

  d = residual_doc();
  d["residual"]["tol"] = -1.0;
  expect_schema_error(d);

  d = residual_doc();
  d["models"]["alpha"] = 0.75;
  expect_schema_error(d);

  d = residual_doc();
  d["seed"] = -3;
  expect_schema_error(d);
}

TEST(Schema, RandomizedRunNeedsSeed) {
  json d = residual_doc();
  d.erase("seed");
  const auto p = write_config("noseed.json", d);
  EXPECT_THROW(prepare(p), SchemaError);
  EXPECT_NO_THROW(prepare(p, 17));
}

TEST(Schema, RejectsUnparsableJson) {
  const auto p = write_config("broken.json", std::string("{\"schema_version\": 1,"));
  EXPECT_THROW(prepare(p), SchemaError);
}

TEST(Schema, SubcommandMustMatchInvocation) {
  const auto p = write_config("stab.json", stability_doc());
  EXPECT_THROW(prepare(p, std::nullopt, "moduli"), SchemaError);
  EXPECT_NO_THROW(prepare(p, std::nullopt, "stability"));
}

TEST(Schema, ModelGridExpandsAsProduct) {
  json d = residual_doc();
  d["models"] = {{"grid", {{"lambda", {0, json::array({0.1, 0.2})}}, {"mu", {0, 1, 2}}, {"alpha", {0.0, 0.25}}}}};
  const auto run = prepare(write_config("grid.json", d));
  EXPECT_EQ(std::get<pipeline::ModelCheckConfig>(run.config).models.size(), 12u);
}

TEST(Schema, SeedOverrideIsEchoed) {
  const auto run = prepare(write_config("echo.json", residual_doc()), 123);
  EXPECT_EQ(run.echo.at("seed").get<std::uint64_t>(), 123u);
}

TEST(Report, StabilityRunPasses) {
  const Report r = run_config_file(write_config("stab.json", stability_doc()));
  EXPECT_TRUE(r.passed());
  EXPECT_EQ(exit_code(r), 0);
  EXPECT_EQ(r.to_json().at("subcommand"), "stability");
}

TEST(Report, WrongExpectationFails) {
  json d = stability_doc();
  d["obstructions"][1]["expected"] = "blocked_mu0";
  const Report r = run_config_file(write_config("wrong.json", d));
  EXPECT_FALSE(r.passed());
  EXPECT_EQ(exit_code(r), 1);
}

TEST(Report, DeterministicApartFromTiming) {
  const auto p = write_config("det.json", residual_doc());
  const json a = strip_timing(run_config_file(p).to_json());
  const json b = strip_timing(run_config_file(p).to_json());
  EXPECT_EQ(a.dump(), b.dump());
  const json c = strip_timing(run_config_file(p, 6).to_json());
  EXPECT_NE(a.at("results").dump(), c.at("results").dump());
}

TEST(Report, ProvenanceCarriesConventionHash) {
  const json j = run_config_file(write_config("prov.json", stability_doc())).to_json();
  EXPECT_EQ(j.at("provenance").at("conventions_hash"), hex64(fnv1a(convention_sheet().dump())));
  EXPECT_EQ(j.at("provenance").at("ipl"), kVersion);
}

TEST(Report, WritesJsonAndCsv) {
  Report r;
  r.subcommand = "spectral";
  r.at_most("x", 0.5, 1.0);
  r.tables.push_back({"points", {"a", "b"}, {{1.0, 0.1}, {2.0, 1e-17}}});
  const fs::path dir = scratch("outputs");
  const auto files = write_outputs(r, dir, "run");
  ASSERT_EQ(files.size(), 2u);
  std::ifstream f(dir / "run.points.csv");
  std::string header, row;
  std::getline(f, header);
  std::getline(f, row);
  EXPECT_EQ(header, "a,b");
  EXPECT_EQ(row, "1,0.10000000000000001");
  const json j = json::parse(std::ifstream(dir / "run.report.json"));
  EXPECT_TRUE(j.at("pass").get<bool>());
  EXPECT_EQ(j.at("tables").at("points").at("rows"), 2);
}

TEST(Report, NonFiniteValuesNeverPass) {
  Report r;
  r.at_most("nan", std::numeric_limits<double>::quiet_NaN(), 1.0);
  r.at_least("inf", std::numeric_limits<double>::infinity(), 0.0);
  EXPECT_FALSE(r.checks[0].pass);
  EXPECT_TRUE(r.checks[1].pass);
  EXPECT_EQ(r.to_json().at("checks")[0].at("value"), "nan");
}

TEST(Suite, RejectsNesting) {
  const auto inner = write_config("inner_suite.json",
                                  json{{"schema_version", 1}, {"subcommand", "suite"}, {"configs", {"stab.json"}}});
  write_config("stab.json", stability_doc());
  const auto outer = write_config("outer_suite.json", json{{"schema_version", 1},
                                                           {"subcommand", "suite"},
                                                           {"configs", {inner.filename().string()}}});
  EXPECT_THROW(prepare(outer), SchemaError);
}

TEST(Suite, ReportsDeterminismPerConfig) {
  write_config("stab.json", stability_doc());
  write_config("res.json", residual_doc());
  const auto p = write_config("suite.json", json{{"schema_version", 1},
                                                 {"subcommand", "suite"},
                                                 {"configs", {"stab.json", "res.json"}}});
  const Report r = run_config_file(p);
  ASSERT_EQ(r.checks.size(), 2u);
  EXPECT_EQ(r.checks[0].name, "determinism.stab");
  EXPECT_TRUE(r.passed());
}

TEST(Cli, ExitCodes) {
  const auto ok = write_config("cli_ok.json", stability_doc());
  json d = stability_doc();
  d["obstructions"][1]["expected"] = "blocked_mu0";
  const auto failing = write_config("cli_fail.json", d);
  d = stability_doc();
  d["unknown"] = 0;
  const auto bad = write_config("cli_bad.json", d);
  const std::string out = " --out " + scratch("cli_out").string();

  EXPECT_EQ(run_cli("stability --config " + ok.string() + out), 0);
  EXPECT_TRUE(fs::exists(scratch("cli_out") / "cli_ok.report.json"));
  EXPECT_EQ(run_cli("stability --config " + failing.string() + out), 1);
  EXPECT_TRUE(fs::exists(scratch("cli_out") / "cli_fail.report.json"));
  EXPECT_EQ(run_cli("stability --config " + bad.string() + out), 2);
  EXPECT_EQ(run_cli("moduli --config " + ok.string() + out), 2);
  EXPECT_EQ(run_cli("stability --config " + scratch("missing.json").string()), 2);
  EXPECT_EQ(run_cli("frobnicate"), 2);
}

TEST(Invariants, ReadsSampledConnectionFile) {
  ModelParams p;
  p.lambda = {0.1, 0.05};
  p.mu = 1.0;
  p.alpha = 0.25;
  AnnulusGrid g;
  g.r_min = 50;
  g.r_max = 5000;
  g.n_r = 64;
  g.n_theta = 16;
  g.n_x = 4;
  g.n_y = 4;
  g.spacing = Spacing::log_radial;
  const auto conn = sample_connection(semisimple_model(p), g);
  std::ofstream(scratch("conn.json")) << to_json(conn).dump();
  const json doc = {{"schema_version", 1},
                    {"subcommand", "invariants"},
                    {"models", to_json(p)},
                    {"connection_file", "conn.json"},
                    {"tolerances", {{"lambda", 1e-3}, {"alpha", 1e-3}, {"mu", 1e-2}}},
                    {"options", {{"rings", {{"from", 100}, {"to", 4000}, {"count", 6}}}}}};
  const Report r = run_config_file(write_config("sampled.json", doc));
  EXPECT_TRUE(r.passed()) << r.to_json().dump(1);
}

TEST(Schema, ModuliGridTooCoarseForOperator) {
  const json grid = {{"r_min", 5}, {"r_max", 40}, {"n_r", 10}, {"n_theta", 12}, {"n_x", 4}, {"n_y", 4}};
  const json doc = {{"schema_version", 1},
                    {"subcommand", "moduli"},
                    {"seed", 1},
                    {"metric", {{"model", {{"mu", 1}}}, {"grid", grid}}}};
  expect_schema_error(doc);
}
