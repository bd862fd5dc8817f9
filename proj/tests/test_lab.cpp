#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "vdlab/lab.hpp"

using namespace vdlab;
using namespace vdlab::lab;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("vdlab_test_lab_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

Outcome run_text(Scenario s, const std::string& text, const fs::path& out, int jobs = 1, bool svg = false) {
  return run_scenario(s, Config::from_string(text, "test.cfg"), {out.string(), jobs, svg});
}

std::string error_of(const std::string& text, Scenario s = Scenario::evolve) {
  try {
    auto c = Config::from_string(text, "test.cfg");
    plan(s, c);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return {};
}

const std::string lemma_grid = "variant = lemma\ngrid.resolution = 128\nsweep.min_cells = 4\nsweep.max_cells = 40\n";
const std::string small_lemma = lemma_grid + "field.alphas = 0.5\n";
const std::string small_evolve = "grid.resolution = 32\ntime.dt = 0.05\ntime.T = 0.5\noutput.every = 5\n";

}  // namespace

TEST(Config, ParsesValuesListsAndInfinity) {
  auto c = Config::from_string("# header\n a = 1.5  # trailing\nlist = 0.3, 0.5,0.7\np = inf\nflag = yes\n\n");
  EXPECT_EQ(c.number("a", 0.0), 1.5);
  EXPECT_EQ(c.numbers("list", {}), (std::vector<double>{0.3, 0.5, 0.7}));
  EXPECT_TRUE(std::isinf(c.number("p", 2.0)));
  EXPECT_TRUE(c.flag("flag", false));
  EXPECT_EQ(c.number("absent", 7.0), 7.0);
  EXPECT_NO_THROW(c.finish());
}

TEST(Config, ErrorsCarryLineNumbers) {
  EXPECT_NE(error_of("grid.resolution = 32\nnonsense line\n").find("test.cfg:2"), std::string::npos);
  EXPECT_NE(error_of("time.dt = 0.1\ntime.dt = 0.2\n").find("duplicate key 'time.dt' (first set on line 1)"),
            std::string::npos);
  EXPECT_NE(error_of("grid.resolution = 32\n\ntime.dt = fast\n").find("test.cfg:3: time.dt: expected a number"),
            std::string::npos);
  EXPECT_NE(error_of(small_evolve + "grid.resolutoin = 64\n").find("test.cfg:5: grid.resolutoin: unknown key"),
            std::string::npos);
  EXPECT_NE(error_of("grid.resolution = 100\n").find("power of two"), std::string::npos);
  EXPECT_NE(error_of("time.dt = 0.03\ntime.T = 1\n").find("whole number"), std::string::npos);
  EXPECT_NE(error_of("grid.resolution = 64\ntime.dt = 0.5\n").find("CFL"), std::string::npos);
  EXPECT_NE(error_of("init.kind = from-checkpoint\ninit.rho_file = /nonexistent\ninit.u_file = /x\n").find("not found"),
            std::string::npos);
  EXPECT_NE(error_of("variant = thm3\n", Scenario::commutator_sweep).find("thm1, thm2 or lemma"), std::string::npos);
  EXPECT_NE(error_of("exponents = 0.4-0.4\n", Scenario::thm2_suite).find("alpha/beta pairs"), std::string::npos);
  EXPECT_THROW(Config::load("/nonexistent/lab.cfg"), ConfigError);
  EXPECT_THROW(parse_scenario("evolv"), ConfigError);
}

TEST(Config, SeedOverrideIsReportedAsCommandLine) {
  auto c = Config::from_string("seed = 3\n");
  c.set("seed", "oops");
  EXPECT_NE(error_of("seed = -1\n", Scenario::mollifier_check).find("non-negative integer"), std::string::npos);
  try {
    c.seed("seed", 1);
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("command line: seed"), std::string::npos);
  }
}

TEST(ValidateExponents, TheoremConditions) {
  const auto a = validate_exponents(0.4, 0.4, 3, 3, ProofVariant::thm2);
  EXPECT_TRUE(a.eligible);
  EXPECT_NEAR(a.slope_B, 0.2, 1e-15);
  EXPECT_NEAR(a.slope_A2, 0.2, 1e-15);

  const auto b = validate_exponents(0.5, 0.2, 3, 3, ProofVariant::thm2);
  EXPECT_FALSE(b.eligible);
  EXPECT_NEAR(b.conditions[2].lhs, 1.2, 1e-15);
  EXPECT_TRUE(b.conditions[2].holds);
  EXPECT_NEAR(b.conditions[3].lhs, 0.9, 1e-15);
  EXPECT_FALSE(b.conditions[3].holds);
  EXPECT_NE(b.failed_conditions().find("alpha + 2 beta > 1"), std::string::npos);

  const auto c = validate_exponents(0.5, 0.5, 4, 6, ProofVariant::thm1);
  EXPECT_NEAR(c.conditions[0].lhs, 0.75, 1e-15);
  EXPECT_TRUE(c.eligible);
  EXPECT_NEAR(c.slope_B1, 1.5, 1e-15);
  EXPECT_NEAR(c.slope_B2, 0.5, 1e-15);
  // p = inf, q = 3 sits exactly on the boundary.
  EXPECT_TRUE(validate_exponents(0.5, 0.5, infinity, 3, ProofVariant::thm1).conditions[0].holds);
  EXPECT_FALSE(validate_exponents(0.5, 0.5, 2, 3, ProofVariant::thm1).eligible);

  const auto d = validate_exponents(0.2, 0.5, infinity, 6, ProofVariant::thm1);
  EXPECT_FALSE(d.eligible);
  EXPECT_NEAR(d.slope_B2, -0.4, 1e-15);
  EXPECT_FALSE(validate_exponents(0.4, 0.4, 2, 3, ProofVariant::thm2).eligible);
  EXPECT_THROW(validate_exponents(0.0, 0.4, 3, 3, ProofVariant::thm2), DomainError);
}

TEST(RunScenario, MalformedConfigLeavesNoArtifacts) {
  const auto out = scratch("malformed");
  EXPECT_THROW(run_text(Scenario::evolve, "grid.resolution = 32\ntime.dt\n", out), ConfigError);
  EXPECT_THROW(run_text(Scenario::evolve, small_evolve + "init.kind = vortex\n", out), ConfigError);
  EXPECT_FALSE(fs::exists(out));
}

TEST(RunScenario, EvolveWritesLogCheckpointsAndSummary) {
  const auto out = scratch("evolve");
  const auto r = run_text(Scenario::evolve, small_evolve, out, 1, true);
  EXPECT_EQ(r.exit_code(), 0);
  EXPECT_TRUE(fs::exists(out / "run_log.csv"));
  EXPECT_TRUE(fs::exists(out / "projection.csv"));
  EXPECT_TRUE(fs::exists(out / "energy.svg"));
  for (int i = 0; i <= 2; ++i)
    for (const char* part : {"_rho.bin", "_u.bin", "_P.bin"})
      EXPECT_TRUE(fs::exists(out / "checkpoints" / ("snap_00000" + std::to_string(i) + part)));
  const auto log = slurp(out / "run_log.csv");
  EXPECT_EQ(log.substr(0, log.find('\n')), "t,E,mass,max_u,div_residual,pressure_iterations");
  EXPECT_EQ(std::count(log.begin(), log.end(), '\n'), 4);
  const auto js = nlohmann::json::parse(slurp(out / "summary.json"));
  EXPECT_EQ(js["verdict"], "pass");
  EXPECT_EQ(js["exit_code"], 0);
  // projection probe (2) then energy, mass, divergence
  ASSERT_EQ(js["checks"].size(), 5u);
  EXPECT_EQ(js["checks"][0]["name"], "manufactured pressure L2 error");
  EXPECT_EQ(js["checks"][1]["name"], "pure gradient after projection, max");
  EXPECT_EQ(js["config"]["time.dt"], "0.05");
  EXPECT_TRUE(js["csv_digests"].contains("run_log.csv"));
}

TEST(RunScenario, FailingVerdictNamesModuleAndValues) {
  const auto out = scratch("failing");
  const auto r = run_text(Scenario::evolve, small_evolve + "output.checkpoints = false\ncheck.divergence = 1e-30\n", out);
  EXPECT_EQ(r.exit_code(), 1);
  const auto js = nlohmann::json::parse(slurp(out / "summary.json"));
  ASSERT_EQ(js["failures"].size(), 1u);
  const std::string msg = js["failures"][0];
  EXPECT_NE(msg.find("euler_solver"), std::string::npos);
  EXPECT_NE(msg.find("measured"), std::string::npos);
  EXPECT_NE(msg.find("predicted <= 1e-30"), std::string::npos);
  EXPECT_NE(msg.find("div u = 0"), std::string::npos);
  EXPECT_FALSE(fs::exists(out / "checkpoints"));
}

TEST(RunScenario, SolverFailureOnInitialDataIsAConfigError) {
  const auto out = scratch("module_error");
  // The pressure solve cannot reach the tolerance in one iteration.
  try {
    run_text(Scenario::evolve, small_evolve + "init.rho_amplitude = 0.5\ninit.rho_mean = 2\nsolver.max_iterations = 1\n", out);
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("initial state: "), std::string::npos) << e.what();
  }
  EXPECT_FALSE(fs::exists(out));
}

TEST(RunScenario, RerunsAndThreadCountsAreByteIdentical) {
  const auto a = scratch("det_a"), b = scratch("det_b");
  const auto ra = run_text(Scenario::commutator_sweep, lemma_grid + "field.alphas = 0.3, 0.5\n", a, 1);
  const auto rb = run_text(Scenario::commutator_sweep, lemma_grid + "field.alphas = 0.3, 0.5\n", b, 3);
  EXPECT_EQ(ra.exit_code(), rb.exit_code());
  EXPECT_EQ(slurp(a / "commutator.csv"), slurp(b / "commutator.csv"));
  const auto c = scratch("det_c");
  run_text(Scenario::commutator_sweep, lemma_grid + "field.alphas = 0.3, 0.5\nseed = 2\n", c);
  EXPECT_NE(slurp(a / "commutator.csv"), slurp(c / "commutator.csv"));
}

TEST(RunScenario, LemmaBatteryRowsAndOracle) {
  const auto out = scratch("lemma");
  const auto r = run_text(Scenario::commutator_sweep, small_lemma, out, 1, true);
  EXPECT_EQ(r.exit_code(), 0) << r.summary.dump(1);
  const auto csv = slurp(out / "commutator.csv");
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "variant,term,epsilon,value");
  EXPECT_NE(csv.find("lemma,commutator[alpha=0.5],"), std::string::npos);
  EXPECT_NE(csv.find("lemma,commutator[constant],"), std::string::npos);
  EXPECT_NE(csv.find("lemma,oracle_max_diff,0,"), std::string::npos);
  EXPECT_TRUE(fs::exists(out / "commutator.svg"));
  EXPECT_EQ(slurp(out / "commutator.svg").rfind("<svg", 0), 0u);
}

TEST(RunScenario, IneligibleThm2PairIsRejectedWithoutSweep) {
  const auto out = scratch("thm2_reject");
  const auto r = run_text(Scenario::thm2_suite, "exponents = 0.5/0.2\n", out);
  EXPECT_EQ(r.exit_code(), 0);
  ASSERT_EQ(r.checks.size(), 1u);
  EXPECT_EQ(r.checks[0].verdict, Verdict::informational);
  EXPECT_NE(r.checks[0].note.find("alpha + 2 beta > 1"), std::string::npos);
  const auto ex = slurp(out / "exponents.csv");
  EXPECT_NE(ex.find("thm2,0.5,0.20000000000000001,3,3,alpha + 2 beta > 1,0.90000000000000002,1,0,0"),
            std::string::npos);
  EXPECT_FALSE(fs::exists(out / "terms_0.5_0.2.csv"));
}

TEST(RunScenario, Thm1BelowThresholdIsInformational) {
  const auto out = scratch("thm1_low");
  const std::string base = "grid.resolution = 256\nfield.alphas = 0.2\nensemble.members = 2\nsweep.min_cells = 3.6\n"
                           "sweep.points = 4\ntime.dt_cells = 0.9\npsi.t2 = 1.85\n";
  // 40 cells is about 0.98, wider than the gap between supp psi and the trajectory ends.
  EXPECT_THROW(run_text(Scenario::thm1_suite, base + "sweep.max_cells = 40\n", out), ConfigError);
  EXPECT_THROW(run_text(Scenario::thm1_suite, "grid.resolution = 256\nsweep.min_cells = 2\nsweep.max_cells = 36\n", out),
               ConfigError);
  EXPECT_FALSE(fs::exists(out));
  const auto r = run_text(Scenario::thm1_suite, base + "sweep.max_cells = 36\n", out);
  EXPECT_EQ(r.exit_code(), 0) << r.error;
  bool saw_b2 = false;
  for (const auto& c : r.checks) {
    EXPECT_EQ(c.verdict, Verdict::informational) << c.message();
    if (c.name.find("B2") != std::string::npos) {
      saw_b2 = true;
      EXPECT_NE(c.note.find("no guaranteed decay"), std::string::npos);
      EXPECT_NEAR(c.predicted, -0.4, 1e-12);
    }
  }
  EXPECT_TRUE(saw_b2);
  EXPECT_TRUE(fs::exists(out / "terms_alpha_0.2.csv"));
  EXPECT_TRUE(fs::exists(out / "terms_alpha_0.2_member_1.csv"));
  EXPECT_TRUE(fs::exists(out / "terms_alpha_0.2_member_2.csv"));
}

TEST(OutputDir, CommandLineThenEnvironmentThenConfig) {
  auto c = Config::from_string("output.dir = from_config\n");
  ::unsetenv("LAB_OUT");
  EXPECT_EQ(resolve_out_dir(Scenario::evolve, c, ""), "from_config");
  ::setenv("LAB_OUT", "from_env", 1);
  EXPECT_EQ(resolve_out_dir(Scenario::evolve, c, ""), "from_env");
  EXPECT_EQ(resolve_out_dir(Scenario::evolve, c, "from_cli"), "from_cli");
  ::unsetenv("LAB_OUT");
  auto empty = Config::from_string("");
  EXPECT_EQ(resolve_out_dir(Scenario::energy_audit, empty, ""), "lab_out/energy-audit");
}

#ifdef LAB_BINARY
TEST(Cli, ExitCodes) {
  const auto dir = scratch("cli");
  fs::create_directories(dir);
  {
    std::ofstream(dir / "bad.cfg") << "grid.resolution = 32\nthis is not a pair\n";
    std::ofstream(dir / "ok.cfg") << small_evolve << "output.checkpoints = false\n";
  }
  const auto run = [&](const std::string& args) {
    const int rc = std::system((std::string(LAB_BINARY) + " " + args + " > /dev/null 2>&1").c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
  };
  EXPECT_EQ(run("evolve --config " + (dir / "bad.cfg").string() + " --out " + (dir / "bad").string()), 2);
  EXPECT_FALSE(fs::exists(dir / "bad"));
  EXPECT_EQ(run("evolve"), 2);
  EXPECT_EQ(run("nonsense --config " + (dir / "ok.cfg").string() + " --out " + (dir / "x").string()), 2);
  EXPECT_EQ(run("evolve --config " + (dir / "ok.cfg").string() + " --out " + (dir / "ok").string() + " --seed 4"), 0);
  EXPECT_TRUE(fs::exists(dir / "ok" / "summary.json"));
  EXPECT_EQ(nlohmann::json::parse(slurp(dir / "ok" / "summary.json"))["config"]["seed"], "4");
}
#endif
