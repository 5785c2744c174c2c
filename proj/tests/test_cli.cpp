#include "kslab/pipeline.hpp"

#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <regex>
#include <sstream>

using namespace kslab;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("kslab_test_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

cfg::Config preset(const std::string& name) { return cfg::Config::load(KSLAB_PRESETS_DIR "/" + name + ".cfg"); }

app::Experiment experiment(cfg::Config c, const std::string& command, const fs::path& out) {
  c.set("command", command);
  auto e = app::make_experiment(c, KSLAB_PRESETS_DIR);
  e.out = out;
  return e;
}

}  // namespace

TEST(Config, ParsesCommentsAndTrims) {
  std::istringstream is("# header\n n = 3  # dims\nmode=ball\n\n data.A = 1e2\n");
  const auto c = cfg::Config::parse(is);
  EXPECT_EQ(c.integer("n", 0), 3);
  EXPECT_EQ(c.str("mode", ""), "ball");
  EXPECT_DOUBLE_EQ(c.num("data.A", 0), 100);
  EXPECT_EQ(c.num("missing", 7.5), 7.5);
}

TEST(Config, RejectsMalformedLinesAndValues) {
  std::istringstream bad("n 3\n");
  EXPECT_THROW(cfg::Config::parse(bad), InvalidInput);
  std::istringstream text("n = three\nflag = maybe\nk = 1.5\n");
  const auto c = cfg::Config::parse(text);
  EXPECT_THROW(c.num("n", 0), InvalidInput);
  EXPECT_THROW(c.flag("flag", false), InvalidInput);
  EXPECT_THROW(c.integer("k", 0), InvalidInput);
}

TEST(Config, ListsExpandRanges) {
  cfg::Config c;
  c.set("dims", "3-5, 8");
  EXPECT_EQ(c.list("dims"), (std::vector<std::string>{"3", "4", "5", "8"}));
  c.set("A", "1e-3, 2");
  EXPECT_EQ(c.list("A"), (std::vector<std::string>{"1e-3", "2"}));
}

TEST(Config, HashIgnoresOrderAndOutputLocation) {
  std::istringstream a("n = 3\nR = 1\nout = x\n"), b("R = 1\nn = 3\nout = y\nworkers = 4\n");
  const auto ca = cfg::Config::parse(a), cb = cfg::Config::parse(b);
  EXPECT_EQ(ca.hash_hex(), cb.hash_hex());
  auto cc = ca;
  cc.set("R", "2");
  EXPECT_NE(ca.hash_hex(), cc.hash_hex());
  EXPECT_EQ(ca.hash_hex().size(), 16u);
}

TEST(Io, RadialCsvRoundTrip) {
  const auto dir = scratch("csv");
  fs::create_directories(dir);
  {
    std::ofstream os(dir / "u0.csv");
    os << "# initial data\nr,u0\n0,5\n0.5,3.25\n1,1e-3\n";
  }
  const auto [r, u] = io::read_radial_csv(dir / "u0.csv");
  EXPECT_EQ(r, (std::vector<double>{0, 0.5, 1}));
  EXPECT_EQ(u, (std::vector<double>{5, 3.25, 1e-3}));
  {
    std::ofstream os(dir / "bad.csv");
    os << "r,u0\n0,1\n0.5,x\n";
  }
  EXPECT_THROW(io::read_radial_csv(dir / "bad.csv"), InvalidInput);
  EXPECT_THROW(io::read_radial_csv(dir / "none.csv"), InvalidInput);
  EXPECT_EQ(io::num(0.1), "0.10000000000000001");
}

TEST(Experiment, ValidatesBeforeDispatch) {
  cfg::Config c;
  c.set("n", "2");
  EXPECT_THROW(app::make_experiment(c), InvalidInput);
  c.set("n", "3");
  c.set("data", "sine");
  EXPECT_THROW(app::make_experiment(c), InvalidInput);
  c.set("data", "gaussian");
  c.set("data.sigma", "-1");
  EXPECT_THROW(app::make_experiment(c), InvalidInput);
  c.set("data.sigma", "1");
  c.set("solver.cfl", "3");
  EXPECT_THROW(app::make_experiment(c), InvalidInput);
  c.set("solver.cfl", "0.02");
  c.set("command", "explode");
  EXPECT_THROW(app::make_experiment(c), InvalidInput);
}

TEST(Pipeline, FlatPresetReport) {
  const auto out = scratch("flat");
  const int rc = app::run_pipeline(experiment(preset("flat-n3"), "all", out));
  EXPECT_EQ(rc, app::kSuccess);
  const auto rep = io::json::parse(slurp(out / "report.json"));
  EXPECT_NEAR(rep["T_est"].get<double>(), 1.0, 1e-2);
  EXPECT_NEAR(rep["type_one"]["M_fit"].get<double>(), 1.0, 1e-3);
  EXPECT_NEAR(rep["type_one"]["lower"].get<double>(), 1.0, 1e-3);
  EXPECT_EQ(rep["flags"]["type_one"], "pass");
  EXPECT_EQ(rep["flags"]["ut_bound"], "n/a");
}

TEST(Pipeline, RunsAreByteIdenticalAndCarryTheConfigHash) {
  const auto a = scratch("det_a"), b = scratch("det_b");
  const auto cfg = preset("monotone-n3");
  ASSERT_EQ(app::run_pipeline(experiment(cfg, "all", a)), app::kSuccess);
  ASSERT_EQ(app::run_pipeline(experiment(cfg, "all", b)), app::kSuccess);
  auto expected = cfg;
  expected.set("command", "all");
  const std::string hash = expected.hash_hex();
  std::size_t files = 0;
  for (const auto& entry : fs::recursive_directory_iterator(a)) {
    if (!entry.is_regular_file() || entry.path().filename() == "run.log") continue;
    const auto rel = fs::relative(entry.path(), a);
    const std::string content = slurp(entry.path());
    EXPECT_EQ(content, slurp(b / rel)) << rel;
    EXPECT_NE(content.find(hash), std::string::npos) << rel;
    ++files;
  }
  EXPECT_GT(files, 10u);
  EXPECT_TRUE(fs::exists(a / "run.log"));
}

TEST(Pipeline, StagesProduceTheirArtifacts) {
  const auto out = scratch("stages");
  const auto cfg = preset("monotone-n3");
  EXPECT_EQ(app::run_pipeline(experiment(cfg, "simulate", out)), app::kSuccess);
  EXPECT_TRUE(fs::exists(out / "blowup.json"));
  EXPECT_TRUE(fs::exists(out / "trajectory.csv"));
  EXPECT_FALSE(fs::exists(out / "verdict.json"));
  EXPECT_EQ(app::run_pipeline(experiment(cfg, "rescale", out)), app::kSuccess);
  EXPECT_TRUE(fs::exists(out / "verdict.json"));
  const auto v = io::json::parse(slurp(out / "verdict.json"));
  for (const char* key : {"converged", "tv_origin", "steady_residual", "matched_alpha", "match_error", "t_sensitivity_stable"})
    EXPECT_TRUE(v.contains(key)) << key;
}

TEST(Pipeline, ModuleErrorsNameTheStage) {
  auto cfg = preset("monotone-n3");
  cfg.set("atlas.path", "no-such-atlas.txt");
  const auto out = scratch("stage_error");
  try {
    app::run_pipeline(experiment(cfg, "all", out));
    FAIL() << "expected a stage error";
  } catch (const app::StageError& e) {
    EXPECT_EQ(e.code(), app::kUsage);
    EXPECT_NE(std::string(e.what()).find("rescale"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("blowup.json"), std::string::npos);
  }
  // Partial outputs survive.
  EXPECT_TRUE(fs::exists(out / "blowup.json"));
}

TEST(Pipeline, NoBlowupVerifiesAsNotApplicable) {
  auto cfg = preset("monotone-n3");
  cfg.set("data.A", "2");
  const auto out = scratch("noblowup");
  EXPECT_EQ(app::run_pipeline(experiment(cfg, "verify", out)), app::kSuccess);
  const auto rep = io::json::parse(slurp(out / "report.json"));
  EXPECT_EQ(rep["outcome"], "NoBlowup");
  EXPECT_EQ(rep["flags"]["blowup"], "n/a");
}

TEST(Pipeline, OutputRootFromEnvironment) {
  const auto out = scratch("env");
  ::setenv("KSLAB_OUT", out.string().c_str(), 1);
  auto cfg = preset("flat-n3");
  cfg.set("command", "simulate");
  const auto e = app::make_experiment(cfg, KSLAB_PRESETS_DIR);
  ::unsetenv("KSLAB_OUT");
  EXPECT_EQ(e.out, out);
}

TEST(Sweep, EmptyGridGivesEmptyTable) {
  auto cfg = preset("flat-n3");
  const auto out = scratch("sweep_empty");
  cfg.set("out", out.string());
  EXPECT_EQ(app::run_sweep(cfg, KSLAB_PRESETS_DIR), app::kSuccess);
  std::ifstream is(out / "sweep.csv");
  std::string line;
  int lines = 0;
  while (std::getline(is, line)) ++lines;
  EXPECT_EQ(lines, 2);  // hash comment and header
  EXPECT_EQ(io::json::parse(slurp(out / "sweep_summary.json"))["rows"], 0);
}

TEST(Sweep, RowsSortedFailuresRecordedAndMergeDeterministic) {
  auto cfg = preset("flat-n3");
  cfg.set("sweep.data.c", "4, 1, -1, 2");
  const auto a = scratch("sweep_a"), b = scratch("sweep_b");
  cfg.set("out", a.string());
  cfg.set("workers", "3");
  ASSERT_EQ(app::run_sweep(cfg, KSLAB_PRESETS_DIR), app::kSuccess);
  cfg.set("out", b.string());
  cfg.set("workers", "1");
  ASSERT_EQ(app::run_sweep(cfg, KSLAB_PRESETS_DIR), app::kSuccess);
  EXPECT_EQ(slurp(a / "sweep.csv"), slurp(b / "sweep.csv"));
  std::ifstream is(a / "sweep.csv");
  std::string line;
  std::getline(is, line);
  std::getline(is, line);
  std::vector<std::string> rows;
  while (std::getline(is, line)) rows.push_back(line);
  ASSERT_EQ(rows.size(), 4u);
  EXPECT_EQ(rows[0].substr(0, 5), "-1,1,");  // invalid amplitude: usage error, sweep continues
  EXPECT_EQ(rows[1].substr(0, 2), "1,");
  EXPECT_EQ(rows[3].substr(0, 2), "4,");
  const auto summary = io::json::parse(slurp(a / "sweep_summary.json"));
  EXPECT_EQ(summary["t_est_nonincreasing"], true);
}

namespace {

int cli(const std::string& args) {
  const int status = std::system((std::string(KSLAB_CLI) + " " + args + " >/dev/null 2>&1").c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST(Cli, ExitCodes) {
  const std::string presets = KSLAB_PRESETS_DIR;
  EXPECT_EQ(cli("--version"), 0);
  EXPECT_EQ(cli(""), app::kUsage);
  EXPECT_EQ(cli("simulate --config " + presets + "/does-not-exist.cfg"), app::kUsage);
  EXPECT_EQ(cli("simulate --config " + presets + "/flat-n3.cfg --n 2"), app::kUsage);
  EXPECT_EQ(cli("simulate --config " + presets + "/flat-n3.cfg --set solver.cfl"), app::kUsage);
}

TEST(Cli, OverridesReachTheRun) {
  const auto out = scratch("cli_override");
  const std::string presets = KSLAB_PRESETS_DIR;
  ASSERT_EQ(cli("simulate --config " + presets + "/flat-n3.cfg --out " + out.string() + " --data.c=2"), app::kSuccess);
  const auto j = io::json::parse(slurp(out / "blowup.json"));
  EXPECT_NEAR(j["T_est"].get<double>(), 0.5, 5e-3);
}
