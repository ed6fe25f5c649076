#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "blowuplab/harness.hpp"

using namespace blowuplab;
namespace h = blowuplab::harness;
namespace fs = std::filesystem;

namespace {

const std::string kConfigs = BLOWUPLAB_CONFIG_DIR;

struct Cleanup {
  std::vector<fs::path> dirs;
  ~Cleanup() {
    std::error_code ec;
    for (const auto& d : dirs) fs::remove_all(d, ec);
  }
};

fs::path scratch(const std::string& tag) {
  static Cleanup cleanup;
  static int counter = 0;
  auto p = fs::temp_directory_path() /
           ("blowuplab_test_" + std::to_string(::getpid()) + "_" + tag + "_" + std::to_string(counter++));
  fs::remove_all(p);
  cleanup.dirs.push_back(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(slurp(p));
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> row;
    std::string cell;
    std::istringstream ls(line);
    while (std::getline(ls, cell, ',')) row.push_back(cell);
    if (!line.empty() && line.back() == ',') row.emplace_back();
    rows.push_back(row);
  }
  return rows;
}

fs::path write_text(const std::string& text) {
  const auto dir = scratch("cfg");
  fs::create_directories(dir);
  const auto p = dir / "config.json";
  std::ofstream(p) << text;
  return p;
}

int run_config(const std::string& config, const fs::path& out, std::string* log = nullptr, int jobs = 1) {
  h::RunOptions o;
  o.config = config;
  o.out_dir = out.string();
  o.jobs = jobs;
  std::ostringstream ls;
  const int rc = h::run(o, ls);
  if (log) *log = ls.str();
  return rc;
}

int sweep_config(const std::string& config, const std::string& param, const std::string& values,
                 const fs::path& out, std::string* log = nullptr) {
  h::SweepOptions o;
  o.config = config;
  o.param = param;
  o.values = values;
  o.out_dir = out.string();
  std::ostringstream ls;
  const int rc = h::sweep(o, ls);
  if (log) *log = ls.str();
  return rc;
}

ojson report(const fs::path& dir, const std::string& stem) {
  return ojson::parse(slurp(dir / (stem + ".report.json")));
}

int cli(const std::string& args) {
  const std::string cmd = std::string(BLOWUPLAB_CLI) + " " + args + " >/dev/null 2>&1";
  const int st = std::system(cmd.c_str());
  return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
}

}  // namespace

TEST(Run, EquilibriaAllPass) {
  const auto out = scratch("eq");
  std::string log;
  EXPECT_EQ(run_config(kConfigs + "/equilibria.json", out, &log), h::kExitOk);
  EXPECT_NE(log.find("summary: 3/3 PASS"), std::string::npos) << log;
  const auto rows = read_csv(out / "summary.csv");
  ASSERT_EQ(rows.size(), 4u);
  EXPECT_EQ(rows[0][0], "name");
  for (std::size_t i = 1; i < rows.size(); ++i) {
    EXPECT_EQ(rows[i][2], "PASS");
    EXPECT_TRUE(fs::exists(out / (rows[i][0] + ".report.json")));
    EXPECT_TRUE(fs::exists(out / (rows[i][0] + ".trajectory.csv")));
  }
}

TEST(Run, MonotoneBoundsPerCase) {
  const auto out = scratch("mono");
  EXPECT_EQ(run_config(kConfigs + "/monotone.json", out), h::kExitOk);
  const auto cfg = h::load_config(kConfigs + "/monotone.json");
  ASSERT_EQ(cfg.entries.size(), 3u);
  for (const auto& e : cfg.entries) {
    const auto r = report(out, e.name);
    const double a = e.scenario.a0;
    const double q0 = e.scenario.pressure_rr(0.0);
    EXPECT_NEAR(r["metrics"]["predicted_bound"].get<double>(), 1.0 / std::sqrt(a * a + q0), 1e-15);
    EXPECT_EQ(r["metrics"]["verdict"], "PASS");
    EXPECT_TRUE(r["pass"].get<bool>());
  }
}

TEST(Run, MalformedJsonReportsPosition) {
  const auto cfg = write_text("{\n  \"scenarios\": [ {\"name\": ,} ]\n}\n");
  std::string log;
  EXPECT_EQ(run_config(cfg.string(), scratch("bad"), &log), h::kExitConfig);
  EXPECT_NE(log.find("line 2"), std::string::npos) << log;
  EXPECT_NE(log.find("column"), std::string::npos) << log;
}

TEST(Run, ConfigErrors) {
  for (const char* text : {
           R"({"scenarios": [], "extra": 1})",
           R"({"scenarios": []})",
           R"({"scenarios": [{"name": "a", "scenario": {"location": "axis", "t_end": 1}, "bogus": 1}]})",
           R"({"scenarios": [{"name": "a", "scenario": {"location": "axis"}}]})",
           R"({"scenarios": [{"name": "a/b", "scenario": {"location": "axis", "t_end": 1}}]})",
           R"({"scenarios": [{"name": "a", "scenario": {"location": "axis", "t_end": 1}, "task": {"kind": "nope"}}]})",
           R"({"scenarios": [{"name": "a", "scenario": {"location": "axis", "t_end": 1}},
                             {"name": "a", "scenario": {"location": "axis", "t_end": 1}}]})",
           R"({"scenarios": [{"name": "a", "scenario": {"location": "axis", "t_end": -1}}]})",
       }) {
    std::string log;
    EXPECT_EQ(run_config(write_text(text).string(), scratch("cerr"), &log), h::kExitConfig) << text;
    EXPECT_NE(log.find("config error"), std::string::npos) << log;
  }
  EXPECT_EQ(run_config("/nonexistent/config.json", scratch("missing")), h::kExitConfig);
}

TEST(Run, UnknownTaskOptionIsConfigError) {
  const auto cfg = write_text(
      R"({"scenarios": [{"name": "a", "scenario": {"location": "axis", "swirl": {"b0": 1}, "pressure_rr": 1, "t_end": 1},
          "task": {"kind": "model", "colour": 3}}]})");
  EXPECT_EQ(run_config(cfg.string(), scratch("task")), h::kExitConfig);
}

TEST(Run, FailedExpectationExitsOne) {
  const auto cfg = write_text(
      R"({"scenarios": [{"name": "eq", "scenario": {"location": "axis", "swirl": {"b0": 1}, "pressure_rr": 1, "t_end": 1},
          "expect": {"f_last": {"value": 2, "tol": 1e-9}}}]})");
  const auto out = scratch("fail");
  std::string log;
  EXPECT_EQ(run_config(cfg.string(), out, &log), h::kExitExpectation);
  const auto r = report(out, "eq");
  EXPECT_FALSE(r["pass"].get<bool>());
  EXPECT_FALSE(r["expectations"][0]["ok"].get<bool>());
  EXPECT_EQ(read_csv(out / "summary.csv")[1][2], "FAIL");
}

TEST(Expectations, Forms) {
  const ojson m = {{"x", 1.0}, {"s", "PASS"}, {"b", true}, {"n", nullptr}};
  auto ok = [&](const ojson& e) {
    bool all = true;
    for (const auto& c : h::check_expectations(e, m)) all &= c.ok;
    return all;
  };
  EXPECT_TRUE(ok({{"x", 1.0}}));
  EXPECT_TRUE(ok({{"x", {{"value", 1.05}, {"tol", 0.1}}}}));
  EXPECT_FALSE(ok({{"x", {{"value", 1.5}, {"tol", 0.1}}}}));
  EXPECT_TRUE(ok({{"x", {{"min", 0.5}, {"max", 1.0}}}}));
  EXPECT_FALSE(ok({{"x", {{"max", 0.5}}}}));
  EXPECT_TRUE(ok({{"s", "PASS"}}));
  EXPECT_FALSE(ok({{"s", "FAIL"}}));
  EXPECT_TRUE(ok({{"b", true}}));
  EXPECT_FALSE(ok({{"missing", 1}}));
  EXPECT_FALSE(ok({{"n", {{"max", 1}}}}));
}

TEST(Sweep, QuarterThresholdTransition) {
  const auto out = scratch("qsweep");
  EXPECT_EQ(sweep_config(kConfigs + "/quarter_threshold.json", "pressure_rr.inner.value",
                         "0.20,0.25,0.30", out),
            h::kExitOk);
  const auto rows = read_csv(out / "sweep.csv");
  ASSERT_EQ(rows.size(), 4u);
  EXPECT_EQ(rows[0], (std::vector<std::string>{"parameter", "value", "scenario", "first_zero", "bound",
                                               "pass", "verdict"}));
  EXPECT_EQ(rows[1][6], "PASS");
  EXPECT_EQ(rows[2][6], "Indeterminate");
  EXPECT_EQ(rows[3][6], "PASS");
  // zero count column: at most one zero below 1/4, many above
  EXPECT_LE(std::stod(rows[1][3]), 1.0);
  EXPECT_GE(std::stod(rows[3][3]), 3.0);
  EXPECT_TRUE(rows[1][4].empty());
  EXPECT_NEAR(std::stod(rows[3][4]), M_PI / std::sqrt(0.05), 1e-12);
}

TEST(Sweep, StrainSignFlip) {
  const auto out = scratch("asweep");
  sweep_config(kConfigs + "/monotone_sweep.json", "a0", "0.5,1.0,2.0", out);
  const auto rows = read_csv(out / "sweep.csv");
  ASSERT_EQ(rows.size(), 4u);
  EXPECT_EQ(rows[1][6], "HypothesisNotMet");
  // a = 1 gives nu^2 = 0, which the strict hypothesis excludes
  EXPECT_EQ(rows[2][6], "HypothesisNotMet");
  EXPECT_EQ(rows[3][6], "PASS");
  EXPECT_NEAR(std::stod(rows[3][4]), 1.0 / std::sqrt(3.0), 1e-15);
  const auto r = report(out, rows[3][2] + "@a0=2.0");
  EXPECT_EQ(r["sweep"]["value"], 2.0);
  EXPECT_EQ(r["scenario"]["a0"], 2.0);
}

TEST(Sweep, BadRanges) {
  std::string log;
  EXPECT_EQ(sweep_config(kConfigs + "/monotone_sweep.json", "a0", "", scratch("s"), &log), h::kExitConfig);
  EXPECT_NE(log.find("empty"), std::string::npos);
  EXPECT_EQ(sweep_config(kConfigs + "/monotone_sweep.json", "a0", " , ", scratch("s")), h::kExitConfig);
  EXPECT_EQ(sweep_config(kConfigs + "/monotone_sweep.json", "a0", "1,abc", scratch("s")), h::kExitConfig);
  EXPECT_EQ(sweep_config(kConfigs + "/monotone_sweep.json", "nonexistent", "1", scratch("s")), h::kExitConfig);
  EXPECT_EQ(sweep_config(kConfigs + "/monotone_sweep.json", "location", "1", scratch("s")), h::kExitConfig);
  // a value that makes the scenario invalid
  EXPECT_EQ(sweep_config(kConfigs + "/monotone_sweep.json", "t_end", "-1", scratch("s")), h::kExitConfig);
}

TEST(Determinism, ByteIdenticalAcrossRunsAndJobs) {
  const auto a = scratch("det_a"), b = scratch("det_b");
  ASSERT_EQ(run_config(kConfigs + "/suite.json", a, nullptr, 1), h::kExitOk);
  ASSERT_EQ(run_config(kConfigs + "/suite.json", b, nullptr, 4), h::kExitOk);
  std::size_t files = 0;
  for (const auto& entry : fs::directory_iterator(a)) {
    const auto name = entry.path().filename();
    EXPECT_NE(name.extension(), ".tmp");
    ASSERT_TRUE(fs::exists(b / name)) << name;
    EXPECT_EQ(slurp(entry.path()), slurp(b / name)) << name;
    ++files;
  }
  EXPECT_EQ(files, static_cast<std::size_t>(std::distance(fs::directory_iterator(b), {})));
  EXPECT_GT(files, 13u);
}

TEST(Determinism, EnvironmentSeedOverride) {
  const auto a = scratch("seed_a"), b = scratch("seed_b");
  std::string log;
  ::setenv("BLOWUPLAB_SEED", "12345", 1);
  run_config(kConfigs + "/suite.json", a, &log);
  ::unsetenv("BLOWUPLAB_SEED");
  EXPECT_NE(log.find("seed 12345, env"), std::string::npos) << log;
  run_config(kConfigs + "/suite.json", b, &log);
  EXPECT_NE(log.find("seed 7, config"), std::string::npos) << log;
  const auto ra = report(a, "odd_positivity"), rb = report(b, "odd_positivity");
  EXPECT_NE(ra["seed"], rb["seed"]);
  EXPECT_NE(ra["metrics"]["min_value"], rb["metrics"]["min_value"]);

  ::setenv("BLOWUPLAB_SEED", "-3", 1);
  EXPECT_EQ(run_config(kConfigs + "/suite.json", scratch("seed_c")), h::kExitConfig);
  ::unsetenv("BLOWUPLAB_SEED");
}

TEST(Determinism, ToleranceOverrideRecorded) {
  h::RunOptions o;
  o.config = kConfigs + "/equilibria.json";
  const auto out = scratch("tol");
  o.out_dir = out.string();
  o.tol = 1e-8;
  std::ostringstream log;
  EXPECT_EQ(h::run(o, log), h::kExitOk);
  const auto r = report(out, h::load_config(o.config).entries.front().name);
  EXPECT_EQ(r["scenario"]["tolerances"]["rel_tol"], 1e-8);
}

TEST(Cli, ExitCodes) {
  const auto out = scratch("cli");
  EXPECT_EQ(cli("run " + kConfigs + "/equilibria.json --out " + out.string()), 0);
  EXPECT_TRUE(fs::exists(out / "summary.csv"));
  EXPECT_EQ(cli("run " + kConfigs + "/equilibria.json --out " + out.string() + " --jobs 2"), 0);
  EXPECT_EQ(cli("sweep " + kConfigs + "/monotone_sweep.json --param a0 --values 2 --out " + out.string()), 0);
  const auto expecting = write_text(
      R"({"scenarios": [{"name": "m", "scenario": {"location": "boundary", "parity": "odd", "a0": 2,
          "pressure_rr": -1, "t_end": 3}, "task": {"kind": "monotone_pressure"}, "expect": {"verdict": "PASS"}}]})");
  EXPECT_EQ(cli("sweep " + expecting.string() + " --param a0 --values 2 --out " + out.string()), 0);
  EXPECT_EQ(cli("sweep " + expecting.string() + " --param a0 --values 0.5 --out " + out.string()), 1);
  EXPECT_EQ(cli("run " + expecting.string() + " --out " + out.string() + " --tol 1e-9"), 0);
  EXPECT_EQ(cli("sweep " + kConfigs + "/monotone_sweep.json --param zz --values 1 --out " + out.string()), 2);
  EXPECT_EQ(cli("run /nonexistent.json --out " + out.string()), 2);
  EXPECT_EQ(cli("run"), 2);
  EXPECT_EQ(cli(""), 2);
  EXPECT_EQ(cli("frobnicate"), 2);
  EXPECT_EQ(cli("run " + kConfigs + "/equilibria.json --out " + out.string() + " --jobs 0"), 2);
  EXPECT_EQ(cli("--help"), 0);
}
