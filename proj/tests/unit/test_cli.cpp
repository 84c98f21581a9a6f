// Runs the built mixlab binary and checks exit codes and outputs.

#include <nlohmann/json.hpp>

#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

struct Result {
  int code;
  std::string out;
};

Result cli(const std::string &args) {
  const std::string cmd = std::string(MIXLAB_CLI) + " " + args + " 2>/dev/null";
  FILE *pipe = ::popen(cmd.c_str(), "r");
  std::string out;
  char buf[4096];
  while (std::fgets(buf, sizeof buf, pipe))
    out += buf;
  const int status = ::pclose(pipe);
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, out};
}

fs::path scratch(const std::string &name) {
  const fs::path p = fs::temp_directory_path() / ("mixlab_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path &p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path write_json(const fs::path &dir, const std::string &name, const json &doc) {
  const fs::path p = dir / name;
  std::ofstream(p) << doc.dump();
  return p;
}

const std::string kScenarios = MIXLAB_SCENARIOS;

} // namespace

TEST(Cli, RunWritesOutputsAndHonoursSeedOverride) {
  const fs::path out = scratch("run");
  const auto r = cli("run --config " + kScenarios + "/gmm_em_one_cluster.json --out " +
                     out.string() + " --seed 99");
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_TRUE(fs::exists(out / "trajectory_0.csv"));
  const json summary = json::parse(slurp(out / "summary.json"));
  EXPECT_EQ(summary["seed"], 99);
  EXPECT_EQ(summary["growth_model"], "exponential");
}

TEST(Cli, RunIsByteDeterministic) {
  const fs::path a = scratch("det_a"), b = scratch("det_b");
  const std::string cfg = kScenarios + "/bmm_em_full.json";
  ASSERT_EQ(cli("run --config " + cfg + " --out " + a.string()).code, 0);
  ASSERT_EQ(cli("run --config " + cfg + " --out " + b.string()).code, 0);
  for (const auto &e : fs::directory_iterator(a))
    EXPECT_EQ(slurp(e.path()), slurp(b / e.path().filename())) << e.path().filename();
}

TEST(Cli, ConfigErrorsExitOne) {
  const fs::path dir = scratch("bad");
  const auto bad = write_json(dir, "bad.json", {{"family", "gaussian"}, {"dim", 1}, {"oops", 1}});
  EXPECT_EQ(cli("run --config " + bad.string() + " --out " + (dir / "o").string()).code, 1);
  EXPECT_EQ(cli("run --config " + (dir / "missing.json").string()).code, 1);
  EXPECT_EQ(cli("run").code, 1);
  EXPECT_EQ(cli("frobnicate").code, 1);
}

TEST(Cli, DegenerateRunExitsTwo) {
  const fs::path dir = scratch("degenerate");
  const auto cfg = write_json(dir, "d.json",
                              json::parse(R"({
    "family": "bernoulli", "dim": 1,
    "truth": {"pi1": 0.5, "mu1": [0.9], "mu2": [0.1]},
    "init": {"policy": "explicit", "pi1": 0.5, "mu1": [1.0], "mu2": [1.0]},
    "algorithm": "em-full"})"));
  EXPECT_EQ(cli("run --config " + cfg.string() + " --out " + (dir / "o").string()).code, 2);
}

TEST(Cli, AnalyzeModes) {
  const fs::path out = scratch("analyze");
  ASSERT_EQ(cli("run --config " + kScenarios + "/gmm_em_one_cluster.json --out " + out.string())
                .code,
            0);
  const std::string traj = (out / "trajectory_0.csv").string();
  const auto r = cli("analyze --trajectory " + traj + " --mode rotation");
  ASSERT_EQ(r.code, 0);
  EXPECT_TRUE(json::parse(r.out)["monotone"].get<bool>());
  EXPECT_EQ(cli("analyze --trajectory " + traj + " --mode escape-time").code, 0);
  EXPECT_EQ(cli("analyze --trajectory " + traj + " --mode sideways").code, 1);
  EXPECT_EQ(cli("analyze --trajectory /nonexistent.csv --mode region").code, 1);
}

TEST(Cli, KlGapAndTrapWitness) {
  const auto kl = cli("kl-gap --config " + kScenarios + "/bmm_kl_gap.json");
  ASSERT_EQ(kl.code, 0);
  EXPECT_NEAR(json::parse(kl.out)["gap"].get<double>(), 4.0 * std::log(2.0), 1e-4);

  const auto w = cli("trap-witness --config " + kScenarios +
                     "/bmm_witness.json --axis 0 --lambda 0.5");
  ASSERT_EQ(w.code, 0);
  const json j = json::parse(w.out);
  EXPECT_TRUE(j["found"].get<bool>());
  EXPECT_LT(j["z1_before"].get<double>(), 1.0);
  EXPECT_GT(j["z1_after_map"].get<double>(), 1.0);
  EXPECT_EQ(cli("trap-witness --config " + kScenarios +
                "/bmm_witness.json --axis 0 --lambda -1")
                .code,
            1);
}

TEST(Cli, SweepWritesCsv) {
  const fs::path out = scratch("sweep");
  const auto r = cli("sweep --grid " + kScenarios + "/sweep_separation.json --out " +
                     out.string() + " --jobs 2");
  ASSERT_EQ(r.code, 0);
  const std::string csv = slurp(out / "sweep.csv");
  EXPECT_EQ(csv.substr(0, csv.find('\n')),
            "cell,separation,repetitions,escaped,trapped,budget_exhausted,degenerate,escape_rate,"
            "median_escape_time,growth_model,errors");
}
