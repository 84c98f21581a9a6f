#include "mixlab/harness/analyze.hpp"
#include "mixlab/harness/sweep.hpp"

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace mixlab;
using namespace mixlab::harness;
namespace fs = std::filesystem;

namespace {

json gaussian_em() {
  return json::parse(R"({
    "family": "gaussian", "dim": 2,
    "truth": {"pi1": 0.6, "mu_star": [1.0, 0.5]},
    "init": {"policy": "one_cluster", "epsilon": 1e-6, "spread": 0.4},
    "algorithm": "em-one-cluster",
    "engine": {"kind": "closed_form"},
    "max_steps": 5000, "seed": 3, "repetitions": 3
  })");
}

json bernoulli_full() {
  return json::parse(R"({
    "family": "bernoulli", "dim": 3,
    "truth": {"pi1": 0.4, "mu1": [0.8, 0.3, 0.7], "mu2": [0.2, 0.6, 0.1]},
    "init": {"policy": "random"},
    "algorithm": "em-full",
    "max_steps": 50, "stop_on_escape": false, "seed": 11, "repetitions": 2
  })");
}

std::string error_path(const json &doc) {
  try {
    parse_config(doc);
  } catch (const ConfigError &e) {
    return e.path();
  }
  return "<accepted>";
}

fs::path scratch(const std::string &name) {
  const fs::path p = fs::temp_directory_path() / ("mixlab_test_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path &p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

} // namespace

TEST(Config, ParsesScenarioFields) {
  const auto cfg = parse_config(gaussian_em());
  EXPECT_EQ(cfg.family, FamilyKind::Gaussian);
  EXPECT_EQ(cfg.truth_source, TruthSource::Canonical);
  EXPECT_EQ(cfg.algorithm, Algorithm::EmOneCluster);
  EXPECT_EQ(cfg.engine.kind, EngineKind::OneClusterClosedForm);
  EXPECT_EQ(cfg.repetitions, 3u);
  EXPECT_EQ(cfg.stop.max_steps, 5000u);
  EXPECT_DOUBLE_EQ(cfg.init_spread, 0.4);
}

TEST(Config, ErrorsNameTheField) {
  auto doc = gaussian_em();
  doc["bogus"] = 1;
  EXPECT_EQ(error_path(doc), "bogus");

  doc = gaussian_em();
  doc.erase("seed");
  EXPECT_EQ(error_path(doc), "seed");

  doc = gaussian_em();
  doc["repetitions"] = 0;
  EXPECT_EQ(error_path(doc), "repetitions");

  doc = gaussian_em();
  doc["algorithm"] = "em-full";
  EXPECT_EQ(error_path(doc), "engine.kind");

  doc = gaussian_em();
  doc["truth"]["mu_star"] = {1.0};
  EXPECT_EQ(error_path(doc), "truth.mu_star");

  doc = gaussian_em();
  doc["escape_threshold"] = 0.6;
  EXPECT_EQ(error_path(doc), "escape_threshold");

  doc = gaussian_em();
  doc["max_steps"] = 0;
  EXPECT_EQ(error_path(doc), "max_steps");

  doc = gaussian_em();
  doc["init"]["policy"] = "sideways";
  EXPECT_EQ(error_path(doc), "init.policy");

  doc = bernoulli_full();
  doc["engine"] = {{"kind", "enumerate"}, {"max_enumeration_dim", 2}};
  EXPECT_EQ(error_path(doc), "engine.kind");
}

TEST(Config, InvalidTruthBecomesConfigError) {
  auto doc = bernoulli_full();
  doc["truth"]["mu1"] = {1.0, 0.3, 0.7};
  const auto cfg = parse_config(doc);
  try {
    make_truth(cfg);
    FAIL() << "boundary truth accepted";
  } catch (const ConfigError &e) {
    EXPECT_EQ(e.path(), "truth");
  }
}

TEST(Config, InitDependsOnRepetitionOnly) {
  const auto cfg = parse_config(gaussian_em());
  const auto truth = make_truth(cfg);
  EXPECT_EQ(make_init(cfg, truth, 1), make_init(cfg, truth, 1));
  EXPECT_NE(make_init(cfg, truth, 0), make_init(cfg, truth, 1));
  const auto s = make_init(cfg, truth, 0);
  EXPECT_EQ(s.pi1(), 1e-6);
  EXPECT_LT((s.mu2() - data_mean(truth)).norm(), 1e-15);
  EXPECT_LE((s.mu1() - data_mean(truth)).cwiseAbs().maxCoeff(), 0.4);
}

TEST(Growth, SyntheticSeries) {
  std::vector<double> t, expo, lin;
  for (int k = 0; k < 30; ++k) {
    t.push_back(k);
    expo.push_back(1e-6 * std::pow(1.5, k));
    lin.push_back(1e-6 + 3e-4 * k);
  }
  const auto fe = fit_growth(t, expo);
  EXPECT_EQ(fe.model, "exponential");
  EXPECT_LT(fe.exponential_residual, 1e-10);
  EXPECT_NEAR(fe.exponential_rate, std::log(1.5), 1e-6);
  const auto fl = fit_growth(t, lin);
  EXPECT_EQ(fl.model, "linear");
  EXPECT_LT(fl.linear_residual, 1e-12);
  EXPECT_EQ(fit_growth({0, 1}, {1e-6, 2e-6}).model, "none");
  EXPECT_EQ(fit_growth({0, 1, 2}, {1e-6, 1e-6, 1e-6}).model, "none");
}

TEST(Growth, EmExponentialPgdLinear) {
  const auto em = run_scenario(parse_config(gaussian_em()));
  EXPECT_EQ(em.escaped, 3u);
  EXPECT_EQ(em.growth_model, "exponential");

  auto doc = gaussian_em();
  doc["algorithm"] = "pgd";
  doc["gradient_mode"] = "one_cluster";
  doc["max_steps"] = 100000;
  const auto pgd = run_scenario(parse_config(doc));
  EXPECT_EQ(pgd.escaped, 3u);
  EXPECT_EQ(pgd.growth_model, "linear");
  EXPECT_GT(*pgd.median_escape_time, *em.median_escape_time);
}

TEST(RunScenario, WritesDeterministicOutputs) {
  const auto cfg = parse_config(bernoulli_full());
  const fs::path a = scratch("det_a"), b = scratch("det_b");
  run_scenario(cfg, a, 1);
  run_scenario(cfg, b, 2);
  for (const char *f : {"trajectory_0.csv", "trajectory_1.csv", "summary.json"}) {
    ASSERT_TRUE(fs::exists(a / f)) << f;
    EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
  }
  const auto table = read_csv((a / "trajectory_0.csv").string());
  EXPECT_EQ(table.header, csv_header(3, 2));
  EXPECT_EQ(table.rows.size(), 51u);
  const json summary = json::parse(slurp(a / "summary.json"));
  EXPECT_EQ(summary["algorithm"], "em-full");
  EXPECT_EQ(summary["seed"], 11);
  EXPECT_EQ(summary["repetitions"], 2);
}

TEST(RunScenario, CsvColumnsMatchTwoComponentLayout) {
  const std::vector<std::string> expected{
      "t",       "pi1",     "pi2",      "mu1_0",    "mu1_1",          "mu2_0", "mu2_1", "Z1",
      "Z2",      "loss",    "lambda_0", "lambda_1", "cos_mu1_mustar", "region"};
  EXPECT_EQ(csv_header(2, 2), expected);
}

TEST(RunScenario, DegenerateRepetitionIsReported) {
  auto doc = json::parse(R"({
    "family": "bernoulli", "dim": 1,
    "truth": {"pi1": 0.5, "mu1": [0.9], "mu2": [0.1]},
    "init": {"policy": "explicit", "pi1": 0.5, "mu1": [1.0], "mu2": [1.0]},
    "algorithm": "em-full"
  })");
  const auto rep = run_scenario(parse_config(doc));
  EXPECT_EQ(rep.degenerate, 1u);
  EXPECT_TRUE(rep.any_degenerate());
  EXPECT_FALSE(rep.runs[0].note.empty());
}

TEST(FormatDouble, RoundTrips) {
  for (double x : {0.1, 1.0 / 3.0, 1e-300, -2.5e17, 0.0}) {
    const std::string s = format_double(x);
    EXPECT_EQ(std::stod(s), x) << s;
  }
  EXPECT_EQ(format_double(std::numeric_limits<double>::infinity()), "inf");
}

TEST(Sweep, SingleCellMatchesRunScenario) {
  json spec = {{"base", gaussian_em()}, {"axes", {{{"path", "seed"}, {"values", {3}}}}}};
  const auto table = run_sweep(parse_sweep(spec), 1);
  ASSERT_EQ(table.rows.size(), 1u);
  const auto direct = harness::detail::summary_cells(run_scenario(parse_config(gaussian_em())));
  const std::vector<std::string> tail(table.rows[0].end() - static_cast<long>(direct.size()),
                                      table.rows[0].end());
  EXPECT_EQ(tail, direct);
}

TEST(Sweep, GridOrderAndFailedCells) {
  json spec = {{"base", gaussian_em()},
               {"axes",
                {{{"path", "truth.pi1"}, {"values", {0.5, 0.7}}},
                 {{"path", "repetitions"}, {"values", {1, 0}}}}}};
  const auto table = run_sweep(parse_sweep(spec), 2);
  ASSERT_EQ(table.rows.size(), 4u);
  EXPECT_EQ(table.rows[1][1], "0.5");
  EXPECT_EQ(table.rows[1][2], "0");
  EXPECT_EQ(table.failed_cells, 2u);
  EXPECT_NE(table.rows[1].back().find("repetitions"), std::string::npos);
}

TEST(Sweep, SeparationEscapeTimeDecreases) {
  const auto spec = parse_sweep(read_json_file(MIXLAB_SCENARIOS "/sweep_separation.json"));
  const auto table = run_sweep(spec, 2);
  const auto col = std::find(table.header.begin(), table.header.end(), "median_escape_time") -
                   table.header.begin();
  double prev = std::numeric_limits<double>::infinity();
  for (const auto &row : table.rows) {
    const double t = std::stod(row[static_cast<std::size_t>(col)]);
    EXPECT_LT(t, prev);
    prev = t;
  }
}

TEST(Sweep, ConjectureModeReportsFractions) {
  json spec = json::parse(R"({
    "mode": "conjecture",
    "conjecture": {"components": [3], "trials": 4, "epsilon": 0.001},
    "base": {"family": "bernoulli", "dim": 4, "truth": {"random": true},
             "init": {"policy": "random"}, "algorithm": "em-full",
             "max_steps": 300, "seed": 5}
  })");
  const auto table = run_sweep(parse_sweep(spec), 2);
  ASSERT_EQ(table.rows.size(), 1u);
  const double frac = std::stod(table.rows[0][4]);
  EXPECT_GE(frac, 0.0);
  EXPECT_LE(frac, 1.0);
}

TEST(Analyze, ModesOnWrittenTrajectory) {
  auto doc = gaussian_em();
  doc["repetitions"] = 1;
  const fs::path out = scratch("analyze");
  run_scenario(parse_config(doc), out);
  const auto table = read_csv((out / "trajectory_0.csv").string());
  const json esc = analyze(table, "escape-time", 0.01);
  EXPECT_EQ(esc["escape_time"].get<std::size_t>() + 1, table.rows.size());
  EXPECT_TRUE(analyze(table, "rotation", 0.01)["monotone"].get<bool>());
  EXPECT_TRUE(analyze(table, "ascent", 0.01)["ascending"].get<bool>());
  EXPECT_EQ(analyze(table, "region", 0.01)["steps"], table.rows.size());
  EXPECT_THROW(analyze(table, "nope", 0.01), ConfigError);
}

TEST(Parallel, JobsResolution) {
  ::unsetenv("MIXLAB_JOBS");
  EXPECT_EQ(resolve_jobs(3), 3u);
  ::setenv("MIXLAB_JOBS", "2", 1);
  EXPECT_EQ(resolve_jobs(3), 2u);
  ::setenv("MIXLAB_JOBS", "zero", 1);
  EXPECT_THROW(resolve_jobs(std::nullopt), std::invalid_argument);
  ::unsetenv("MIXLAB_JOBS");
}

TEST(Parallel, RethrowsFirstError) {
  std::vector<int> seen(10, 0);
  EXPECT_THROW(parallel_for(10, 4,
                            [&](std::size_t i) {
                              seen[i] = 1;
                              if (i == 7)
                                throw std::runtime_error("boom");
                            }),
               std::runtime_error);
  EXPECT_EQ(std::count(seen.begin(), seen.end(), 1), 10);
}
