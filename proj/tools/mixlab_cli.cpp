// mixlab: run, sweep and analyse one-cluster mixture dynamics.
//
// Exit codes: 0 success, 1 configuration error, 2 numerical degeneracy.

#include "mixlab/harness/analyze.hpp"
#include "mixlab/harness/sweep.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;
using namespace mixlab;
using namespace mixlab::harness;

namespace {

constexpr int kExitConfig = 1;
constexpr int kExitDegenerate = 2;

int cmd_run(const std::string &config_path, const std::string &out,
            std::optional<std::uint64_t> seed) {
  json doc = read_json_file(config_path);
  if (seed)
    doc["seed"] = *seed;
  const ScenarioConfig cfg = parse_config(doc);
  const RunReport rep = run_scenario(cfg, fs::path(out), resolve_jobs(std::nullopt));
  std::cout << "repetitions " << rep.runs.size() << " escaped " << rep.escaped << " trapped "
            << rep.trapped << " budget_exhausted " << rep.budget_exhausted << " degenerate "
            << rep.degenerate << " growth " << rep.growth_model << '\n';
  if (rep.any_degenerate()) {
    for (const auto &r : rep.runs)
      if (r.outcome == Outcome::Degenerate)
        std::cerr << "repetition " << r.repetition << ": " << r.note << '\n';
    return kExitDegenerate;
  }
  return 0;
}

int cmd_sweep(const std::string &grid_path, const std::string &out,
              std::optional<std::size_t> jobs) {
  const SweepSpec spec = parse_sweep(read_json_file(grid_path));
  const SweepTable table = run_sweep(spec, resolve_jobs(jobs));
  fs::create_directories(out);
  std::ofstream csv(fs::path(out) / "sweep.csv");
  write_sweep_csv(csv, table);
  std::cout << "cells " << table.rows.size() << " failed " << table.failed_cells << '\n';
  return 0;
}

int cmd_analyze(const std::string &path, const std::string &mode, double threshold) {
  std::cout << analyze(read_csv(path), mode, threshold).dump(2) << '\n';
  return 0;
}

int cmd_kl_gap(const std::string &config_path) {
  const ScenarioConfig cfg = load_config(config_path);
  if (cfg.family != FamilyKind::Bernoulli)
    throw ConfigError("family", "kl-gap needs the bernoulli family");
  const TrueMixture truth = make_truth(cfg);
  ExpectationEngine engine = [&] {
    try {
      return ExpectationEngine::enumerate(truth, cfg.engine.max_enumeration_dim);
    } catch (const std::invalid_argument &e) {
      throw ConfigError("dim", e.what());
    }
  }();
  const double gap = kl_gap(truth, engine);
  const double one_cluster = one_cluster_loss(truth, data_mean(truth));
  const json out{{"dim", cfg.dim},
                 {"gap", gap},
                 {"one_cluster_loss", one_cluster},
                 {"entropy", one_cluster - gap}};
  std::cout << out.dump(2) << '\n';
  return 0;
}

int cmd_trap_witness(const std::string &config_path, Index axis, double lambda, double radius) {
  const ScenarioConfig cfg = load_config(config_path);
  if (cfg.family != FamilyKind::Bernoulli || cfg.components != 2)
    throw ConfigError("family", "trap-witness needs a two-component bernoulli truth");
  const LambdaContext ctx(make_truth(cfg));
  if (axis < 0 || axis >= ctx.dim())
    throw ConfigError("--axis", "out of range");
  if (!(lambda > 0.0) || lambda > ctx.box_hi()[axis])
    throw ConfigError("--lambda", "must lie in (0, " + format_double(ctx.box_hi()[axis]) + "]");
  const TrapWitness w = find_trap_escape_witness(ctx, axis, lambda, radius);
  json out{{"found", w.found}, {"axis", axis}, {"lambda", lambda}};
  if (w.found) {
    out["lambda_prime"] = std::vector<double>(w.lambda_prime.data(),
                                              w.lambda_prime.data() + w.lambda_prime.size());
    out["z1_before"] = w.z1_before;
    out["z1_after_map"] = w.z1_after_map;
    out["radius"] = w.radius;
    out["halvings"] = w.halvings;
  }
  std::cout << out.dump(2) << '\n';
  return 0;
}

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"mixlab: EM and projected gradient descent near one-cluster regions"};
  app.require_subcommand(1);

  std::string config, out = "out", grid, trajectory, mode;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> jobs;
  double threshold = kDefaultEscapeThreshold;
  Index axis = 0;
  double lambda = 0.0;
  double radius = 1.0;

  auto *run = app.add_subcommand("run", "run a scenario and write trajectories + summary");
  run->add_option("--config", config, "scenario JSON")->required();
  run->add_option("--out", out, "output directory");
  run->add_option("--seed", seed, "override the master seed");

  auto *sweep = app.add_subcommand("sweep", "run a grid of scenarios into sweep.csv");
  sweep->add_option("--grid", grid, "sweep JSON")->required();
  sweep->add_option("--out", out, "output directory");
  sweep->add_option("--jobs", jobs, "worker threads (MIXLAB_JOBS overrides)");

  auto *an = app.add_subcommand("analyze", "analyse a trajectory CSV");
  an->add_option("--trajectory", trajectory, "trajectory CSV")->required();
  an->add_option("--mode", mode, "analysis")
      ->required()
      ->check(CLI::IsMember({"escape-time", "rotation", "region", "ascent"}));
  an->add_option("--threshold", threshold, "escape threshold on pi1");

  auto *kl = app.add_subcommand("kl-gap", "one-cluster suboptimality gap by enumeration");
  kl->add_option("--config", config, "scenario JSON (bernoulli truth)")->required();

  auto *tw = app.add_subcommand("trap-witness", "search a GD-trap / EM-escape witness");
  tw->add_option("--config", config, "scenario JSON (bernoulli truth)")->required();
  tw->add_option("--axis", axis, "boundary ray axis i")->required();
  tw->add_option("--lambda", lambda, "lambda_i > 0 on the ray")->required();
  tw->add_option("--radius", radius, "search radius");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*run)
      return cmd_run(config, out, seed);
    if (*sweep)
      return cmd_sweep(grid, out, jobs);
    if (*an)
      return cmd_analyze(trajectory, mode, threshold);
    if (*kl)
      return cmd_kl_gap(config);
    if (*tw)
      return cmd_trap_witness(config, axis, lambda, radius);
  } catch (const ConfigError &e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const NumericalDegeneracy &e) {
    std::cerr << "numerical degeneracy: " << e.what() << '\n';
    return kExitDegenerate;
  } catch (const std::invalid_argument &e) {
    std::cerr << "invalid input: " << e.what() << '\n';
    return kExitConfig;
  }
  return 0;
}
