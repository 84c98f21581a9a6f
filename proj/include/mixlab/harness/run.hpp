#pragma once

#include "mixlab/harness/config.hpp"
#include "mixlab/harness/parallel.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>
#include <ostream>
#include <string>
#include <vector>

namespace mixlab::harness {

/// Shortest round-trip decimal form, so equal doubles print identical bytes.
inline std::string format_double(double v) {
  if (std::isnan(v))
    return "nan";
  if (std::isinf(v))
    return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc())
    throw std::runtime_error("format_double: conversion failed");
  return std::string(buf, p);
}

// ---------------------------------------------------------------- CSV

inline std::vector<std::string> csv_header(Index dim, Index m) {
  std::vector<std::string> cols{"t"};
  for (Index c = 0; c < m; ++c)
    cols.push_back("pi" + std::to_string(c + 1));
  for (Index c = 0; c < m; ++c)
    for (Index i = 0; i < dim; ++i)
      cols.push_back("mu" + std::to_string(c + 1) + "_" + std::to_string(i));
  for (Index c = 0; c < m; ++c)
    cols.push_back("Z" + std::to_string(c + 1));
  cols.emplace_back("loss");
  for (Index i = 0; i < dim; ++i)
    cols.push_back("lambda_" + std::to_string(i));
  cols.emplace_back("cos_mu1_mustar");
  cols.emplace_back("region");
  return cols;
}

inline void write_csv(std::ostream &out, const Trajectory &traj) {
  const auto header = csv_header(traj.dim, traj.components);
  for (std::size_t k = 0; k < header.size(); ++k)
    out << (k ? "," : "") << header[k];
  out << '\n';
  for (const auto &s : traj.steps) {
    out << s.t;
    for (Index c = 0; c < traj.components; ++c)
      out << ',' << format_double(s.pi[c]);
    for (Index c = 0; c < traj.components; ++c)
      for (Index i = 0; i < traj.dim; ++i)
        out << ',' << format_double(s.means(i, c));
    for (Index c = 0; c < traj.components; ++c)
      out << ',' << format_double(s.z[c]);
    out << ',' << format_double(s.loss);
    for (Index i = 0; i < traj.dim; ++i) {
      out << ',';
      if (s.lambda)
        out << format_double((*s.lambda)[i]);
    }
    out << ',';
    if (s.cos_mu1_mustar)
      out << format_double(*s.cos_mu1_mustar);
    out << ',';
    if (s.region)
      out << to_string(*s.region);
    out << '\n';
  }
}

/// A trajectory CSV read back as named columns (empty cells become NaN).
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  [[nodiscard]] std::optional<std::size_t> column(std::string_view name) const {
    for (std::size_t k = 0; k < header.size(); ++k)
      if (header[k] == name)
        return k;
    return std::nullopt;
  }

  [[nodiscard]] std::vector<double> numbers(std::string_view name) const {
    const auto k = column(name);
    if (!k)
      throw ConfigError(std::string(name), "column missing from trajectory CSV");
    std::vector<double> out;
    out.reserve(rows.size());
    for (const auto &r : rows) {
      const std::string &cell = r.at(*k);
      if (cell.empty()) {
        out.push_back(std::numeric_limits<double>::quiet_NaN());
      } else if (cell == "inf" || cell == "-inf" || cell == "nan") {
        out.push_back(cell == "nan" ? std::numeric_limits<double>::quiet_NaN()
                                    : (cell[0] == '-' ? -1.0 : 1.0) *
                                          std::numeric_limits<double>::infinity());
      } else {
        double v = 0.0;
        const auto [p, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
        if (ec != std::errc() || p != cell.data() + cell.size())
          throw ConfigError(std::string(name), "unparseable cell '" + cell + "'");
        out.push_back(v);
      }
    }
    return out;
  }

  [[nodiscard]] std::vector<std::string> strings(std::string_view name) const {
    const auto k = column(name);
    if (!k)
      throw ConfigError(std::string(name), "column missing from trajectory CSV");
    std::vector<std::string> out;
    for (const auto &r : rows)
      out.push_back(r.at(*k));
    return out;
  }
};

inline CsvTable read_csv(const std::string &path) {
  std::ifstream in(path);
  if (!in)
    throw ConfigError("--trajectory", "cannot open " + path);
  CsvTable table;
  std::string line;
  auto split = [](const std::string &s) {
    std::vector<std::string> cells;
    std::size_t start = 0;
    for (;;) {
      const auto pos = s.find(',', start);
      cells.push_back(s.substr(start, pos - start));
      if (pos == std::string::npos)
        break;
      start = pos + 1;
    }
    return cells;
  };
  if (!std::getline(in, line))
    throw ConfigError("--trajectory", "empty file " + path);
  table.header = split(line);
  while (std::getline(in, line)) {
    if (line.empty())
      continue;
    auto cells = split(line);
    if (cells.size() != table.header.size())
      throw ConfigError("--trajectory", "row width does not match the header");
    table.rows.push_back(std::move(cells));
  }
  return table;
}

// ---------------------------------------------------------------- growth fit

struct GrowthFit {
  std::string model = "none"; ///< exponential, linear or none
  double exponential_residual = std::numeric_limits<double>::quiet_NaN();
  double linear_residual = std::numeric_limits<double>::quiet_NaN();
  double exponential_rate = std::numeric_limits<double>::quiet_NaN(); ///< per step
  double log_linear_residual = std::numeric_limits<double>::quiet_NaN(); ///< 1 - R^2 of log pi_1
  std::size_t points = 0;
  std::size_t window_start = 0;
};

namespace detail {

/// 1 - R^2 of a least-squares line y ~ a + b t; NaN when y is constant.
inline double one_minus_r2(const std::vector<double> &t, const std::vector<double> &y) {
  const double n = static_cast<double>(t.size());
  const double mt = std::accumulate(t.begin(), t.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double stt = 0.0, sty = 0.0, syy = 0.0;
  for (std::size_t k = 0; k < t.size(); ++k) {
    stt += (t[k] - mt) * (t[k] - mt);
    sty += (t[k] - mt) * (y[k] - my);
    syy += (y[k] - my) * (y[k] - my);
  }
  if (syy == 0.0 || stt == 0.0)
    return std::numeric_limits<double>::quiet_NaN();
  const double r2 = sty * sty / (stt * syy);
  return std::max(0.0, 1.0 - r2);
}

struct ExpFit {
  double sse_ratio; ///< SSE / SST of the best y ~ a exp(beta tau)
  double beta;      ///< rate over the whole window (tau in [0, 1])
};

/// Least squares y ~ a exp(beta tau) with tau = (t - t_0) / (t_n - t_0). The
/// amplitude is profiled out in closed form; beta is scanned on [-700, 700]
/// and refined by golden section. Exponentials are anchored at the window end
/// (beta > 0) or start (beta < 0) so they never overflow.
inline ExpFit exponential_least_squares(const std::vector<double> &t,
                                        const std::vector<double> &y) {
  const std::size_t n = t.size();
  const double t0 = t.front();
  const double span = t.back() - t.front();
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);
  double sst = 0.0, syy = 0.0;
  for (double v : y) {
    sst += (v - my) * (v - my);
    syy += v * v;
  }
  auto sse = [&](double beta) {
    double sye = 0.0, see = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      const double tau = (t[k] - t0) / span;
      const double e = std::exp(beta * (beta > 0.0 ? tau - 1.0 : tau));
      sye += y[k] * e;
      see += e * e;
    }
    return see > 0.0 ? syy - sye * sye / see : syy;
  };
  double best_beta = 0.0;
  double best = sse(0.0);
  for (int i = -700; i <= 700; ++i) {
    const double v = sse(static_cast<double>(i));
    if (v < best) {
      best = v;
      best_beta = i;
    }
  }
  double lo = best_beta - 1.0, hi = best_beta + 1.0;
  const double g = 0.5 * (std::sqrt(5.0) - 1.0);
  for (int it = 0; it < 100; ++it) {
    const double a = hi - g * (hi - lo);
    const double b = lo + g * (hi - lo);
    if (sse(a) < sse(b))
      hi = b;
    else
      lo = a;
  }
  const double beta = 0.5 * (lo + hi);
  const double v = std::min(best, sse(beta));
  return {std::max(0.0, v) / sst, (v == best ? best_beta : beta) / span};
}

} // namespace detail

/// Exponential against linear growth of pi_1(t), both fitted by least squares
/// to pi_1 itself so the residuals (SSE / SST) are comparable. Needs >= 3
/// points and a non-constant series.
inline GrowthFit fit_growth(const std::vector<double> &t, const std::vector<double> &pi1) {
  GrowthFit fit;
  fit.points = t.size();
  if (t.size() != pi1.size() || t.size() < 3)
    return fit;
  fit.linear_residual = detail::one_minus_r2(t, pi1);
  if (std::isnan(fit.linear_residual))
    return fit;
  const auto e = detail::exponential_least_squares(t, pi1);
  fit.exponential_residual = e.sse_ratio;
  fit.exponential_rate = e.beta;
  if (std::all_of(pi1.begin(), pi1.end(), [](double p) { return p > 0.0; })) {
    std::vector<double> logp;
    for (double p : pi1)
      logp.push_back(std::log(p));
    fit.log_linear_residual = detail::one_minus_r2(t, logp);
  }
  fit.model = fit.exponential_residual < fit.linear_residual ? "exponential" : "linear";
  return fit;
}

inline constexpr double kGrowthWindowTol = 1e-6;

/// Fit window: EM from step 1; PGD from the first step with mu_2 within 1e-6
/// of the engine mean. Both end at the escape step (inclusive).
inline GrowthFit fit_trajectory_growth(const Trajectory &traj, Algorithm algo, const Vec &mean) {
  if (traj.steps.empty())
    return {};
  std::size_t start = 1;
  if (algo == Algorithm::Pgd) {
    start = traj.steps.size();
    for (std::size_t k = 0; k < traj.steps.size(); ++k)
      if ((traj.steps[k].means.col(1) - mean).cwiseAbs().maxCoeff() <= kGrowthWindowTol) {
        start = k;
        break;
      }
  }
  const std::size_t end = traj.escape_step ? *traj.escape_step + 1 : traj.steps.size();
  std::vector<double> t, p;
  for (std::size_t k = start; k < end; ++k) {
    t.push_back(static_cast<double>(traj.steps[k].t));
    p.push_back(traj.steps[k].pi[0]);
  }
  GrowthFit fit = fit_growth(t, p);
  fit.window_start = start;
  return fit;
}

// ---------------------------------------------------------------- runs

struct RepetitionReport {
  std::size_t repetition = 0;
  Outcome outcome = Outcome::BudgetExhausted;
  std::optional<std::size_t> escape_step;
  std::size_t steps = 0;
  double final_pi1 = 0.0;
  std::size_t monotone_violations = 0;
  GrowthFit fit;
  std::string note;
};

struct RunReport {
  std::vector<RepetitionReport> runs;
  std::size_t escaped = 0, trapped = 0, budget_exhausted = 0, degenerate = 0;
  double escape_rate = 0.0;
  std::optional<double> median_escape_time;
  std::string growth_model = "none"; ///< majority over repetitions

  [[nodiscard]] bool any_degenerate() const noexcept { return degenerate > 0; }
};

inline Trajectory run_trajectory(const ScenarioConfig &cfg, const ExpectationEngine &engine,
                                 const ModelState &init) {
  try {
    switch (cfg.algorithm) {
    case Algorithm::EmFull:
      return run_em(init, engine, EmMode::Full, cfg.stop);
    case Algorithm::EmOneCluster:
      return run_em(init, engine, EmMode::OneClusterApprox, cfg.stop);
    case Algorithm::Pgd:
      return run_pgd(init, cfg.alpha, engine, cfg.stop, cfg.gradient_mode);
    }
  } catch (const NumericalDegeneracy &e) {
    Trajectory traj;
    traj.family = cfg.family;
    traj.dim = cfg.dim;
    traj.components = cfg.components;
    traj.outcome = Outcome::Degenerate;
    traj.note = e.what();
    return traj;
  }
  throw std::logic_error("unreachable algorithm");
}

inline RunReport summarize(std::vector<RepetitionReport> runs) {
  RunReport rep;
  rep.runs = std::move(runs);
  std::vector<double> times;
  std::size_t n_exp = 0, n_lin = 0;
  for (const auto &r : rep.runs) {
    switch (r.outcome) {
    case Outcome::Escaped:
      ++rep.escaped;
      times.push_back(static_cast<double>(*r.escape_step));
      break;
    case Outcome::Trapped:
      ++rep.trapped;
      break;
    case Outcome::BudgetExhausted:
      ++rep.budget_exhausted;
      break;
    case Outcome::Degenerate:
      ++rep.degenerate;
      break;
    }
    n_exp += r.fit.model == "exponential";
    n_lin += r.fit.model == "linear";
  }
  rep.escape_rate = rep.runs.empty() ? 0.0
                                     : static_cast<double>(rep.escaped) /
                                           static_cast<double>(rep.runs.size());
  if (!times.empty()) {
    std::sort(times.begin(), times.end());
    const std::size_t h = times.size() / 2;
    rep.median_escape_time = times.size() % 2 ? times[h] : 0.5 * (times[h - 1] + times[h]);
  }
  if (n_exp + n_lin > 0)
    rep.growth_model = n_exp >= n_lin ? "exponential" : "linear";
  return rep;
}

inline json to_json(const GrowthFit &f) {
  auto num = [](double v) { return std::isnan(v) ? json(nullptr) : json(v); };
  return {{"model", f.model},
          {"exponential_residual", num(f.exponential_residual)},
          {"linear_residual", num(f.linear_residual)},
          {"exponential_rate", num(f.exponential_rate)},
          {"log_linear_residual", num(f.log_linear_residual)},
          {"points", f.points},
          {"window_start", f.window_start}};
}

inline json to_json(const RunReport &rep) {
  json runs = json::array();
  for (const auto &r : rep.runs) {
    runs.push_back({{"repetition", r.repetition},
                    {"outcome", std::string(to_string(r.outcome))},
                    {"escape_step", r.escape_step ? json(*r.escape_step) : json(nullptr)},
                    {"steps", r.steps},
                    {"final_pi1", r.final_pi1},
                    {"monotone_violations", r.monotone_violations},
                    {"fit", to_json(r.fit)},
                    {"note", r.note}});
  }
  return {{"repetitions", rep.runs.size()},
          {"outcomes",
           {{"escaped", rep.escaped},
            {"trapped", rep.trapped},
            {"budget_exhausted", rep.budget_exhausted},
            {"degenerate", rep.degenerate}}},
          {"escape_rate", rep.escape_rate},
          {"median_escape_time",
           rep.median_escape_time ? json(*rep.median_escape_time) : json(nullptr)},
          {"growth_model", rep.growth_model},
          {"runs", runs}};
}

/// Run every repetition of a scenario. With `out_dir`, writes
/// trajectory_<rep>.csv per repetition and summary.json.
inline RunReport run_scenario(const ScenarioConfig &cfg,
                              const std::optional<std::filesystem::path> &out_dir = std::nullopt,
                              std::size_t jobs = 1) {
  const TrueMixture truth = make_truth(cfg);
  const ExpectationEngine engine = make_engine(cfg, truth);
  if (out_dir)
    std::filesystem::create_directories(*out_dir);

  std::vector<RepetitionReport> runs(cfg.repetitions);
  parallel_for(cfg.repetitions, jobs, [&](std::size_t r) {
    const ModelState init = make_init(cfg, truth, r);
    try {
      check_state(truth.family(), init);
    } catch (const std::invalid_argument &e) {
      throw ConfigError("init", e.what());
    }
    const Trajectory traj = run_trajectory(cfg, engine, init);
    RepetitionReport &rep = runs[r];
    rep.repetition = r;
    rep.outcome = traj.outcome;
    rep.escape_step = traj.escape_step;
    rep.steps = traj.steps.size();
    rep.final_pi1 = traj.steps.empty() ? init.pi()[0] : traj.back().pi[0];
    rep.monotone_violations = traj.monotone_violations;
    rep.note = traj.note;
    if (cfg.components == 2)
      rep.fit = fit_trajectory_growth(traj, cfg.algorithm, engine.mean());
    if (out_dir) {
      std::ofstream csv(*out_dir / ("trajectory_" + std::to_string(r) + ".csv"));
      write_csv(csv, traj);
    }
  });

  RunReport report = summarize(std::move(runs));
  if (out_dir) {
    json summary = to_json(report);
    summary["algorithm"] = std::string(to_string(cfg.algorithm));
    summary["family"] = std::string(to_string(cfg.family));
    summary["dim"] = cfg.dim;
    summary["engine"] = std::string(to_string(engine.kind()));
    summary["seed"] = cfg.seed ? json(*cfg.seed) : json(nullptr);
    summary["config"] = cfg.raw;
    std::ofstream out(*out_dir / "summary.json");
    out << summary.dump(2) << '\n';
  }
  return report;
}

} // namespace mixlab::harness
