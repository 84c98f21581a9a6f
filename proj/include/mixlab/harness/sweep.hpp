#pragma once

// Grid sweeps over scenario configs. Cells run in parallel and the output
// rows follow the grid order. A failing cell fills the errors column instead
// of aborting the sweep.

#include "mixlab/harness/run.hpp"

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

namespace mixlab::harness {

struct SweepAxis {
  std::string path; ///< dotted field path into the base config, e.g. "truth.mu_star"
  std::vector<json> values;
};

enum class SweepMode { Grid, Separation, Conjecture };

struct SweepSpec {
  json base;
  SweepMode mode = SweepMode::Grid;
  std::vector<SweepAxis> axes;
  std::vector<double> separation_norms;
  std::vector<Index> conjecture_components{3, 4};
  std::size_t conjecture_trials = 50;
  double conjecture_epsilon = 1e-3;
};

struct SweepTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::size_t failed_cells = 0;
};

namespace detail {

inline json::json_pointer pointer_of(const std::string &dotted) {
  std::string p;
  std::size_t start = 0;
  for (;;) {
    const auto pos = dotted.find('.', start);
    p += "/" + dotted.substr(start, pos - start);
    if (pos == std::string::npos)
      break;
    start = pos + 1;
  }
  return json::json_pointer(p);
}

inline std::string cell_text(const json &v) {
  if (v.is_number())
    return format_double(v.get<double>());
  if (v.is_string())
    return v.get<std::string>();
  std::string s = v.dump();
  for (char &c : s)
    if (c == ',')
      c = ';';
  return s;
}

inline std::string sanitize(std::string s) {
  for (char &c : s) {
    if (c == ',')
      c = ';';
    if (c == '\n' || c == '\r')
      c = ' ';
  }
  return s;
}

} // namespace detail

inline SweepSpec parse_sweep(const json &root) {
  detail::require_object(root, "");
  detail::reject_unknown(root, "", {"base", "mode", "axes", "separation", "conjecture", "name"});
  SweepSpec spec;
  if (!root.contains("base"))
    throw ConfigError("base", "required field missing");
  spec.base = detail::require_object(root["base"], "base");
  const std::string mode = detail::string(root, "", "mode", "grid");
  if (mode == "grid")
    spec.mode = SweepMode::Grid;
  else if (mode == "separation")
    spec.mode = SweepMode::Separation;
  else if (mode == "conjecture")
    spec.mode = SweepMode::Conjecture;
  else
    throw ConfigError("mode", "unknown mode '" + mode + "' (grid, separation, conjecture)");

  if (root.contains("axes")) {
    const json &axes = root["axes"];
    if (!axes.is_array())
      throw ConfigError("axes", "expected an array");
    for (std::size_t k = 0; k < axes.size(); ++k) {
      const std::string p = detail::index_path("axes", k);
      const json &a = detail::require_object(axes[k], p);
      detail::reject_unknown(a, p, {"path", "values"});
      SweepAxis axis;
      axis.path = detail::string(a, p, "path");
      if (!a.contains("values") || !a["values"].is_array() || a["values"].empty())
        throw ConfigError(detail::join(p, "values"), "expected a non-empty array");
      for (const auto &v : a["values"])
        axis.values.push_back(v);
      spec.axes.push_back(std::move(axis));
    }
  }
  if (spec.mode == SweepMode::Separation) {
    const json s = root.value("separation", json::object());
    detail::require_object(s, "separation");
    detail::reject_unknown(s, "separation", {"norms"});
    if (!s.contains("norms") || !s["norms"].is_array() || s["norms"].empty())
      throw ConfigError("separation.norms", "expected a non-empty array");
    for (std::size_t k = 0; k < s["norms"].size(); ++k) {
      const double v = detail::as_number(s["norms"][k], detail::index_path("separation.norms", k));
      if (!(v > 0.0))
        throw ConfigError(detail::index_path("separation.norms", k), "must be positive");
      spec.separation_norms.push_back(v);
    }
    if (!spec.base.contains("truth") || !spec.base["truth"].contains("mu_star"))
      throw ConfigError("base.truth.mu_star", "separation mode scales the canonical mu_star");
  }
  if (spec.mode == SweepMode::Conjecture) {
    const json c = root.value("conjecture", json::object());
    detail::require_object(c, "conjecture");
    detail::reject_unknown(c, "conjecture", {"components", "trials", "epsilon"});
    if (c.contains("components")) {
      spec.conjecture_components.clear();
      const json &ms = c["components"];
      if (!ms.is_array() || ms.empty())
        throw ConfigError("conjecture.components", "expected a non-empty array");
      for (std::size_t k = 0; k < ms.size(); ++k) {
        const std::string p = detail::index_path("conjecture.components", k);
        if (!ms[k].is_number_unsigned() || ms[k].get<std::uint64_t>() < 2)
          throw ConfigError(p, "expected an integer >= 2");
        spec.conjecture_components.push_back(static_cast<Index>(ms[k].get<std::uint64_t>()));
      }
    }
    spec.conjecture_trials = detail::unsigned_int(c, "conjecture", "trials", 50);
    spec.conjecture_epsilon = detail::number(c, "conjecture", "epsilon", 1e-3);
    if (spec.conjecture_trials < 1)
      throw ConfigError("conjecture.trials", "must be at least 1");
    if (!(spec.conjecture_epsilon > 0.0 && spec.conjecture_epsilon < 0.5))
      throw ConfigError("conjecture.epsilon", "must lie in (0, 0.5)");
  }
  return spec;
}

namespace detail {

inline std::vector<std::string> summary_columns() {
  return {"repetitions", "escaped",     "trapped",            "budget_exhausted", "degenerate",
          "escape_rate", "median_escape_time", "growth_model", "errors"};
}

inline std::vector<std::string> summary_cells(const RunReport &r) {
  return {std::to_string(r.runs.size()),
          std::to_string(r.escaped),
          std::to_string(r.trapped),
          std::to_string(r.budget_exhausted),
          std::to_string(r.degenerate),
          format_double(r.escape_rate),
          r.median_escape_time ? format_double(*r.median_escape_time) : "",
          r.growth_model,
          ""};
}

/// Cartesian product of axis values in row-major order (last axis fastest).
inline std::vector<std::vector<std::size_t>> grid_indices(const std::vector<SweepAxis> &axes) {
  std::vector<std::vector<std::size_t>> out{{}};
  for (const auto &a : axes) {
    std::vector<std::vector<std::size_t>> next;
    for (const auto &prefix : out)
      for (std::size_t v = 0; v < a.values.size(); ++v) {
        auto row = prefix;
        row.push_back(v);
        next.push_back(std::move(row));
      }
    out = std::move(next);
  }
  return out;
}

inline SweepTable run_cells(const std::vector<json> &configs,
                            const std::vector<std::vector<std::string>> &keys,
                            std::vector<std::string> key_header, std::size_t jobs) {
  SweepTable table;
  table.header = {"cell"};
  table.header.insert(table.header.end(), key_header.begin(), key_header.end());
  for (auto &c : summary_columns())
    table.header.push_back(c);

  std::vector<std::vector<std::string>> cells(configs.size());
  std::vector<char> failed(configs.size(), 0);
  parallel_for(configs.size(), jobs, [&](std::size_t k) {
    try {
      cells[k] = summary_cells(run_scenario(parse_config(configs[k])));
    } catch (const std::exception &e) {
      cells[k] = std::vector<std::string>(summary_columns().size(), "");
      cells[k].back() = sanitize(e.what());
      failed[k] = 1;
    }
  });
  for (std::size_t k = 0; k < configs.size(); ++k) {
    std::vector<std::string> row{std::to_string(k)};
    row.insert(row.end(), keys[k].begin(), keys[k].end());
    row.insert(row.end(), cells[k].begin(), cells[k].end());
    table.rows.push_back(std::move(row));
    table.failed_cells += failed[k];
  }
  return table;
}

/// One conjecture trial: random m-component Bernoulli truth, init near a
/// k-cluster point (m - k weights set to epsilon), Full EM for max_steps.
/// Returns whether every weight ends at or above the escape threshold.
inline bool conjecture_trial(Index m, Index dim, std::size_t trial, std::uint64_t seed,
                             double epsilon, const StopRule &base_stop) {
  const std::uint64_t s = derive_seed(derive_seed(seed, static_cast<std::uint64_t>(m)), trial);
  const TrueMixture truth = random_truth(MixtureFamily::bernoulli(), dim, m, derive_seed(s, 0));
  const ExpectationEngine engine = ExpectationEngine::enumerate(truth);

  Rng rng = make_rng(derive_seed(s, 1));
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::uniform_int_distribution<Index> pick_k(1, m - 1);
  const Index k = pick_k(rng);
  std::vector<Index> order(static_cast<std::size_t>(m));
  std::iota(order.begin(), order.end(), Index{0});
  std::shuffle(order.begin(), order.end(), rng);
  Vec pi = Vec::Zero(m);
  for (Index j = 0; j < m; ++j)
    pi[order[static_cast<std::size_t>(j)]] = j < k ? 1.0 : 0.0;
  pi = pi * (1.0 - epsilon * static_cast<double>(m - k)) / static_cast<double>(k);
  for (Index j = k; j < m; ++j)
    pi[order[static_cast<std::size_t>(j)]] = epsilon;
  Mat means(dim, m);
  for (Index c = 0; c < m; ++c)
    for (Index i = 0; i < dim; ++i)
      means(i, c) = unif(rng);

  StopRule stop = base_stop;
  stop.stop_on_escape = false;
  const Trajectory traj = run_em(ModelState(pi, means), engine, EmMode::Full, stop);
  return traj.back().pi.minCoeff() >= base_stop.escape_threshold;
}

} // namespace detail

inline SweepTable run_sweep(const SweepSpec &spec, std::size_t jobs) {
  if (spec.mode == SweepMode::Conjecture) {
    const ScenarioConfig base = parse_config(spec.base);
    if (base.family != FamilyKind::Bernoulli)
      throw ConfigError("base.family", "conjecture mode is bernoulli only");
    SweepTable table;
    table.header = {"cell", "components", "trials", "reached_m_cluster", "fraction", "errors"};
    for (std::size_t k = 0; k < spec.conjecture_components.size(); ++k) {
      const Index m = spec.conjecture_components[k];
      std::vector<char> reached(spec.conjecture_trials, 0);
      std::string error;
      try {
        parallel_for(spec.conjecture_trials, jobs, [&](std::size_t t) {
          reached[t] = detail::conjecture_trial(m, base.dim, t, base.seed.value_or(0),
                                                spec.conjecture_epsilon, base.stop);
        });
      } catch (const std::exception &e) {
        error = detail::sanitize(e.what());
        ++table.failed_cells;
      }
      const auto hits = static_cast<std::size_t>(std::count(reached.begin(), reached.end(), 1));
      table.rows.push_back(
          {std::to_string(k), std::to_string(m), std::to_string(spec.conjecture_trials),
           error.empty() ? std::to_string(hits) : "",
           error.empty() ? format_double(static_cast<double>(hits) /
                                         static_cast<double>(spec.conjecture_trials))
                         : "",
           error});
    }
    return table;
  }

  std::vector<json> configs;
  std::vector<std::vector<std::string>> keys;
  std::vector<std::string> key_header;
  if (spec.mode == SweepMode::Separation) {
    key_header.push_back("separation");
    const json &ms = spec.base["truth"]["mu_star"];
    std::vector<double> dir;
    double norm = 0.0;
    for (const auto &v : ms) {
      dir.push_back(v.is_number() ? v.get<double>() : 0.0);
      norm += dir.back() * dir.back();
    }
    norm = std::sqrt(norm);
    if (!(norm > 0.0))
      throw ConfigError("base.truth.mu_star", "must be nonzero to define a direction");
    for (double s : spec.separation_norms) {
      json cfg = spec.base;
      json scaled = json::array();
      for (double d : dir)
        scaled.push_back(d / norm * s);
      cfg["truth"]["mu_star"] = scaled;
      configs.push_back(std::move(cfg));
      keys.push_back({format_double(s)});
    }
  } else {
    for (const auto &a : spec.axes)
      key_header.push_back(a.path);
    for (const auto &idx : detail::grid_indices(spec.axes)) {
      json cfg = spec.base;
      std::vector<std::string> key;
      for (std::size_t k = 0; k < idx.size(); ++k) {
        const json &v = spec.axes[k].values[idx[k]];
        try {
          cfg[detail::pointer_of(spec.axes[k].path)] = v;
        } catch (const json::exception &e) {
          throw ConfigError(detail::index_path("axes", k) + ".path", e.what());
        }
        key.push_back(detail::cell_text(v));
      }
      configs.push_back(std::move(cfg));
      keys.push_back(std::move(key));
    }
  }
  return detail::run_cells(configs, keys, key_header, jobs);
}

inline void write_sweep_csv(std::ostream &out, const SweepTable &table) {
  for (std::size_t k = 0; k < table.header.size(); ++k)
    out << (k ? "," : "") << table.header[k];
  out << '\n';
  for (const auto &row : table.rows) {
    for (std::size_t k = 0; k < row.size(); ++k)
      out << (k ? "," : "") << row[k];
    out << '\n';
  }
}

} // namespace mixlab::harness
