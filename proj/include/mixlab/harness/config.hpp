#pragma once

// JSON scenario configuration. Every validation failure is a ConfigError
// naming the offending field path, e.g. "init.mu1[2]".

#include "mixlab/mixlab.hpp"

#include <json.hpp>

#include <cstdint>
#include <fstream>
#include <initializer_list>
#include <optional>
#include <sstream>
#include <string>

namespace mixlab::harness {

using json = nlohmann::json;

enum class Algorithm { EmFull, EmOneCluster, Pgd };

inline constexpr std::string_view to_string(Algorithm a) noexcept {
  switch (a) {
  case Algorithm::EmFull:
    return "em-full";
  case Algorithm::EmOneCluster:
    return "em-one-cluster";
  case Algorithm::Pgd:
    return "pgd";
  }
  return "unknown";
}

enum class TruthSource { Explicit, Canonical, Random };
enum class InitPolicy { Explicit, OneCluster, Random };

inline constexpr std::string_view to_string(InitPolicy p) noexcept {
  switch (p) {
  case InitPolicy::Explicit:
    return "explicit";
  case InitPolicy::OneCluster:
    return "one_cluster";
  case InitPolicy::Random:
    return "random";
  }
  return "unknown";
}

struct EngineSpec {
  EngineKind kind = EngineKind::Sample;
  std::size_t samples = kDefaultSampleSize;
  int max_enumeration_dim = kDefaultMaxEnumerationDim;
};

struct ScenarioConfig {
  FamilyKind family = FamilyKind::Gaussian;
  Index dim = 1;
  std::optional<Mat> sigma;
  Index components = 2;

  TruthSource truth_source = TruthSource::Explicit;
  Vec truth_pi;  ///< explicit: all weights
  Mat truth_means;
  Vec truth_mu_star; ///< canonical gaussian frame
  double truth_pi1 = 0.5;

  InitPolicy init = InitPolicy::OneCluster;
  double init_pi1 = 1e-6;
  Vec init_mu1, init_mu2;
  double epsilon = 1e-6;
  double init_spread = 2.0; ///< gaussian uniform-random mu_1 half width around x-bar

  Algorithm algorithm = Algorithm::EmFull;
  EmMode gradient_mode = EmMode::Full;
  double alpha = kDefaultStepSize;
  EngineSpec engine;
  StopRule stop;
  std::optional<std::uint64_t> seed;
  std::size_t repetitions = 1;

  json raw; ///< the document as read, for echoing into summaries
};

// Seed streams below the repetition range are reserved for shared inputs.
inline constexpr std::uint64_t kTruthStream = 0xFFFF'FFFF'0000'0001ULL;
inline constexpr std::uint64_t kEngineStream = 0xFFFF'FFFF'0000'0002ULL;

namespace detail {

inline std::string join(const std::string &base, std::string_view key) {
  return base.empty() ? std::string(key) : base + "." + std::string(key);
}

inline std::string index_path(const std::string &base, std::size_t i) {
  return base + "[" + std::to_string(i) + "]";
}

inline void reject_unknown(const json &obj, const std::string &base,
                           std::initializer_list<std::string_view> allowed) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool ok = false;
    for (auto a : allowed)
      ok = ok || a == it.key();
    if (!ok)
      throw ConfigError(join(base, it.key()), "unknown field");
  }
}

inline const json &require_object(const json &j, const std::string &path) {
  if (!j.is_object())
    throw ConfigError(path.empty() ? "<root>" : path, "expected an object");
  return j;
}

inline double as_number(const json &j, const std::string &path) {
  if (!j.is_number())
    throw ConfigError(path, "expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v))
    throw ConfigError(path, "must be finite");
  return v;
}

inline double number(const json &obj, const std::string &base, std::string_view key,
                     std::optional<double> fallback = std::nullopt) {
  const auto it = obj.find(std::string(key));
  if (it == obj.end()) {
    if (!fallback)
      throw ConfigError(join(base, key), "required field missing");
    return *fallback;
  }
  return as_number(*it, join(base, key));
}

inline std::uint64_t unsigned_int(const json &obj, const std::string &base, std::string_view key,
                                  std::optional<std::uint64_t> fallback = std::nullopt) {
  const auto it = obj.find(std::string(key));
  if (it == obj.end()) {
    if (!fallback)
      throw ConfigError(join(base, key), "required field missing");
    return *fallback;
  }
  if (!it->is_number_unsigned() && !(it->is_number_integer() && it->get<std::int64_t>() >= 0))
    throw ConfigError(join(base, key), "expected a nonnegative integer");
  return it->get<std::uint64_t>();
}

inline std::string string(const json &obj, const std::string &base, std::string_view key,
                          std::optional<std::string> fallback = std::nullopt) {
  const auto it = obj.find(std::string(key));
  if (it == obj.end()) {
    if (!fallback)
      throw ConfigError(join(base, key), "required field missing");
    return *fallback;
  }
  if (!it->is_string())
    throw ConfigError(join(base, key), "expected a string");
  return it->get<std::string>();
}

inline Vec vector(const json &j, const std::string &path, Index expected) {
  if (!j.is_array())
    throw ConfigError(path, "expected an array of numbers");
  if (static_cast<Index>(j.size()) != expected)
    throw ConfigError(path, "expected " + std::to_string(expected) + " entries, got " +
                                std::to_string(j.size()));
  Vec v(expected);
  for (std::size_t i = 0; i < j.size(); ++i)
    v[static_cast<Index>(i)] = as_number(j[i], index_path(path, i));
  return v;
}

inline Vec vector(const json &obj, const std::string &base, std::string_view key, Index expected) {
  const auto it = obj.find(std::string(key));
  if (it == obj.end())
    throw ConfigError(join(base, key), "required field missing");
  return vector(*it, join(base, key), expected);
}

inline Mat matrix(const json &j, const std::string &path, Index n) {
  if (!j.is_array() || static_cast<Index>(j.size()) != n)
    throw ConfigError(path, "expected a " + std::to_string(n) + "x" + std::to_string(n) +
                                " array of rows");
  Mat m(n, n);
  for (std::size_t r = 0; r < j.size(); ++r)
    m.row(static_cast<Index>(r)) = vector(j[r], index_path(path, r), n).transpose();
  return m;
}

inline FamilyKind parse_family(const std::string &s, const std::string &path) {
  if (s == "gaussian")
    return FamilyKind::Gaussian;
  if (s == "gaussian_fixed_sigma")
    return FamilyKind::GaussianFixedSigma;
  if (s == "bernoulli")
    return FamilyKind::Bernoulli;
  throw ConfigError(path, "unknown family '" + s + "' (gaussian, gaussian_fixed_sigma, bernoulli)");
}

inline Algorithm parse_algorithm(const std::string &s, const std::string &path) {
  if (s == "em-full")
    return Algorithm::EmFull;
  if (s == "em-one-cluster")
    return Algorithm::EmOneCluster;
  if (s == "pgd")
    return Algorithm::Pgd;
  throw ConfigError(path, "unknown algorithm '" + s + "' (em-full, em-one-cluster, pgd)");
}

inline EmMode parse_mode(const std::string &s, const std::string &path) {
  if (s == "full")
    return EmMode::Full;
  if (s == "one_cluster")
    return EmMode::OneClusterApprox;
  throw ConfigError(path, "unknown mode '" + s + "' (full, one_cluster)");
}

inline EngineKind parse_engine(const std::string &s, const std::string &path) {
  if (s == "enumerate")
    return EngineKind::EnumerateBernoulli;
  if (s == "sample")
    return EngineKind::Sample;
  if (s == "closed_form")
    return EngineKind::OneClusterClosedForm;
  throw ConfigError(path, "unknown engine '" + s + "' (enumerate, sample, closed_form)");
}

inline void parse_truth(const json &root, ScenarioConfig &cfg) {
  const auto it = root.find("truth");
  if (it == root.end())
    throw ConfigError("truth", "required field missing");
  const json &t = require_object(*it, "truth");
  reject_unknown(t, "truth", {"random", "pi", "pi1", "means", "mu1", "mu2", "mu_star"});
  const Index d = cfg.dim;
  const Index m = cfg.components;

  if (t.value("random", false)) {
    cfg.truth_source = TruthSource::Random;
    return;
  }
  if (t.contains("mu_star")) {
    if (cfg.family == FamilyKind::Bernoulli)
      throw ConfigError("truth.mu_star", "canonical frame is gaussian only");
    if (m != 2)
      throw ConfigError("truth.mu_star", "canonical frame needs two components");
    cfg.truth_source = TruthSource::Canonical;
    cfg.truth_mu_star = vector(t, "truth", "mu_star", d);
    cfg.truth_pi1 = number(t, "truth", "pi1");
    return;
  }
  cfg.truth_source = TruthSource::Explicit;
  if (t.contains("means")) {
    const json &rows = t["means"];
    if (!rows.is_array() || static_cast<Index>(rows.size()) != m)
      throw ConfigError("truth.means", "expected one mean per component");
    cfg.truth_means.resize(d, m);
    for (Index c = 0; c < m; ++c)
      cfg.truth_means.col(c) = vector(rows[static_cast<std::size_t>(c)],
                                      index_path("truth.means", static_cast<std::size_t>(c)), d);
    cfg.truth_pi = vector(t, "truth", "pi", m);
  } else {
    if (m != 2)
      throw ConfigError("truth", "mu1/mu2 form needs two components; use pi and means");
    cfg.truth_means.resize(d, 2);
    cfg.truth_means.col(0) = vector(t, "truth", "mu1", d);
    cfg.truth_means.col(1) = vector(t, "truth", "mu2", d);
    const double p1 = number(t, "truth", "pi1");
    cfg.truth_pi = Vec(2);
    cfg.truth_pi << p1, 1.0 - p1;
  }
}

inline void parse_init(const json &root, ScenarioConfig &cfg) {
  const auto it = root.find("init");
  if (it == root.end()) {
    cfg.init = InitPolicy::OneCluster;
    return;
  }
  const json &in = require_object(*it, "init");
  reject_unknown(in, "init", {"policy", "pi1", "mu1", "mu2", "epsilon", "spread"});
  const std::string policy = string(in, "init", "policy", "one_cluster");
  cfg.epsilon = number(in, "init", "epsilon", 1e-6);
  cfg.init_spread = number(in, "init", "spread", 2.0);
  if (!(cfg.epsilon >= 0.0 && cfg.epsilon < 1.0))
    throw ConfigError("init.epsilon", "must lie in [0, 1)");
  if (!(cfg.init_spread > 0.0))
    throw ConfigError("init.spread", "must be positive");
  if (policy == "explicit") {
    cfg.init = InitPolicy::Explicit;
    if (cfg.components != 2)
      throw ConfigError("init.policy", "explicit init supports two components");
    cfg.init_pi1 = number(in, "init", "pi1");
    if (!(cfg.init_pi1 >= 0.0 && cfg.init_pi1 <= 1.0))
      throw ConfigError("init.pi1", "must lie in [0, 1]");
    cfg.init_mu1 = vector(in, "init", "mu1", cfg.dim);
    cfg.init_mu2 = vector(in, "init", "mu2", cfg.dim);
  } else if (policy == "one_cluster") {
    cfg.init = InitPolicy::OneCluster;
    if (cfg.components != 2)
      throw ConfigError("init.policy", "one_cluster init needs two components");
  } else if (policy == "random") {
    cfg.init = InitPolicy::Random;
  } else {
    throw ConfigError("init.policy",
                      "unknown policy '" + policy + "' (explicit, one_cluster, random)");
  }
}

inline void parse_engine_spec(const json &root, ScenarioConfig &cfg) {
  EngineSpec &e = cfg.engine;
  e.kind = cfg.family == FamilyKind::Bernoulli && cfg.dim <= kDefaultMaxEnumerationDim
               ? EngineKind::EnumerateBernoulli
               : EngineKind::Sample;
  const auto it = root.find("engine");
  if (it == root.end())
    return;
  const json &j = require_object(*it, "engine");
  reject_unknown(j, "engine", {"kind", "samples", "max_enumeration_dim"});
  if (j.contains("kind"))
    e.kind = parse_engine(string(j, "engine", "kind"), "engine.kind");
  e.samples = unsigned_int(j, "engine", "samples", kDefaultSampleSize);
  e.max_enumeration_dim =
      static_cast<int>(unsigned_int(j, "engine", "max_enumeration_dim", kDefaultMaxEnumerationDim));
  if (e.samples == 0)
    throw ConfigError("engine.samples", "must be at least 1");
  if (e.kind == EngineKind::EnumerateBernoulli && cfg.family != FamilyKind::Bernoulli)
    throw ConfigError("engine.kind", "enumeration requires the bernoulli family");
  if (e.kind == EngineKind::EnumerateBernoulli && cfg.dim > e.max_enumeration_dim)
    throw ConfigError("engine.kind", "dimension exceeds max_enumeration_dim; use sample");
}

} // namespace detail

/// Validate and normalise a parsed document.
inline ScenarioConfig parse_config(const json &root) {
  detail::require_object(root, "");
  detail::reject_unknown(root, "",
                         {"family", "dim", "sigma", "components", "truth", "init", "algorithm",
                          "gradient_mode", "alpha", "engine", "max_steps", "escape_threshold",
                          "stop_on_escape", "param_tol", "absorb_steps", "seed", "repetitions",
                          "name", "description"});
  ScenarioConfig cfg;
  cfg.raw = root;
  cfg.family = detail::parse_family(detail::string(root, "", "family"), "family");
  cfg.dim = static_cast<Index>(detail::unsigned_int(root, "", "dim"));
  if (cfg.dim < 1)
    throw ConfigError("dim", "must be at least 1");
  cfg.components = static_cast<Index>(detail::unsigned_int(root, "", "components", 2));
  if (cfg.components < 2)
    throw ConfigError("components", "must be at least 2");

  if (cfg.family == FamilyKind::GaussianFixedSigma) {
    if (!root.contains("sigma"))
      throw ConfigError("sigma", "required for gaussian_fixed_sigma");
    cfg.sigma = detail::matrix(root["sigma"], "sigma", cfg.dim);
    try {
      (void)MixtureFamily::gaussian_fixed_sigma(*cfg.sigma);
    } catch (const std::invalid_argument &e) {
      throw ConfigError("sigma", e.what());
    }
  } else if (root.contains("sigma")) {
    throw ConfigError("sigma", "only valid with family gaussian_fixed_sigma");
  }

  detail::parse_truth(root, cfg);
  detail::parse_init(root, cfg);

  cfg.algorithm = detail::parse_algorithm(detail::string(root, "", "algorithm"), "algorithm");
  cfg.gradient_mode =
      detail::parse_mode(detail::string(root, "", "gradient_mode", "full"), "gradient_mode");
  cfg.alpha = detail::number(root, "", "alpha", kDefaultStepSize);
  if (!(cfg.alpha >= 0.0))
    throw ConfigError("alpha", "must be nonnegative");
  detail::parse_engine_spec(root, cfg);
  if (cfg.components != 2 && cfg.algorithm == Algorithm::EmOneCluster)
    throw ConfigError("algorithm", "em-one-cluster needs two components");
  if (cfg.engine.kind == EngineKind::OneClusterClosedForm) {
    if (cfg.components != 2)
      throw ConfigError("engine.kind", "closed_form needs two components");
    const bool one_cluster = cfg.algorithm == Algorithm::EmOneCluster ||
                             (cfg.algorithm == Algorithm::Pgd &&
                              cfg.gradient_mode == EmMode::OneClusterApprox);
    if (!one_cluster)
      throw ConfigError("engine.kind",
                        "closed_form only serves em-one-cluster or pgd with one_cluster gradients");
  }

  cfg.stop.max_steps = detail::unsigned_int(root, "", "max_steps", 1000);
  if (cfg.stop.max_steps < 1)
    throw ConfigError("max_steps", "must be at least 1");
  cfg.stop.escape_threshold = detail::number(root, "", "escape_threshold", kDefaultEscapeThreshold);
  if (!(cfg.stop.escape_threshold > 0.0 && cfg.stop.escape_threshold <= 0.5))
    throw ConfigError("escape_threshold", "must lie in (0, 0.5]");
  if (root.contains("stop_on_escape")) {
    if (!root["stop_on_escape"].is_boolean())
      throw ConfigError("stop_on_escape", "expected a boolean");
    cfg.stop.stop_on_escape = root["stop_on_escape"].get<bool>();
  }
  cfg.stop.param_tol = detail::number(root, "", "param_tol", 0.0);
  if (!(cfg.stop.param_tol >= 0.0))
    throw ConfigError("param_tol", "must be nonnegative");
  cfg.stop.absorb_steps = detail::unsigned_int(root, "", "absorb_steps", 10);

  if (root.contains("seed"))
    cfg.seed = detail::unsigned_int(root, "", "seed");
  cfg.repetitions = detail::unsigned_int(root, "", "repetitions", 1);
  if (cfg.repetitions < 1)
    throw ConfigError("repetitions", "must be at least 1");

  const bool randomized = cfg.truth_source == TruthSource::Random ||
                          cfg.init != InitPolicy::Explicit ||
                          cfg.engine.kind == EngineKind::Sample;
  if (randomized && !cfg.seed)
    throw ConfigError("seed", "required when the truth, init or engine is randomised");
  if (cfg.init == InitPolicy::Explicit && cfg.repetitions > 1 && !randomized)
    throw ConfigError("repetitions", "explicit, deterministic scenarios have one repetition");
  return cfg;
}

inline json read_json_file(const std::string &path) {
  std::ifstream in(path);
  if (!in)
    throw ConfigError("<file>", "cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error &e) {
    throw ConfigError("<file>", std::string("invalid JSON in ") + path + ": " + e.what());
  }
}

inline ScenarioConfig load_config(const std::string &path) { return parse_config(read_json_file(path)); }

inline MixtureFamily make_family(const ScenarioConfig &cfg) {
  switch (cfg.family) {
  case FamilyKind::Gaussian:
    return MixtureFamily::gaussian();
  case FamilyKind::GaussianFixedSigma:
    return MixtureFamily::gaussian_fixed_sigma(*cfg.sigma);
  case FamilyKind::Bernoulli:
    return MixtureFamily::bernoulli();
  }
  throw std::logic_error("unreachable family");
}

/// Random truth: weights drawn in (0.2, 1) and normalised; Bernoulli means
/// in (0.05, 0.95), Gaussian means standard normal.
inline TrueMixture random_truth(const MixtureFamily &family, Index dim, Index m,
                                std::uint64_t seed) {
  Rng rng = make_rng(seed);
  std::uniform_real_distribution<double> w(0.2, 1.0);
  std::uniform_real_distribution<double> bern(0.05, 0.95);
  std::normal_distribution<double> normal(0.0, 1.0);
  Vec pi(m);
  for (Index c = 0; c < m; ++c)
    pi[c] = w(rng);
  pi /= pi.sum();
  Mat means(dim, m);
  for (Index c = 0; c < m; ++c)
    for (Index i = 0; i < dim; ++i)
      means(i, c) = family.is_bernoulli() ? bern(rng) : normal(rng);
  return TrueMixture(family, ModelState(std::move(pi), std::move(means)));
}

inline TrueMixture make_truth(const ScenarioConfig &cfg) {
  const MixtureFamily family = make_family(cfg);
  try {
    switch (cfg.truth_source) {
    case TruthSource::Random:
      return random_truth(family, cfg.dim, cfg.components, derive_seed(*cfg.seed, kTruthStream));
    case TruthSource::Canonical:
      return TrueMixture::canonical(family, cfg.truth_pi1, cfg.truth_mu_star);
    case TruthSource::Explicit:
      return TrueMixture(family, ModelState(cfg.truth_pi, cfg.truth_means));
    }
  } catch (const ConfigError &) {
    throw;
  } catch (const std::invalid_argument &e) {
    throw ConfigError("truth", e.what());
  }
  throw std::logic_error("unreachable truth source");
}

inline ExpectationEngine make_engine(const ScenarioConfig &cfg, const TrueMixture &truth) {
  try {
    switch (cfg.engine.kind) {
    case EngineKind::EnumerateBernoulli:
      return ExpectationEngine::enumerate(truth, cfg.engine.max_enumeration_dim);
    case EngineKind::Sample:
      return ExpectationEngine::sampled(truth, cfg.engine.samples,
                                        derive_seed(*cfg.seed, kEngineStream));
    case EngineKind::OneClusterClosedForm:
      return ExpectationEngine::closed_form(truth);
    }
  } catch (const std::invalid_argument &e) {
    throw ConfigError("engine", e.what());
  }
  throw std::logic_error("unreachable engine kind");
}

/// Initial state of repetition `rep`.
inline ModelState make_init(const ScenarioConfig &cfg, const TrueMixture &truth, std::size_t rep) {
  const Index d = cfg.dim;
  const Index m = cfg.components;
  const Vec xbar = data_mean(truth);
  const bool bern = truth.family().is_bernoulli();
  try {
    if (cfg.init == InitPolicy::Explicit)
      return ModelState::two(cfg.init_pi1, cfg.init_mu1, cfg.init_mu2);

    Rng rng = make_rng(derive_seed(*cfg.seed, rep));
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    auto random_mean = [&] {
      Vec mu(d);
      for (Index i = 0; i < d; ++i)
        mu[i] = bern ? unif(rng) : xbar[i] + cfg.init_spread * (2.0 * unif(rng) - 1.0);
      return mu;
    };
    if (cfg.init == InitPolicy::OneCluster)
      return ModelState::two(cfg.epsilon, random_mean(), xbar);

    Vec pi(m);
    for (Index c = 0; c < m; ++c)
      pi[c] = 0.05 + unif(rng);
    pi /= pi.sum();
    Mat means(d, m);
    for (Index c = 0; c < m; ++c)
      means.col(c) = random_mean();
    return ModelState(std::move(pi), std::move(means));
  } catch (const std::invalid_argument &e) {
    throw ConfigError("init", e.what());
  }
}

} // namespace mixlab::harness
