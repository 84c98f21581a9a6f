#pragma once

// Post-hoc analyses over a trajectory CSV written by run_scenario.

#include "mixlab/harness/run.hpp"

#include <cmath>
#include <map>
#include <string>

namespace mixlab::harness {

inline constexpr double kAnalyzeSlack = 1e-12;

inline json analyze_escape_time(const CsvTable &table, double threshold) {
  const auto pi1 = table.numbers("pi1");
  const auto t = escape_time(pi1, threshold);
  return {{"mode", "escape-time"},
          {"threshold", threshold},
          {"steps", pi1.size()},
          {"escape_time", t ? json(*t) : json(nullptr)}};
}

/// Cosine to mu* must be non-decreasing; when the orbit starts on the -mu*
/// side the cosine to -mu* is used instead.
inline json analyze_rotation(const CsvTable &table) {
  std::vector<double> cos;
  for (double c : table.numbers("cos_mu1_mustar"))
    if (!std::isnan(c))
      cos.push_back(c);
  if (cos.empty())
    throw ConfigError("--mode", "rotation needs a gaussian trajectory (cos_mu1_mustar column)");
  const bool flip = cos.front() < 0.0;
  if (flip)
    for (double &c : cos)
      c = -c;
  std::size_t violations = 0;
  for (std::size_t k = 1; k < cos.size(); ++k)
    violations += cos[k] < cos[k - 1] - kAnalyzeSlack;
  return {{"mode", "rotation"},
          {"target", flip ? "-mu_star" : "mu_star"},
          {"steps", cos.size()},
          {"first_cosine", cos.front()},
          {"last_cosine", cos.back()},
          {"violations", violations},
          {"monotone", violations == 0}};
}

inline json analyze_region(const CsvTable &table) {
  const auto regions = table.strings("region");
  std::map<std::string, std::size_t> counts;
  std::size_t transitions = 0;
  for (std::size_t k = 0; k < regions.size(); ++k) {
    ++counts[regions[k].empty() ? "none" : regions[k]];
    if (k > 0 && regions[k] != regions[k - 1])
      ++transitions;
  }
  return {{"mode", "region"},
          {"steps", regions.size()},
          {"counts", counts},
          {"transitions", transitions},
          {"first", regions.empty() ? json(nullptr) : json(regions.front())},
          {"last", regions.empty() ? json(nullptr) : json(regions.back())}};
}

/// Z_1 should not decrease along a one-cluster EM orbit.
inline json analyze_ascent(const CsvTable &table) {
  const auto z1 = table.numbers("Z1");
  std::size_t violations = 0;
  for (std::size_t k = 1; k < z1.size(); ++k)
    violations += z1[k] < z1[k - 1] - kAnalyzeSlack;
  return {{"mode", "ascent"},
          {"steps", z1.size()},
          {"z1_first", z1.empty() ? json(nullptr) : json(z1.front())},
          {"z1_last", z1.empty() ? json(nullptr) : json(z1.back())},
          {"violations", violations},
          {"ascending", violations == 0}};
}

inline json analyze(const CsvTable &table, const std::string &mode, double threshold) {
  if (mode == "escape-time")
    return analyze_escape_time(table, threshold);
  if (mode == "rotation")
    return analyze_rotation(table);
  if (mode == "region")
    return analyze_region(table);
  if (mode == "ascent")
    return analyze_ascent(table);
  throw ConfigError("--mode", "unknown mode '" + mode + "' (escape-time, rotation, region, ascent)");
}

} // namespace mixlab::harness
