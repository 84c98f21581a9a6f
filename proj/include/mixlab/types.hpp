#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mixlab {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using Index = Eigen::Index;

/// A density evaluated to zero where the truth has mass, or a partition
/// function collapsed to zero. Signals a degenerate iterate, not a bug.
class NumericalDegeneracy : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Invalid configuration; `path` names the offending field (e.g. "init.mu1").
class ConfigError : public std::invalid_argument {
public:
  ConfigError(std::string path, const std::string &what)
      : std::invalid_argument(path + ": " + what), path_(std::move(path)) {}

  [[nodiscard]] const std::string &path() const noexcept { return path_; }

private:
  std::string path_;
};

namespace detail {

inline void require(bool ok, const char *what) {
  if (!ok)
    throw std::invalid_argument(what);
}

inline void require_same_dim(Index a, Index b, const char *what) {
  if (a != b)
    throw std::invalid_argument(std::string("dimension mismatch: ") + what);
}

} // namespace detail
} // namespace mixlab
