#pragma once

#include "mixlab/family.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace mixlab {

/// How responsibilities are formed.
///
/// Full uses gamma_c = f_c / p. OneClusterApprox is the pi_1 -> 0 limit of a
/// two-component model: gamma_1 = f_1 / f_2 and gamma_2 = 1.
enum class EmMode { Full, OneClusterApprox };

inline constexpr std::string_view to_string(EmMode m) noexcept {
  return m == EmMode::Full ? "full" : "one_cluster";
}

/// Current iterate: mixing weights on the simplex and one mean per column.
class ModelState {
public:
  ModelState() = default;

  /// `means` is D x m. `pi` must lie on the simplex within 1e-9; it is
  /// re-normalised so the weights sum to one (exactly, for m = 2).
  ModelState(Vec pi, Mat means) : pi_(std::move(pi)), means_(std::move(means)) {
    if (pi_.size() < 1 || pi_.size() != means_.cols())
      throw std::invalid_argument("state: pi size must equal the number of mean columns");
    if (means_.rows() < 1)
      throw std::invalid_argument("state: dimension must be positive");
    if (!pi_.allFinite() || !means_.allFinite())
      throw std::invalid_argument("state: parameters must be finite");
    if (pi_.minCoeff() < 0.0)
      throw std::invalid_argument("state: pi must be nonnegative");
    if (std::abs(pi_.sum() - 1.0) > 1e-9)
      throw std::invalid_argument("state: pi must sum to 1");
    normalize_pi();
  }

  static ModelState two(double pi1, const Vec &mu1, const Vec &mu2) {
    detail::require_same_dim(mu1.size(), mu2.size(), "mu1 vs mu2");
    Mat means(mu1.size(), 2);
    means.col(0) = mu1;
    means.col(1) = mu2;
    Vec pi(2);
    pi << pi1, 1.0 - pi1;
    return ModelState(std::move(pi), std::move(means));
  }

  [[nodiscard]] Index components() const noexcept { return pi_.size(); }
  [[nodiscard]] Index dim() const noexcept { return means_.rows(); }
  [[nodiscard]] const Vec &pi() const noexcept { return pi_; }
  [[nodiscard]] const Mat &means() const noexcept { return means_; }
  [[nodiscard]] Vec mu(Index c) const { return means_.col(c); }
  [[nodiscard]] Vec mu1() const { return means_.col(0); }
  [[nodiscard]] Vec mu2() const { return means_.col(1); }
  [[nodiscard]] double pi1() const { return pi_[0]; }

  /// b := mu_1 - mu_2.
  [[nodiscard]] Vec b() const {
    require_two();
    return means_.col(0) - means_.col(1);
  }

  void require_two() const {
    if (components() != 2)
      throw std::invalid_argument("operation requires a two-component mixture");
  }

  friend bool operator==(const ModelState &a, const ModelState &b) {
    return a.pi_.size() == b.pi_.size() && a.means_.rows() == b.means_.rows() &&
           a.pi_ == b.pi_ && a.means_ == b.means_;
  }

private:
  void normalize_pi() {
    if (pi_.size() == 2) {
      pi_[1] = 1.0 - pi_[0];
      return;
    }
    pi_ /= pi_.sum();
  }

  Vec pi_;
  Mat means_;
};

/// Throws unless `state` is a legal iterate of `family`.
inline void check_state(const MixtureFamily &family, const ModelState &state) {
  if (auto d = family.fixed_dim(); d && *d != state.dim())
    throw std::invalid_argument("state dimension does not match sigma");
  if (family.is_bernoulli() &&
      (state.means().minCoeff() < 0.0 || state.means().maxCoeff() > 1.0))
    throw std::invalid_argument("bernoulli means must lie in [0, 1]");
}

/// Ground-truth mixture p*. Weights lie strictly inside (0, 1); Bernoulli
/// means strictly inside (0, 1)^D.
class TrueMixture {
public:
  TrueMixture(MixtureFamily family, ModelState params)
      : family_(std::move(family)), params_(std::move(params)) {
    if (params_.pi().minCoeff() <= 0.0 || params_.pi().maxCoeff() >= 1.0)
      throw std::invalid_argument("true mixture: each pi* must lie in (0, 1)");
    check_state(family_, params_);
    if (family_.is_bernoulli() &&
        (params_.means().minCoeff() <= 0.0 || params_.means().maxCoeff() >= 1.0))
      throw std::invalid_argument("true mixture: bernoulli means must lie in (0, 1)");
  }

  static TrueMixture two(MixtureFamily family, double pi1, const Vec &mu1, const Vec &mu2) {
    return TrueMixture(std::move(family), ModelState::two(pi1, mu1, mu2));
  }

  /// Gaussian canonical frame: means +mu_star and -mu_star.
  static TrueMixture canonical(MixtureFamily family, double pi1, const Vec &mu_star) {
    return two(std::move(family), pi1, mu_star, -mu_star);
  }

  [[nodiscard]] const MixtureFamily &family() const noexcept { return family_; }
  [[nodiscard]] const ModelState &params() const noexcept { return params_; }
  [[nodiscard]] Index dim() const noexcept { return params_.dim(); }
  [[nodiscard]] Index components() const noexcept { return params_.components(); }
  [[nodiscard]] const Vec &pi() const noexcept { return params_.pi(); }
  [[nodiscard]] double pi1() const { return params_.pi()[0]; }
  [[nodiscard]] double pi2() const { return params_.pi()[1]; }
  [[nodiscard]] Vec mean(Index c) const { return params_.mu(c); }

  /// Half-separation mu* with 2 mu* = mu_1* - mu_2*.
  [[nodiscard]] Vec mu_star() const { return 0.5 * params_.b(); }

  [[nodiscard]] Vec midpoint() const {
    params_.require_two();
    return 0.5 * (params_.means().col(0) + params_.means().col(1));
  }

private:
  MixtureFamily family_;
  ModelState params_;
};

/// x-bar = sum_c pi_c* mu_c*.
inline Vec data_mean(const TrueMixture &truth) { return truth.params().means() * truth.pi(); }

/// Recentre a Gaussian truth so that the component means are +/- mu*.
inline TrueMixture canonicalize(const TrueMixture &truth) {
  if (!truth.family().is_gaussian())
    throw std::invalid_argument("canonicalize: gaussian families only");
  const Vec m = truth.midpoint();
  return TrueMixture::two(truth.family(), truth.pi1(), truth.mean(0) - m, truth.mean(1) - m);
}

inline bool is_canonical(const TrueMixture &truth, double tol = 0.0) {
  return truth.components() == 2 && truth.midpoint().cwiseAbs().maxCoeff() <= tol;
}

namespace detail {

/// Per-state cache for fast log f(x | mu_c) over many x.
class PreparedComponents {
public:
  PreparedComponents(const MixtureFamily &family, const Mat &means)
      : family_(&family), means_(means) {
    if (family.is_bernoulli()) {
      log_mu_ = means.unaryExpr([](double m) {
        return m > 0.0 ? std::log(m) : -std::numeric_limits<double>::infinity();
      });
      log_one_minus_ = means.unaryExpr([](double m) {
        return m < 1.0 ? std::log1p(-m) : -std::numeric_limits<double>::infinity();
      });
    }
  }

  [[nodiscard]] double log_f(const Vec &x, Index c) const {
    if (!family_->is_bernoulli())
      return family_->log_density(x, means_.col(c));
    double acc = 0.0;
    for (Index i = 0; i < x.size(); ++i)
      acc += x[i] != 0.0 ? log_mu_(i, c) : log_one_minus_(i, c);
    return acc;
  }

  /// log B(x_i | mu_ci) for a single coordinate.
  [[nodiscard]] double log_term(double xi, Index i, Index c) const {
    return xi != 0.0 ? log_mu_(i, c) : log_one_minus_(i, c);
  }

private:
  const MixtureFamily *family_;
  Mat means_;
  Mat log_mu_;
  Mat log_one_minus_;
};

inline double log_sum_exp(const Vec &a) {
  const double m = a.maxCoeff();
  if (m == -std::numeric_limits<double>::infinity())
    return m;
  return m + std::log((a.array() - m).exp().sum());
}

} // namespace detail

/// log p(x) = log sum_c pi_c f(x | mu_c). Components with pi_c = 0 contribute nothing.
inline double mixture_log_density(const MixtureFamily &family, const ModelState &state,
                                  const Vec &x) {
  detail::require_same_dim(x.size(), state.dim(), "x vs state");
  Vec terms(state.components());
  for (Index c = 0; c < state.components(); ++c) {
    terms[c] = state.pi()[c] > 0.0 ? std::log(state.pi()[c]) + family.log_density(x, state.mu(c))
                                   : -std::numeric_limits<double>::infinity();
  }
  return detail::log_sum_exp(terms);
}

inline double mixture_density(const MixtureFamily &family, const ModelState &state, const Vec &x) {
  return std::exp(mixture_log_density(family, state, x));
}

inline double mixture_density(const TrueMixture &truth, const Vec &x) {
  return mixture_density(truth.family(), truth.params(), x);
}

/// gamma_c(x) = f(x | mu_c) / p(x). Note the missing pi_c factor, so that
/// sum_c pi_c gamma_c = 1 in Full mode.
inline Vec responsibilities(const MixtureFamily &family, const ModelState &state, const Vec &x,
                            EmMode mode = EmMode::Full) {
  detail::require_same_dim(x.size(), state.dim(), "x vs state");
  const Index m = state.components();
  Vec logf(m);
  for (Index c = 0; c < m; ++c)
    logf[c] = family.log_density(x, state.mu(c));

  double log_norm = 0.0;
  if (mode == EmMode::OneClusterApprox) {
    state.require_two();
    log_norm = logf[1];
  } else {
    log_norm = mixture_log_density(family, state, x);
  }
  if (log_norm == -std::numeric_limits<double>::infinity())
    throw NumericalDegeneracy("responsibilities: model density is zero at x");

  Vec gamma = (logf.array() - log_norm).exp().matrix();
  if (mode == EmMode::OneClusterApprox)
    gamma[1] = 1.0;
  return gamma;
}

} // namespace mixlab
