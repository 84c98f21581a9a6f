#pragma once

// Gaussian one-cluster analysis: closed-form Z_1, the closed-form EM update
// of mu_1 at mu_2 = x-bar, and the rotation diagnostic.

#include "mixlab/one_cluster.hpp"

#include <cmath>
#include <vector>

namespace mixlab {

namespace detail {

inline void require_gaussian_two(const TrueMixture &truth) {
  if (!truth.family().is_gaussian() || truth.components() != 2)
    throw std::invalid_argument("requires a two-component gaussian truth");
}

} // namespace detail

/// Z_1 at mu_2 = x-bar as a function of b = mu_1 - mu_2:
///   Z_1 = pi1* exp(2 pi2* <b, mu*>) + pi2* exp(-2 pi1* <b, mu*>),
/// with <.,.> the Sigma^{-1} inner product for a fixed-covariance family.
/// Frame-independent: mu* is half the difference of the true means.
inline double z1_gmm(const Vec &b, const TrueMixture &truth) {
  detail::require_gaussian_two(truth);
  detail::require_same_dim(b.size(), truth.dim(), "b vs truth");
  const double s = truth.family().inner(b, truth.mu_star());
  const double p1 = truth.pi1();
  const double p2 = truth.pi2();
  return p1 * std::exp(2.0 * p2 * s) + p2 * std::exp(-2.0 * p1 * s);
}

struct GmmClosedStep {
  Vec mu1_next;
  double z1 = 1.0;
  double pi1_prime = 0.0; ///< pi1* exp(2 pi2* <b,mu*>) / Z_1
  double pi2_prime = 0.0; ///< pi2* exp(-2 pi1* <b,mu*>) / Z_1
  double b_dot_mu_star = 0.0;
  double b_dot_mu_star_next = 0.0;
};

/// One EM update of mu_1 in the one-cluster regime with mu_2 = x-bar:
///   mu_1 <- (pi1' - pi2') mu* + b   (canonical frame),
/// returned in the frame of `truth`.
inline GmmClosedStep em_closed_gmm(const Vec &mu1, const TrueMixture &truth) {
  detail::require_gaussian_two(truth);
  detail::require_same_dim(mu1.size(), truth.dim(), "mu1 vs truth");
  const Vec xbar = data_mean(truth);
  const Vec b = mu1 - xbar;
  const Vec mu_star = truth.mu_star();
  const double s = truth.family().inner(b, mu_star);
  const double p1 = truth.pi1();
  const double p2 = truth.pi2();

  GmmClosedStep out;
  // Normalise in log space so large separations do not overflow.
  const double a1 = std::log(p1) + 2.0 * p2 * s;
  const double a2 = std::log(p2) - 2.0 * p1 * s;
  const double m = std::max(a1, a2);
  const double log_z = m + std::log(std::exp(a1 - m) + std::exp(a2 - m));
  out.z1 = std::exp(log_z);
  out.pi1_prime = std::exp(a1 - log_z);
  out.pi2_prime = std::exp(a2 - log_z);
  out.b_dot_mu_star = s;
  // In a general frame the tilted mean is pi1' mu1* + pi2' mu2* + b.
  out.mu1_next = out.pi1_prime * truth.mean(0) + out.pi2_prime * truth.mean(1) + b;
  out.b_dot_mu_star_next = truth.family().inner(out.mu1_next - xbar, mu_star);
  return out;
}

struct RotationReport {
  std::vector<double> cosines;
  bool monotone = true;    ///< non-decreasing within slack
  bool equality_only_colinear = true;
  std::size_t equality_steps = 0;
};

/// cos angle(mu_1(t), target) along a path, with `target` = mu* (or -mu* when
/// b^T mu* < 0). Monotone if every increment is >= -slack; a step with
/// |increment| <= slack must start from an iterate colinear with the target.
inline RotationReport rotation_cosine(const std::vector<Vec> &mu1_path, const Vec &target,
                                      double slack = 1e-12, double colinear_tol = 1e-6) {
  if (target.norm() == 0.0)
    throw std::invalid_argument("rotation_cosine: target direction is zero");
  RotationReport rep;
  rep.cosines.reserve(mu1_path.size());
  std::vector<bool> colinear;
  for (const Vec &mu : mu1_path) {
    detail::require_same_dim(mu.size(), target.size(), "mu1 vs target");
    const double n = mu.norm();
    if (n == 0.0)
      throw std::invalid_argument("rotation_cosine: zero mu1, cosine undefined");
    const double cos = mu.dot(target) / (n * target.norm());
    rep.cosines.push_back(cos);
    const Vec u = target.normalized();
    colinear.push_back((mu - mu.dot(u) * u).norm() <= colinear_tol * n);
  }
  for (std::size_t t = 1; t < rep.cosines.size(); ++t) {
    const double inc = rep.cosines[t] - rep.cosines[t - 1];
    if (inc < -slack)
      rep.monotone = false;
    if (std::abs(inc) <= slack) {
      ++rep.equality_steps;
      if (!colinear[t - 1])
        rep.equality_only_colinear = false;
    }
  }
  return rep;
}

/// Closed-form orbit mu_1(0), ..., mu_1(steps).
inline std::vector<Vec> gmm_closed_orbit(const Vec &mu1, const TrueMixture &truth,
                                         std::size_t steps) {
  std::vector<Vec> path{mu1};
  for (std::size_t t = 0; t < steps; ++t)
    path.push_back(em_closed_gmm(path.back(), truth).mu1_next);
  return path;
}

} // namespace mixlab
