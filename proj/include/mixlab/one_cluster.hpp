#pragma once

// Closed forms for the one-cluster regime of a two-component model
// (gamma_1 = f_1 / f_2, gamma_2 = 1), valid for any mu_2 in the parameter
// space, not only mu_2 = x-bar.

#include "mixlab/mixture.hpp"

#include <cmath>
#include <limits>
#include <numbers>

namespace mixlab {

struct OneClusterMoments {
  double z1 = 1.0; ///< E[gamma_1]
  Vec q1_mean;     ///< E_{q_1}[x] = E[x gamma_1] / Z_1
};

namespace detail {

inline void require_two_component_truth(const TrueMixture &truth) {
  if (truth.components() != 2)
    throw std::invalid_argument("one-cluster closed forms need a two-component truth");
}

/// r_ci = mu*_ci mu1_i / mu2_i + (1 - mu*_ci)(1 - mu1_i)/(1 - mu2_i): the
/// per-coordinate normaliser of the tilted Bernoulli factor.
inline Mat bernoulli_ratio_factors(const TrueMixture &truth, const Vec &mu1, const Vec &mu2) {
  const Index dim = truth.dim();
  Mat r(dim, truth.components());
  for (Index c = 0; c < truth.components(); ++c) {
    for (Index i = 0; i < dim; ++i) {
      const double ms = truth.params().means()(i, c);
      double v = 0.0;
      if (ms > 0.0 && mu1[i] > 0.0) {
        if (mu2[i] <= 0.0)
          throw NumericalDegeneracy("one-cluster: mu2 on the boundary where the truth has mass");
        v += ms * mu1[i] / mu2[i];
      }
      if (ms < 1.0 && mu1[i] < 1.0) {
        if (mu2[i] >= 1.0)
          throw NumericalDegeneracy("one-cluster: mu2 on the boundary where the truth has mass");
        v += (1.0 - ms) * (1.0 - mu1[i]) / (1.0 - mu2[i]);
      }
      r(i, c) = v;
    }
  }
  return r;
}

inline double product_except(const Vec &v, Index skip) {
  double p = 1.0;
  for (Index j = 0; j < v.size(); ++j)
    if (j != skip)
      p *= v[j];
  return p;
}

/// log w_c = log pi*_c + <b, mu*_c - mu2>_Sigma for the Gaussian family.
inline Vec gaussian_log_tilt(const TrueMixture &truth, const Vec &mu1, const Vec &mu2) {
  const Vec b = mu1 - mu2;
  Vec logw(truth.components());
  for (Index c = 0; c < truth.components(); ++c)
    logw[c] = std::log(truth.pi()[c]) + truth.family().inner(b, truth.mean(c) - mu2);
  return logw;
}

} // namespace detail

/// Z_1 and the tilted mean E_{q_1}[x] in closed form.
inline OneClusterMoments one_cluster_moments(const TrueMixture &truth, const Vec &mu1,
                                             const Vec &mu2) {
  detail::require_two_component_truth(truth);
  detail::require_same_dim(mu1.size(), truth.dim(), "mu1 vs truth");
  detail::require_same_dim(mu2.size(), truth.dim(), "mu2 vs truth");
  OneClusterMoments out;
  const Index dim = truth.dim();

  if (truth.family().is_gaussian()) {
    // q_1 is a mixture of the true components shifted by b, with weights
    // pi*_c exp(<b, mu*_c - mu2>).
    const Vec logw = detail::gaussian_log_tilt(truth, mu1, mu2);
    const double log_z = detail::log_sum_exp(logw);
    out.z1 = std::exp(log_z);
    const Vec b = mu1 - mu2;
    out.q1_mean = Vec::Zero(dim);
    for (Index c = 0; c < truth.components(); ++c)
      out.q1_mean += std::exp(logw[c] - log_z) * (truth.mean(c) + b);
    return out;
  }

  const Mat r = detail::bernoulli_ratio_factors(truth, mu1, mu2);
  out.z1 = 0.0;
  for (Index c = 0; c < truth.components(); ++c)
    out.z1 += truth.pi()[c] * r.col(c).prod();
  if (!(out.z1 > 0.0))
    throw NumericalDegeneracy("one-cluster: Z1 collapsed to zero");
  out.q1_mean.resize(dim);
  for (Index i = 0; i < dim; ++i) {
    if (mu1[i] == 0.0) {
      out.q1_mean[i] = 0.0;
      continue;
    }
    double acc = 0.0;
    for (Index c = 0; c < truth.components(); ++c)
      acc += truth.pi()[c] * truth.params().means()(i, c) * detail::product_except(r.col(c), i);
    out.q1_mean[i] = std::clamp(mu1[i] / mu2[i] * acc / out.z1, 0.0, 1.0);
  }
  return out;
}

/// Gradient of the loss in the one-cluster regime, w.r.t. (mu_1, mu_2),
/// scaled by the mixing weights (pi_1, pi_2). Bernoulli uses the form that
/// never divides by mu_1 (1 - mu_1).
struct OneClusterMeanGradient {
  Vec d_mu1;
  Vec d_mu2;
};

inline OneClusterMeanGradient one_cluster_mean_gradient(const TrueMixture &truth, double pi1,
                                                        double pi2, const Vec &mu1,
                                                        const Vec &mu2) {
  detail::require_two_component_truth(truth);
  const Index dim = truth.dim();
  const Vec xbar = data_mean(truth);
  OneClusterMeanGradient g;
  if (truth.family().is_gaussian()) {
    const OneClusterMoments mom = one_cluster_moments(truth, mu1, mu2);
    g.d_mu1 = -pi1 * mom.z1 * truth.family().precision_times(mom.q1_mean - mu1);
    g.d_mu2 = -pi2 * truth.family().precision_times(xbar - mu2);
    return g;
  }

  const Mat r = detail::bernoulli_ratio_factors(truth, mu1, mu2);
  g.d_mu1.resize(dim);
  g.d_mu2.resize(dim);
  for (Index j = 0; j < dim; ++j) {
    double pos = 0.0;
    double neg = 0.0;
    for (Index c = 0; c < truth.components(); ++c) {
      const double rest = detail::product_except(r.col(c), j);
      const double ms = truth.params().means()(j, c);
      pos += truth.pi()[c] * ms * rest;
      neg += truth.pi()[c] * (1.0 - ms) * rest;
    }
    if ((pos > 0.0 && mu2[j] <= 0.0) || (neg > 0.0 && mu2[j] >= 1.0))
      throw NumericalDegeneracy("one-cluster gradient: mu2 on the boundary");
    const double up = pos > 0.0 ? pos / mu2[j] : 0.0;
    const double down = neg > 0.0 ? neg / (1.0 - mu2[j]) : 0.0;
    g.d_mu1[j] = -pi1 * (up - down);

    if ((xbar[j] > 0.0 && mu2[j] <= 0.0) || (xbar[j] < 1.0 && mu2[j] >= 1.0))
      throw NumericalDegeneracy("one-cluster gradient: mu2 on the boundary");
    g.d_mu2[j] = -pi2 * (xbar[j] / mu2[j] - (1.0 - xbar[j]) / (1.0 - mu2[j]));
  }
  return g;
}

/// Single-cluster cross entropy -E[log f(x | mu_2)].
inline double one_cluster_loss(const TrueMixture &truth, const Vec &mu2) {
  detail::require_two_component_truth(truth);
  detail::require_same_dim(mu2.size(), truth.dim(), "mu2 vs truth");
  const Vec xbar = data_mean(truth);
  const Index dim = truth.dim();
  const auto &fam = truth.family();
  if (fam.is_gaussian()) {
    // E[(x - mu2)^T P (x - mu2)] = tr(P Cov*) + (xbar - mu2)^T P (xbar - mu2),
    // Cov* = Sigma + sum_c pi_c (mu_c - xbar)(mu_c - xbar)^T.
    double quad = static_cast<double>(dim);
    for (Index c = 0; c < truth.components(); ++c) {
      const Vec d = truth.mean(c) - xbar;
      quad += truth.pi()[c] * fam.inner(d, d);
    }
    const Vec e = xbar - mu2;
    quad += fam.inner(e, e);
    const double log_det = fam.has_sigma() ? fam.sigma_log_det() : 0.0;
    return 0.5 * static_cast<double>(dim) * std::log(2.0 * std::numbers::pi) + 0.5 * log_det +
           0.5 * quad;
  }
  double loss = 0.0;
  for (Index i = 0; i < dim; ++i) {
    if (xbar[i] > 0.0)
      loss -= xbar[i] * (mu2[i] > 0.0 ? std::log(mu2[i]) : -std::numeric_limits<double>::infinity());
    if (xbar[i] < 1.0)
      loss -= (1.0 - xbar[i]) *
              (mu2[i] < 1.0 ? std::log1p(-mu2[i]) : -std::numeric_limits<double>::infinity());
  }
  return loss;
}

} // namespace mixlab
