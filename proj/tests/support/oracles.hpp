#pragma once

// Independent reference computations. Nothing here calls the library's
// numerical code; everything is a direct sum, a brute-force search or a
// finite difference written from the definitions.

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <random>
#include <vector>

namespace oracle {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// All 2^D binary vectors, coordinate i = bit i of the index.
inline std::vector<Vec> binary_points(int dim) {
  std::vector<Vec> out;
  for (long k = 0; k < (1L << dim); ++k) {
    Vec x(dim);
    for (int i = 0; i < dim; ++i)
      x[i] = static_cast<double>((k >> i) & 1);
    out.push_back(x);
  }
  return out;
}

/// prod_i mu_i^x_i (1 - mu_i)^(1 - x_i) via std::pow, so 0^0 = 1.
inline double bernoulli(const Vec &x, const Vec &mu) {
  double p = 1.0;
  for (int i = 0; i < x.size(); ++i)
    p *= std::pow(mu[i], x[i]) * std::pow(1.0 - mu[i], 1.0 - x[i]);
  return p;
}

inline double mixture(const Vec &x, const Vec &pi, const Mat &means) {
  double p = 0.0;
  for (int c = 0; c < pi.size(); ++c)
    p += pi[c] * bernoulli(x, means.col(c));
  return p;
}

/// Z_1 = sum_x p*(x) B(x | mu1) / B(x | mu2).
inline double one_cluster_z1(const Vec &pi_star, const Mat &means_star, const Vec &mu1,
                             const Vec &mu2) {
  double z = 0.0;
  for (const Vec &x : binary_points(static_cast<int>(mu1.size())))
    z += mixture(x, pi_star, means_star) * bernoulli(x, mu1) / bernoulli(x, mu2);
  return z;
}

/// mu_1 after one one-cluster EM step: E[x gamma_1] / E[gamma_1].
inline Vec one_cluster_mu1_update(const Vec &pi_star, const Mat &means_star, const Vec &mu1,
                                  const Vec &mu2) {
  double z = 0.0;
  Vec acc = Vec::Zero(mu1.size());
  for (const Vec &x : binary_points(static_cast<int>(mu1.size()))) {
    const double w = mixture(x, pi_star, means_star) * bernoulli(x, mu1) / bernoulli(x, mu2);
    z += w;
    acc += w * x;
  }
  return acc / z;
}

/// -sum_x p*(x) log sum_c pi_c B(x | mu_c).
inline double bernoulli_loss(const Vec &pi_star, const Mat &means_star, const Vec &pi,
                             const Mat &means) {
  double loss = 0.0;
  for (const Vec &x : binary_points(static_cast<int>(means.rows()))) {
    const double w = mixture(x, pi_star, means_star);
    if (w > 0.0)
      loss -= w * std::log(mixture(x, pi, means));
  }
  return loss;
}

/// Full EM step with responsibilities f_c / p (no pi factor).
inline void bernoulli_em_step(const Vec &pi_star, const Mat &means_star, const Vec &pi,
                              const Mat &means, Vec &pi_next, Mat &means_next) {
  const int m = static_cast<int>(pi.size());
  Vec z = Vec::Zero(m);
  Mat xz = Mat::Zero(means.rows(), m);
  for (const Vec &x : binary_points(static_cast<int>(means.rows()))) {
    const double w = mixture(x, pi_star, means_star);
    const double p = mixture(x, pi, means);
    for (int c = 0; c < m; ++c) {
      const double g = bernoulli(x, means.col(c)) / p;
      z[c] += w * g;
      xz.col(c) += w * g * x;
    }
  }
  pi_next = pi.cwiseProduct(z);
  pi_next /= pi_next.sum();
  means_next = means;
  for (int c = 0; c < m; ++c)
    means_next.col(c) = xz.col(c) / z[c];
}

/// KL(p* || prod_i p*(x_i)) by direct summation.
inline double kl_to_product(const Vec &pi_star, const Mat &means_star) {
  const Vec xbar = means_star * pi_star;
  double kl = 0.0;
  for (const Vec &x : binary_points(static_cast<int>(means_star.rows()))) {
    const double p = mixture(x, pi_star, means_star);
    if (p > 0.0)
      kl += p * std::log(p / bernoulli(x, xbar));
  }
  return kl;
}

struct McEstimate {
  double mean;
  double standard_error;
};

/// Monte Carlo E[f_1(x) / f_2(x)] for a two-component Gaussian truth with
/// shared covariance `sigma`, densities written out explicitly.
inline McEstimate gaussian_z1_mc(double pi1, const Vec &m1, const Vec &m2, const Mat &sigma,
                                 const Vec &mu1, const Vec &mu2, long n, unsigned long seed) {
  const int d = static_cast<int>(m1.size());
  const Eigen::LLT<Mat> llt(sigma);
  const Mat l = llt.matrixL();
  const Mat prec = llt.solve(Mat::Identity(d, d));
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unif;
  double s = 0.0, s2 = 0.0;
  Vec e(d);
  for (long k = 0; k < n; ++k) {
    for (int i = 0; i < d; ++i)
      e[i] = normal(rng);
    const Vec x = (unif(rng) < pi1 ? m1 : m2) + l * e;
    const Vec a = x - mu1, b = x - mu2;
    const double ratio = std::exp(-0.5 * a.dot(prec * a) + 0.5 * b.dot(prec * b));
    s += ratio;
    s2 += ratio * ratio;
  }
  const double mean = s / static_cast<double>(n);
  const double var = s2 / static_cast<double>(n) - mean * mean;
  return {mean, std::sqrt(std::max(var, 0.0) / static_cast<double>(n))};
}

/// Euclidean projection onto the simplex by trying every support set: on a
/// support S the minimiser is v_S - (sum v_S - 1)/|S|; keep the feasible
/// candidate closest to v.
inline Vec simplex_by_supports(const Vec &v) {
  const int m = static_cast<int>(v.size());
  Vec best;
  double best_d = std::numeric_limits<double>::infinity();
  for (int mask = 1; mask < (1 << m); ++mask) {
    double sum = 0.0;
    int k = 0;
    for (int i = 0; i < m; ++i)
      if (mask >> i & 1) {
        sum += v[i];
        ++k;
      }
    const double shift = (sum - 1.0) / k;
    Vec w = Vec::Zero(m);
    bool ok = true;
    for (int i = 0; i < m; ++i)
      if (mask >> i & 1) {
        w[i] = v[i] - shift;
        ok = ok && w[i] >= 0.0;
      }
    if (!ok)
      continue;
    const double dist = (w - v).squaredNorm();
    if (dist < best_d) {
      best_d = dist;
      best = w;
    }
  }
  return best;
}

/// Projection of a 2-vector onto the simplex by minimising (w - v1)^2 +
/// (1 - w - v2)^2 over a grid on [0, 1], then ternary search near the best cell.
/// The search compares f(a) - f(b) in factored form; subtracting two nearly
/// equal values of f would cap the accuracy near 1e-8.
inline Vec simplex2_by_search(const Vec &v) {
  auto f = [&](double w) { return (w - v[0]) * (w - v[0]) + (1.0 - w - v[1]) * (1.0 - w - v[1]); };
  auto diff = [&](double a, double b) { return (a - b) * (2.0 * (a + b) - 2.0 * v[0] - 2.0 + 2.0 * v[1]); };
  const int n = 100000;
  int best = 0;
  for (int k = 1; k <= n; ++k)
    if (f(static_cast<double>(k) / n) < f(static_cast<double>(best) / n))
      best = k;
  double lo = std::max(0.0, (best - 1.0) / n), hi = std::min(1.0, (best + 1.0) / n);
  for (int it = 0; it < 200; ++it) {
    const double a = lo + (hi - lo) / 3.0, b = hi - (hi - lo) / 3.0;
    if (diff(a, b) <= 0.0)
      hi = b;
    else
      lo = a;
  }
  Vec w(2);
  w[0] = 0.5 * (lo + hi);
  w[1] = 1.0 - w[0];
  return w;
}

/// Central difference of f along every coordinate of x.
inline Vec central_gradient(const std::function<double(const Vec &)> &f, const Vec &x, double h) {
  Vec g(x.size());
  for (int i = 0; i < x.size(); ++i) {
    Vec up = x, dn = x;
    up[i] += h;
    dn[i] -= h;
    g[i] = (f(up) - f(dn)) / (2.0 * h);
  }
  return g;
}

/// Central-difference Jacobian of F: R^n -> R^n.
inline Mat central_jacobian(const std::function<Vec(const Vec &)> &f, const Vec &x, double h) {
  Mat j(x.size(), x.size());
  for (int i = 0; i < x.size(); ++i) {
    Vec up = x, dn = x;
    up[i] += h;
    dn[i] -= h;
    j.col(i) = (f(up) - f(dn)) / (2.0 * h);
  }
  return j;
}

} // namespace oracle
