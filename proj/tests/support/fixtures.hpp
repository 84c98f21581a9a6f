#pragma once

#include "mixlab/mixlab.hpp"

#include <random>

namespace fixtures {

using mixlab::Index;
using mixlab::Mat;
using mixlab::Vec;

inline Vec uniform_vec(std::mt19937_64 &rng, Index d, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  Vec v(d);
  for (Index i = 0; i < d; ++i)
    v[i] = u(rng);
  return v;
}

inline Vec normal_vec(std::mt19937_64 &rng, Index d) {
  std::normal_distribution<double> n;
  Vec v(d);
  for (Index i = 0; i < d; ++i)
    v[i] = n(rng);
  return v;
}

/// Two-component Bernoulli truth with pi1* in (0.2, 0.8), means in (0.1, 0.9)
/// and |mu*_i| >= 0.05 on every coordinate.
inline mixlab::TrueMixture bernoulli_truth(std::mt19937_64 &rng, Index d) {
  std::uniform_real_distribution<double> w(0.2, 0.8);
  const double p1 = w(rng);
  Vec m1 = uniform_vec(rng, d, 0.1, 0.9);
  Vec m2 = uniform_vec(rng, d, 0.1, 0.9);
  for (Index i = 0; i < d; ++i)
    if (std::abs(m1[i] - m2[i]) < 0.1)
      m2[i] = m1[i] < 0.5 ? m1[i] + 0.3 : m1[i] - 0.3;
  return mixlab::TrueMixture::two(mixlab::MixtureFamily::bernoulli(), p1, m1, m2);
}

/// Random SPD matrix with eigenvalues in roughly (0.3, 2).
inline Mat spd(std::mt19937_64 &rng, Index d) {
  const Mat a = Mat::NullaryExpr(d, d, [&] { return std::normal_distribution<double>()(rng); });
  Mat s = 0.3 * a * a.transpose() / static_cast<double>(d) + 0.3 * Mat::Identity(d, d);
  return 0.5 * (s + s.transpose());
}

/// Uniform point of the lambda box, shrunk slightly so mu_1 stays interior.
inline Vec lambda_in_box(std::mt19937_64 &rng, const mixlab::LambdaContext &ctx) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Vec l(ctx.dim());
  for (Index i = 0; i < ctx.dim(); ++i)
    l[i] = ctx.box_lo()[i] + (0.001 + 0.998 * u(rng)) * (ctx.box_hi()[i] - ctx.box_lo()[i]);
  return l;
}

} // namespace fixtures
