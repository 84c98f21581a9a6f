#pragma once

#include "mixlab/lambda.hpp"

#include <cmath>

namespace mixlab {

struct PerronPair {
  double value = 0.0;
  Vec vector; ///< unit norm, entries of one sign (made positive)
  int iterations = 0;
  double residual = 0.0;
};

/// Dominant eigenpair of an entrywise-positive matrix by power iteration,
/// stopping when ||A v - rho v|| <= tol.
inline PerronPair perron_power_iteration(const Mat &a, double tol = 1e-12,
                                         int max_iter = 1000000) {
  if (a.rows() != a.cols() || a.rows() == 0)
    throw std::invalid_argument("perron: square matrix required");
  PerronPair out;
  Vec v = Vec::Ones(a.rows()).normalized();
  for (int it = 1; it <= max_iter; ++it) {
    const Vec w = a * v;
    const double rho = v.dot(w);
    out.residual = (w - rho * v).norm();
    out.value = rho;
    out.iterations = it;
    if (out.residual <= tol)
      break;
    v = w.normalized();
  }
  if (v.sum() < 0.0)
    v = -v;
  out.vector = v;
  return out;
}

struct LinearizedMap {
  Mat A;             ///< Jacobian of the lambda EM map at lambda = 0
  PerronPair perron;
  double min_row_sum = 0.0;
};

/// Linearisation of the lambda EM map at the origin (Z_1 = 1, Lambda_i = S_i):
/// A_ii = 1, A_ij = (2 mu*_i)^2 pi1* pi2* / S_i for i != j.
inline LinearizedMap linearized_map(const LambdaContext &ctx) {
  if (!ctx.no_independent_pairs())
    throw std::invalid_argument("linearized_map requires sigma_ij != 0 for all pairs");
  const Index d = ctx.dim();
  LinearizedMap out;
  out.A = Mat::Identity(d, d);
  const double p = ctx.pi1() * ctx.pi2();
  for (Index i = 0; i < d; ++i)
    for (Index j = 0; j < d; ++j)
      if (i != j)
        out.A(i, j) = 4.0 * ctx.mu_star()[i] * ctx.mu_star()[i] * p / ctx.S()[i];
  out.perron = perron_power_iteration(out.A);
  out.min_row_sum = out.A.rowwise().sum().minCoeff();
  return out;
}

/// Same linearisation in b coordinates: A_ij = sigma_ij / S_j off the diagonal.
inline Mat linearized_map_b(const LambdaContext &ctx) {
  const Index d = ctx.dim();
  Mat a = Mat::Identity(d, d);
  for (Index i = 0; i < d; ++i)
    for (Index j = 0; j < d; ++j)
      if (i != j)
        a(i, j) = ctx.sigma()(i, j) / ctx.S()[j];
  return a;
}

} // namespace mixlab
