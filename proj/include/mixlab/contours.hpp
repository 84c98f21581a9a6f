#pragma once

// Two-feature Bernoulli geometry in b-space: the EM update of b, the two
// zero contours b_1' = 0 and b_2' = 0, and the checks that they meet only at
// the origin.

#include "mixlab/lambda.hpp"

#include <cmath>
#include <vector>

namespace mixlab {

/// Flip feature `axis` (x_i -> 1 - x_i) in every true component.
inline TrueMixture relabel_feature(const TrueMixture &truth, Index axis) {
  if (!truth.family().is_bernoulli())
    throw std::invalid_argument("relabel_feature: bernoulli truth required");
  if (axis < 0 || axis >= truth.dim())
    throw std::invalid_argument("relabel_feature: axis out of range");
  Mat means = truth.params().means();
  means.row(axis) = (1.0 - means.row(axis).array()).matrix();
  return TrueMixture(truth.family(), ModelState(truth.pi(), std::move(means)));
}

/// Context with sigma_12 > 0, relabelling feature 2 when needed.
struct OrientedContext {
  LambdaContext ctx;
  bool relabeled = false;
};

inline OrientedContext orient_d2(const LambdaContext &ctx) {
  if (ctx.dim() != 2)
    throw std::invalid_argument("two-feature machinery requires D = 2");
  const double s12 = ctx.sigma()(0, 1);
  if (s12 == 0.0)
    throw std::invalid_argument("sigma_12 = 0: independent pair excluded");
  if (s12 > 0.0)
    return {ctx, false};
  return {LambdaContext(relabel_feature(ctx.truth(), 1)), true};
}

/// Normalised covariance sigma = sigma_12 / (S_1 S_2).
inline double normalized_covariance(const LambdaContext &ctx) {
  return ctx.sigma()(0, 1) / (ctx.S()[0] * ctx.S()[1]);
}

/// EM update of b for D = 2 at mu_2 = x-bar:
///   b_1 <- b_1 + Z^{-1} sigma Lambda_1 b_2,  b_2 <- b_2 + Z^{-1} sigma Lambda_2 b_1.
inline Vec b_em_map_d2(const Vec &b, const LambdaContext &ctx) {
  if (ctx.dim() != 2)
    throw std::invalid_argument("b_em_map_d2 requires D = 2");
  detail::require_same_dim(b.size(), 2, "b");
  const Vec mu1 = ctx.xbar() + b;
  if (mu1.minCoeff() < 0.0 || mu1.maxCoeff() > 1.0)
    throw std::invalid_argument("b_em_map_d2: mu1 = x-bar + b outside [0, 1]^2");
  const double sigma = normalized_covariance(ctx);
  const double z = 1.0 + ctx.pi1() * ctx.pi2() * ctx.scale()[0] * ctx.scale()[1] * b[0] * b[1];
  const double l1 = mu1[0] * (1.0 - mu1[0]);
  const double l2 = mu1[1] * (1.0 - mu1[1]);
  Vec out(2);
  out << b[0] + sigma * l1 * b[1] / z, b[1] + sigma * l2 * b[0] / z;
  return out;
}

struct ContourReport {
  bool relabeled = false;
  double sigma = 0.0; ///< normalised covariance (after orientation)
  double f = 0.0;     ///< f(b_1): contour b_1' = 0
  double g = 0.0;     ///< g(b_1): contour b_2' = 0
  double f_slope0 = 0.0;
  double g_slope0 = 0.0;
  double slope_ratio = 0.0;   ///< |g'(0)| / |f'(0)| = sigma^2 S_1 S_2
  double sigma_sq_s1s2 = 0.0; ///< must be < 1
  double b1_lo = 0.0, b1_hi = 0.0;
  /// Linear crossing function h(b) whose root would be a second intersection;
  /// negative at both ends means none exists.
  double h_lo = 0.0, h_hi = 0.0;
  std::vector<double> roots; ///< isolated zeros of f - g over the grid
  bool unique_root_at_zero = false;
};

namespace detail {

struct Contours {
  double sigma, x1, x2, s1, s2;

  [[nodiscard]] double f(double b1) const {
    return -b1 / (sigma * (1.0 - 2.0 * x1) * b1 + sigma * s1);
  }
  [[nodiscard]] double g(double b1) const {
    return -sigma * s2 * b1 / (1.0 + sigma * (1.0 - 2.0 * x2) * b1);
  }
  [[nodiscard]] double h(double b1) const {
    return sigma * sigma * s2 * ((1.0 - 2.0 * x1) * b1 + s1) - sigma * (1.0 - 2.0 * x2) * b1 - 1.0;
  }
};

} // namespace detail

/// Contour geometry at b_1 plus global intersection checks over a grid of
/// `grid` points on the feasible interval [-x-bar_1, 1 - x-bar_1].
inline ContourReport contours_d2(double b1, const LambdaContext &ctx, int grid = 10000,
                                 double root_tol = 1e-9) {
  const OrientedContext oc = orient_d2(ctx);
  const LambdaContext &c = oc.ctx;
  const detail::Contours k{normalized_covariance(c), c.xbar()[0], c.xbar()[1], c.S()[0], c.S()[1]};

  ContourReport rep;
  rep.relabeled = oc.relabeled;
  rep.sigma = k.sigma;
  rep.b1_lo = -k.x1;
  rep.b1_hi = 1.0 - k.x1;
  if (b1 < rep.b1_lo || b1 > rep.b1_hi)
    throw std::invalid_argument("contours_d2: b1 outside the feasible interval");
  rep.f = k.f(b1);
  rep.g = k.g(b1);
  rep.f_slope0 = -1.0 / (k.sigma * k.s1);
  rep.g_slope0 = -k.sigma * k.s2;
  rep.slope_ratio = std::abs(rep.g_slope0) / std::abs(rep.f_slope0);
  rep.sigma_sq_s1s2 = k.sigma * k.sigma * k.s1 * k.s2;
  rep.h_lo = k.h(rep.b1_lo);
  rep.h_hi = k.h(rep.b1_hi);

  auto diff = [&](double b) { return k.f(b) - k.g(b); };
  const int n = std::max(grid, 3);
  double prev_b = rep.b1_lo;
  double prev_d = diff(prev_b);
  auto push_root = [&](double r) {
    if (rep.roots.empty() || std::abs(rep.roots.back() - r) > root_tol)
      rep.roots.push_back(r);
  };
  if (prev_d == 0.0)
    push_root(prev_b);
  for (int j = 1; j < n; ++j) {
    const double b = rep.b1_lo + (rep.b1_hi - rep.b1_lo) * j / (n - 1);
    const double d = diff(b);
    if (d == 0.0) {
      push_root(b);
    } else if (std::isfinite(d) && std::isfinite(prev_d) && prev_d != 0.0 &&
               std::signbit(d) != std::signbit(prev_d)) {
      double lo = prev_b, hi = b, dlo = prev_d;
      while (hi - lo > root_tol) {
        const double mid = 0.5 * (lo + hi);
        const double dm = diff(mid);
        if (dm == 0.0) {
          lo = hi = mid;
          break;
        }
        if (std::signbit(dm) == std::signbit(dlo)) {
          lo = mid;
          dlo = dm;
        } else {
          hi = mid;
        }
      }
      const double r = 0.5 * (lo + hi);
      // A sign change across a pole is not a root.
      if (std::abs(diff(r)) < 1e-6)
        push_root(r);
    }
    prev_b = b;
    prev_d = d;
  }
  rep.unique_root_at_zero = rep.roots.size() == 1 && std::abs(rep.roots.front()) <= root_tol &&
                            rep.h_lo < 0.0 && rep.h_hi < 0.0;
  return rep;
}

} // namespace mixlab
