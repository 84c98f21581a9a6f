#pragma once

// Bernoulli one-cluster dynamics in lambda coordinates.
//
// With mu_2 = x-bar, S_i = x-bar_i (1 - x-bar_i) and 2 mu* = mu_1* - mu_2*,
// the rescaled separation lambda_i = 2 S_i^{-1} mu*_i b_i turns Z_1 and the
// EM map of mu_1 into low-degree polynomials/rational maps of lambda.

#include "mixlab/mixture.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <string_view>

namespace mixlab {

/// Immutable per-truth context for lambda-space computations.
class LambdaContext {
public:
  explicit LambdaContext(const TrueMixture &truth) : truth_(truth) {
    if (!truth.family().is_bernoulli() || truth.components() != 2)
      throw std::invalid_argument("lambda context requires a two-component bernoulli truth");
    xbar_ = data_mean(truth);
    s_ = xbar_.array() * (1.0 - xbar_.array());
    mu_star_ = truth.mu_star();
    scale_ = 2.0 * mu_star_.array() / s_.array();
    const double p1 = truth.pi1();
    const double p2 = truth.pi2();
    sigma_ = 4.0 * p1 * p2 * mu_star_ * mu_star_.transpose();
    lo_.resize(dim());
    hi_.resize(dim());
    for (Index i = 0; i < dim(); ++i) {
      const double at0 = scale_[i] * (0.0 - xbar_[i]);
      const double at1 = scale_[i] * (1.0 - xbar_[i]);
      lo_[i] = std::min(at0, at1);
      hi_[i] = std::max(at0, at1);
    }
  }

  [[nodiscard]] const TrueMixture &truth() const noexcept { return truth_; }
  [[nodiscard]] Index dim() const noexcept { return truth_.dim(); }
  [[nodiscard]] double pi1() const { return truth_.pi1(); }
  [[nodiscard]] double pi2() const { return truth_.pi2(); }
  [[nodiscard]] const Vec &xbar() const noexcept { return xbar_; }
  /// S_i = var[x_i].
  [[nodiscard]] const Vec &S() const noexcept { return s_; }
  [[nodiscard]] const Vec &mu_star() const noexcept { return mu_star_; }
  /// Feature covariance sigma_ij = 4 pi1* pi2* mu*_i mu*_j.
  [[nodiscard]] const Mat &sigma() const noexcept { return sigma_; }
  /// c_i = 2 mu*_i / S_i, so lambda = c .* b.
  [[nodiscard]] const Vec &scale() const noexcept { return scale_; }
  [[nodiscard]] const Vec &box_lo() const noexcept { return lo_; }
  [[nodiscard]] const Vec &box_hi() const noexcept { return hi_; }

  [[nodiscard]] bool no_independent_pairs() const {
    return (mu_star_.array() != 0.0).all();
  }

  [[nodiscard]] bool in_box(const Vec &lambda, double tol = 1e-12) const {
    if (lambda.size() != dim())
      return false;
    for (Index i = 0; i < dim(); ++i) {
      const double slack = tol * std::max(1.0, std::abs(lo_[i]) + std::abs(hi_[i]));
      if (!(lambda[i] >= lo_[i] - slack && lambda[i] <= hi_[i] + slack))
        return false;
    }
    return true;
  }

  void require_in_box(const Vec &lambda) const {
    detail::require_same_dim(lambda.size(), dim(), "lambda vs context");
    if (!in_box(lambda))
      throw std::invalid_argument("lambda outside its feasible box");
  }

private:
  TrueMixture truth_;
  Vec xbar_, s_, mu_star_, scale_, lo_, hi_;
  Mat sigma_;
};

/// lambda(mu_1) with mu_2 = x-bar.
inline Vec lambda_from_mu1(const Vec &mu1, const LambdaContext &ctx) {
  detail::require_same_dim(mu1.size(), ctx.dim(), "mu1 vs context");
  if (mu1.minCoeff() < 0.0 || mu1.maxCoeff() > 1.0)
    throw std::invalid_argument("lambda_from_mu1: mu1 outside [0, 1]^D");
  return ctx.scale().cwiseProduct(mu1 - ctx.xbar());
}

/// lambda for an arbitrary pair, using b = mu_1 - mu_2 (no box check).
inline Vec lambda_from_b(const Vec &b, const LambdaContext &ctx) {
  detail::require_same_dim(b.size(), ctx.dim(), "b vs context");
  return ctx.scale().cwiseProduct(b);
}

/// Inverse of lambda_from_mu1. Coordinates with mu*_i = 0 carry no
/// information and map to x-bar_i.
inline Vec mu1_from_lambda(const Vec &lambda, const LambdaContext &ctx) {
  ctx.require_in_box(lambda);
  Vec mu1(ctx.dim());
  for (Index i = 0; i < ctx.dim(); ++i) {
    mu1[i] = ctx.scale()[i] != 0.0 ? ctx.xbar()[i] + lambda[i] / ctx.scale()[i] : ctx.xbar()[i];
    mu1[i] = std::clamp(mu1[i], 0.0, 1.0);
  }
  return mu1;
}

namespace detail {

struct BProducts {
  Vec b1; ///< B_1i = prod_{j != i} (1 + pi2* lambda_j)
  Vec b2; ///< B_2i = prod_{j != i} (1 - pi1* lambda_j)
  double full1 = 1.0;
  double full2 = 1.0;
};

inline BProducts b_products(const Vec &lambda, double p1, double p2) {
  const Index d = lambda.size();
  BProducts out;
  out.b1.resize(d);
  out.b2.resize(d);
  // Prefix/suffix products avoid dividing by factors that may vanish.
  Vec f1 = (1.0 + p2 * lambda.array()).matrix();
  Vec f2 = (1.0 - p1 * lambda.array()).matrix();
  Vec pre1(d + 1), pre2(d + 1), suf1(d + 1), suf2(d + 1);
  pre1[0] = pre2[0] = 1.0;
  for (Index i = 0; i < d; ++i) {
    pre1[i + 1] = pre1[i] * f1[i];
    pre2[i + 1] = pre2[i] * f2[i];
  }
  suf1[d] = suf2[d] = 1.0;
  for (Index i = d; i-- > 0;) {
    suf1[i] = suf1[i + 1] * f1[i];
    suf2[i] = suf2[i + 1] * f2[i];
  }
  for (Index i = 0; i < d; ++i) {
    out.b1[i] = pre1[i] * suf1[i + 1];
    out.b2[i] = pre2[i] * suf2[i + 1];
  }
  out.full1 = pre1[d];
  out.full2 = pre2[d];
  return out;
}

inline double z1_unchecked(const Vec &lambda, double p1, double p2) {
  const double a = (1.0 + p2 * lambda.array()).prod();
  const double b = (1.0 - p1 * lambda.array()).prod();
  return p1 * a + p2 * b;
}

} // namespace detail

/// Z_1 = pi1* prod(1 + pi2* lambda_i) + pi2* prod(1 - pi1* lambda_i).
inline double z1_bmm(const Vec &lambda, const LambdaContext &ctx) {
  ctx.require_in_box(lambda);
  return detail::z1_unchecked(lambda, ctx.pi1(), ctx.pi2());
}

/// nabla_i Z_1 = pi1* pi2* (B_1i - B_2i).
inline Vec grad_z1(const Vec &lambda, const LambdaContext &ctx) {
  ctx.require_in_box(lambda);
  const auto bp = detail::b_products(lambda, ctx.pi1(), ctx.pi2());
  return ctx.pi1() * ctx.pi2() * (bp.b1 - bp.b2);
}

/// EM map in lambda coordinates:
///   M(lambda)_i = lambda_i + c_i^2 pi1* pi2* (Lambda_i / Z_1)(B_1i - B_2i),
/// with Lambda_i = mu_1i (1 - mu_1i) at mu_1(lambda).
inline Vec lambda_em_map(const Vec &lambda, const LambdaContext &ctx) {
  const Vec mu1 = mu1_from_lambda(lambda, ctx);
  const double p1 = ctx.pi1();
  const double p2 = ctx.pi2();
  const auto bp = detail::b_products(lambda, p1, p2);
  const double z1 = p1 * bp.full1 + p2 * bp.full2;
  Vec out(ctx.dim());
  for (Index i = 0; i < ctx.dim(); ++i) {
    const double c = ctx.scale()[i];
    const double big_lambda = mu1[i] * (1.0 - mu1[i]);
    out[i] = lambda[i] + c * c * p1 * p2 * (big_lambda / z1) * (bp.b1[i] - bp.b2[i]);
  }
  return out;
}

enum class AscentVerdict { Strict, Equality, Violated };

struct AscentCertificate {
  double dot = 0.0; ///< grad Z_1(lambda)^T (M(lambda) - lambda)
  AscentVerdict verdict = AscentVerdict::Equality;
};

/// EM as an ascent method for Z_1: the inner product is nonnegative and
/// vanishes only at lambda = 0.
inline AscentCertificate ascent_certificate(const Vec &lambda, const LambdaContext &ctx,
                                            double tol = 1e-12) {
  const Vec g = grad_z1(lambda, ctx);
  const Vec step = lambda_em_map(lambda, ctx) - lambda;
  AscentCertificate cert;
  cert.dot = g.dot(step);
  if (cert.dot > 0.0)
    cert.verdict = AscentVerdict::Strict;
  else if (cert.dot >= -tol)
    cert.verdict = AscentVerdict::Equality;
  else
    cert.verdict = AscentVerdict::Violated;
  return cert;
}

enum class RegionClass { PositivePlus, PositiveMinus, Trap, NeutralBoundary, Other };

inline constexpr std::string_view to_string(RegionClass r) noexcept {
  switch (r) {
  case RegionClass::PositivePlus:
    return "positive_plus";
  case RegionClass::PositiveMinus:
    return "positive_minus";
  case RegionClass::Trap:
    return "trap";
  case RegionClass::NeutralBoundary:
    return "neutral";
  case RegionClass::Other:
    return "other";
  }
  return "unknown";
}

inline std::optional<RegionClass> region_from_string(std::string_view s) {
  for (auto r : {RegionClass::PositivePlus, RegionClass::PositiveMinus, RegionClass::Trap,
                 RegionClass::NeutralBoundary, RegionClass::Other})
    if (to_string(r) == s)
      return r;
  return std::nullopt;
}

inline constexpr double kNeutralTolerance = 1e-12;

namespace detail {

inline RegionClass classify_unchecked(const Vec &lambda, double p1, double p2, double tol) {
  if ((lambda.array() > 0.0).all())
    return RegionClass::PositivePlus;
  if ((lambda.array() < 0.0).all())
    return RegionClass::PositiveMinus;
  const double z1 = z1_unchecked(lambda, p1, p2);
  if (z1 < 1.0 - tol)
    return RegionClass::Trap;
  if (std::abs(z1 - 1.0) <= tol)
    return RegionClass::NeutralBoundary;
  return RegionClass::Other;
}

} // namespace detail

inline RegionClass classify(const Vec &lambda, const LambdaContext &ctx,
                            double tol = kNeutralTolerance) {
  ctx.require_in_box(lambda);
  return detail::classify_unchecked(lambda, ctx.pi1(), ctx.pi2(), tol);
}

inline bool is_positive_region(RegionClass r) noexcept {
  return r == RegionClass::PositivePlus || r == RegionClass::PositiveMinus;
}

enum class OrderingVerdict { ConvergesNegative, ConvergesPositive, Bracketed };

inline constexpr std::string_view to_string(OrderingVerdict v) noexcept {
  switch (v) {
  case OrderingVerdict::ConvergesNegative:
    return "converges_negative";
  case OrderingVerdict::ConvergesPositive:
    return "converges_positive";
  case OrderingVerdict::Bracketed:
    return "bracketed";
  }
  return "unknown";
}

struct OrderingReport {
  Index min_index = 0; ///< coordinate holding min lambda
  Index max_index = 0; ///< coordinate holding max lambda
  double lambda_min = 0.0, lambda_max = 0.0;
  double mapped_min = 0.0, mapped_max = 0.0; ///< M(lambda) at those coordinates
  bool sorted = true;                        ///< input was ascending
  OrderingVerdict verdict = OrderingVerdict::Bracketed;
};

/// Watches the extreme coordinates of lambda under one EM map. The smallest
/// coordinate decreasing certifies convergence to the negative region, the
/// largest increasing to the positive one; otherwise the map is bracketed.
inline OrderingReport ordering_monitor(const Vec &lambda, const LambdaContext &ctx) {
  const Vec mapped = lambda_em_map(lambda, ctx);
  OrderingReport rep;
  lambda.minCoeff(&rep.min_index);
  lambda.maxCoeff(&rep.max_index);
  rep.sorted = std::is_sorted(lambda.data(), lambda.data() + lambda.size());
  // Ties: prefer the first coordinate for the min and the last for the max.
  for (Index i = lambda.size(); i-- > 0;)
    if (lambda[i] == lambda[rep.max_index]) {
      rep.max_index = i;
      break;
    }
  rep.lambda_min = lambda[rep.min_index];
  rep.lambda_max = lambda[rep.max_index];
  rep.mapped_min = mapped[rep.min_index];
  rep.mapped_max = mapped[rep.max_index];
  if (rep.mapped_min < rep.lambda_min)
    rep.verdict = OrderingVerdict::ConvergesNegative;
  else if (rep.mapped_max > rep.lambda_max)
    rep.verdict = OrderingVerdict::ConvergesPositive;
  else
    rep.verdict = OrderingVerdict::Bracketed;
  return rep;
}

struct TrapWitness {
  bool found = false;
  Vec lambda_prime;
  double z1_before = 1.0;    ///< Z_1(lambda')
  double z1_after_map = 1.0; ///< Z_1(M(lambda'))
  double radius = 0.0;
  int halvings = 0;
};

inline constexpr int kWitnessMaxHalvings = 40;

/// Search near the boundary ray point lambda_i e_i (lambda_i > 0) for a
/// lambda' with Z_1(lambda') < 1 (a GD trap) but Z_1(M(lambda')) > 1 (EM
/// escapes). Steps against grad Z_1; the radius starts at
/// min(0.1 lambda_i, search_radius) and is halved on failure.
inline TrapWitness find_trap_escape_witness(const LambdaContext &ctx, const Vec &ray_point,
                                            double search_radius) {
  ctx.require_in_box(ray_point);
  if (!ctx.no_independent_pairs())
    throw std::invalid_argument("trap witness requires ||mu*||_0 = D");
  if (!(search_radius > 0.0))
    throw std::invalid_argument("trap witness: search radius must be positive");
  Index axis = -1;
  for (Index j = 0; j < ray_point.size(); ++j) {
    if (ray_point[j] == 0.0)
      continue;
    if (axis >= 0 || ray_point[j] < 0.0)
      throw std::invalid_argument(
          "trap witness: start must lie on a boundary ray lambda_i e_i with lambda_i > 0");
    axis = j;
  }
  if (axis < 0)
    throw std::invalid_argument("trap witness: start must be nonzero");

  const Vec g = grad_z1(ray_point, ctx);
  TrapWitness w;
  if (g.norm() == 0.0)
    return w;
  const Vec dir = -g / g.norm();
  double radius = std::min(0.1 * ray_point[axis], search_radius);
  for (int h = 0; h <= kWitnessMaxHalvings; ++h, radius *= 0.5) {
    const Vec cand = ray_point + radius * dir;
    if (!ctx.in_box(cand, 0.0))
      continue;
    const double before = z1_bmm(cand, ctx);
    if (!(before < 1.0))
      continue;
    const Vec mapped = lambda_em_map(cand, ctx);
    const double after = detail::z1_unchecked(mapped, ctx.pi1(), ctx.pi2());
    if (after > 1.0) {
      w.found = true;
      w.lambda_prime = cand;
      w.z1_before = before;
      w.z1_after_map = after;
      w.radius = radius;
      w.halvings = h;
      return w;
    }
  }
  return w;
}

inline TrapWitness find_trap_escape_witness(const LambdaContext &ctx, Index axis, double lambda_i,
                                            double search_radius) {
  if (axis < 0 || axis >= ctx.dim())
    throw std::invalid_argument("trap witness: axis out of range");
  if (!(lambda_i > 0.0))
    throw std::invalid_argument("trap witness: lambda_i must be positive");
  Vec start = Vec::Zero(ctx.dim());
  start[axis] = lambda_i;
  return find_trap_escape_witness(ctx, start, search_radius);
}

} // namespace mixlab
