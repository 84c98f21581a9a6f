#pragma once

// One-cluster local minima of the Bernoulli cross entropy and their
// suboptimality gap.

#include "mixlab/pgd.hpp"
#include "mixlab/lambda.hpp"
#include "mixlab/rng.hpp"

#include <cmath>
#include <random>
#include <string>

namespace mixlab {

struct LocalMinCertificate {
  bool certified = false;
  std::size_t checked = 0;
  std::size_t failures = 0;
  double z1 = 1.0;                ///< Z_1 at the certified point
  double base_loss = 0.0;
  double min_delta_loss = 0.0;    ///< smallest loss change seen
  double min_first_order = 0.0;   ///< smallest (1 - Z_1) d pi_1 over d pi_1 > 0
};

inline constexpr double kLocalMinSlack = 1e-10;

/// Probe a one-cluster point (pi_1 = 0, mu_2 = x-bar, lambda(mu_1) a trap)
/// with `n_perturb` random perturbations of norm <= radius and d pi_1 >= 0.
/// Every third probe keeps d pi_1 = 0. Perturbed means are clamped to the box.
inline LocalMinCertificate local_min_certificate(const ModelState &state, const LambdaContext &ctx,
                                                 const ExpectationEngine &engine,
                                                 std::size_t n_perturb, double radius,
                                                 std::uint64_t seed = 0) {
  state.require_two();
  if (engine.kind() != EngineKind::EnumerateBernoulli)
    throw std::invalid_argument("local_min_certificate: exact enumeration engine required");
  detail::require_same_dim(state.dim(), ctx.dim(), "state vs context");
  detail::require_same_dim(engine.dim(), ctx.dim(), "engine vs context");
  if (state.pi()[0] != 0.0)
    throw std::invalid_argument("local_min_certificate: precondition pi_1 = 0 violated");
  if ((state.mu2() - ctx.xbar()).cwiseAbs().maxCoeff() > 1e-12)
    throw std::invalid_argument("local_min_certificate: precondition mu_2 = x-bar violated");
  const Vec lambda = lambda_from_mu1(state.mu1(), ctx);
  const RegionClass region = classify(lambda, ctx);
  if (region != RegionClass::Trap)
    throw std::invalid_argument(std::string("local_min_certificate: precondition Z_1 < 1 "
                                            "violated (region ") +
                                std::string(to_string(region)) + ")");
  if (!(radius > 0.0))
    throw std::invalid_argument("local_min_certificate: radius must be positive");

  LocalMinCertificate cert;
  cert.z1 = z1_bmm(lambda, ctx);
  cert.base_loss = cross_entropy_loss(state, engine);
  cert.min_delta_loss = std::numeric_limits<double>::infinity();
  cert.min_first_order = std::numeric_limits<double>::infinity();

  const Index dim = state.dim();
  Rng rng = make_rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  Vec dir(1 + 2 * dim);
  for (std::size_t k = 0; k < n_perturb; ++k) {
    for (Index i = 0; i < dir.size(); ++i)
      dir[i] = normal(rng);
    dir[0] = k % 3 == 0 ? 0.0 : std::abs(dir[0]);
    const double n = dir.norm();
    if (n == 0.0)
      continue;
    dir *= radius * unif(rng) / n;

    const double dpi = dir[0];
    const Vec mu1 = project_box(state.mu1() + dir.segment(1, dim));
    const Vec mu2 = project_box(state.mu2() + dir.segment(1 + dim, dim));
    const ModelState probe = ModelState::two(dpi, mu1, mu2);
    const double delta = cross_entropy_loss(probe, engine) - cert.base_loss;
    cert.min_delta_loss = std::min(cert.min_delta_loss, delta);
    bool ok = delta >= -kLocalMinSlack;
    if (dpi > 0.0) {
      const ModelState at_mu1 = ModelState::two(0.0, mu1, ctx.xbar());
      const double z1 = partition_functions(at_mu1, engine, EmMode::OneClusterApprox).z1();
      const double first = (1.0 - z1) * dpi;
      cert.min_first_order = std::min(cert.min_first_order, first);
      ok = ok && first > 0.0;
    }
    ++cert.checked;
    if (!ok)
      ++cert.failures;
  }
  cert.certified = cert.failures == 0;
  return cert;
}

/// l_1 - l* = KL(p* || prod_i p*(x_i)), summed exactly over all 2^D points.
inline double kl_gap(const TrueMixture &truth, const ExpectationEngine &engine) {
  if (engine.kind() != EngineKind::EnumerateBernoulli)
    throw std::invalid_argument("kl_gap: exact enumeration engine required");
  detail::require_same_dim(truth.dim(), engine.dim(), "truth vs engine");
  const Vec xbar = data_mean(truth);
  const Vec log_on = xbar.array().log().matrix();
  const Vec log_off = (-xbar.array()).log1p().matrix();
  const Vec &logw = engine.log_weights();
  double gap = 0.0;
  engine.for_each([&](const Vec &x, double w, Index k) {
    if (w == 0.0)
      return;
    double log_prod = 0.0;
    for (Index i = 0; i < x.size(); ++i)
      log_prod += x[i] != 0.0 ? log_on[i] : log_off[i];
    gap += w * (logw[k] - log_prod);
  });
  return gap;
}

} // namespace mixlab
