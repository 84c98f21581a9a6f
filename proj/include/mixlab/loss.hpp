#pragma once

#include "mixlab/expectation.hpp"
#include "mixlab/one_cluster.hpp"

#include <cmath>
#include <limits>

namespace mixlab {

/// Cross entropy l = -E[log p(x)] over the engine's distribution.
///
/// Exact for enumeration, empirical for a sampled engine. Returns +inf when
/// p(x) = 0 at a point carrying weight (a degenerate iterate). A closed-form
/// engine returns the single-cluster loss -E[log f(x | mu_2)], the pi_1 -> 0
/// limit.
inline double cross_entropy_loss(const ModelState &state, const ExpectationEngine &engine) {
  const auto &family = engine.truth().family();
  detail::require_same_dim(state.dim(), engine.dim(), "state vs engine");
  check_state(family, state);
  if (!engine.has_support()) {
    state.require_two();
    return one_cluster_loss(engine.truth(), state.mu2());
  }

  const detail::PreparedComponents prep(family, state.means());
  const Index m = state.components();
  Vec log_pi(m);
  for (Index c = 0; c < m; ++c)
    log_pi[c] = state.pi()[c] > 0.0 ? std::log(state.pi()[c])
                                    : -std::numeric_limits<double>::infinity();
  double loss = 0.0;
  bool degenerate = false;
  Vec terms(m);
  engine.for_each([&](const Vec &x, double w, Index) {
    if (w == 0.0 || degenerate)
      return;
    for (Index c = 0; c < m; ++c)
      terms[c] = log_pi[c] + (state.pi()[c] > 0.0 ? prep.log_f(x, c) : 0.0);
    const double lp = detail::log_sum_exp(terms);
    if (lp == -std::numeric_limits<double>::infinity()) {
      degenerate = true;
      return;
    }
    loss -= w * lp;
  });
  return degenerate ? std::numeric_limits<double>::infinity() : loss;
}

inline double cross_entropy_loss(const TrueMixture &truth, const ModelState &state,
                                 const ExpectationEngine &engine) {
  detail::require_same_dim(truth.dim(), engine.dim(), "truth vs engine");
  return cross_entropy_loss(state, engine);
}

inline bool is_degenerate_loss(double loss) noexcept { return std::isinf(loss) && loss > 0.0; }

} // namespace mixlab
