#pragma once

#include "mixlab/loss.hpp"
#include "mixlab/trajectory.hpp"

#include <cmath>
#include <limits>

namespace mixlab {

/// Z_c = E[gamma_c(x)].
struct PartitionFunctions {
  Vec z;

  [[nodiscard]] double z1() const { return z[0]; }
  [[nodiscard]] double z2() const { return z[1]; }
};

namespace detail {

/// Sufficient statistics of one E step: Z_c and E[x gamma_c] (column c).
struct EStats {
  Vec z;
  Mat xz;
};

inline void require_mode_fits(const ModelState &state, const ExpectationEngine &engine,
                              EmMode mode) {
  detail::require_same_dim(state.dim(), engine.dim(), "state vs engine");
  check_state(engine.truth().family(), state);
  if (mode == EmMode::OneClusterApprox)
    state.require_two();
  if (!engine.has_support() && mode != EmMode::OneClusterApprox)
    throw std::invalid_argument("closed-form engine supports only the one-cluster mode");
}

inline EStats e_stats(const ModelState &state, const ExpectationEngine &engine, EmMode mode) {
  require_mode_fits(state, engine, mode);
  const Index m = state.components();
  const Index dim = state.dim();
  EStats st{Vec::Zero(m), Mat::Zero(dim, m)};

  if (!engine.has_support()) {
    const auto mom = one_cluster_moments(engine.truth(), state.mu1(), state.mu2());
    st.z << mom.z1, 1.0;
    st.xz.col(0) = mom.z1 * mom.q1_mean;
    st.xz.col(1) = engine.mean();
    return st;
  }

  const auto &family = engine.truth().family();
  const PreparedComponents prep(family, state.means());
  Vec logf(m);
  Vec terms(m);
  engine.for_each([&](const Vec &x, double w, Index) {
    if (w == 0.0)
      return;
    for (Index c = 0; c < m; ++c)
      logf[c] = prep.log_f(x, c);
    double log_norm = 0.0;
    if (mode == EmMode::OneClusterApprox) {
      log_norm = logf[1];
    } else {
      for (Index c = 0; c < m; ++c)
        terms[c] = state.pi()[c] > 0.0 ? std::log(state.pi()[c]) + logf[c]
                                       : -std::numeric_limits<double>::infinity();
      log_norm = log_sum_exp(terms);
    }
    if (log_norm == -std::numeric_limits<double>::infinity())
      throw NumericalDegeneracy("model density is zero on the support of p*");
    for (Index c = 0; c < m; ++c) {
      const double g = std::exp(logf[c] - log_norm);
      st.z[c] += w * g;
      st.xz.col(c) += (w * g) * x;
    }
  });
  if (mode == EmMode::OneClusterApprox) {
    // gamma_2 = 1 identically: Z_2 = 1 and E[x gamma_2] = E[x].
    st.z[1] = 1.0;
    st.xz.col(1) = engine.mean();
  }
  return st;
}

} // namespace detail

inline PartitionFunctions partition_functions(const ModelState &state,
                                              const ExpectationEngine &engine,
                                              EmMode mode = EmMode::Full) {
  return {detail::e_stats(state, engine, mode).z};
}

struct EmStep {
  ModelState next;
  PartitionFunctions z; ///< at the input state
};

/// One EM update: pi_c <- pi_c Z_c, mu_c <- E_{q_c}[x].
///
/// Full mode renormalises pi (absorbing the O(1e-10) residual of
/// sum_c pi_c Z_c = 1). OneClusterApprox keeps pi_1 <- pi_1 Z_1 and sets
/// pi_2 = 1 - pi_1; mu_2 lands on the mean of p* in one step.
inline EmStep em_step_detailed(const ModelState &state, const ExpectationEngine &engine,
                               EmMode mode = EmMode::Full) {
  const auto st = detail::e_stats(state, engine, mode);
  const Index m = state.components();
  for (Index c = 0; c < m; ++c)
    if (!(st.z[c] > 0.0))
      throw NumericalDegeneracy("responsibility collapse: Z_c = 0");

  Mat means(state.dim(), m);
  for (Index c = 0; c < m; ++c)
    means.col(c) = st.xz.col(c) / st.z[c];
  if (engine.truth().family().is_bernoulli())
    means = means.cwiseMax(0.0).cwiseMin(1.0);

  Vec pi(m);
  if (mode == EmMode::OneClusterApprox) {
    pi[0] = std::min(state.pi()[0] * st.z[0], 1.0);
    pi[1] = 1.0 - pi[0];
  } else {
    pi = state.pi().cwiseProduct(st.z);
    pi /= pi.sum();
  }
  return {ModelState(std::move(pi), std::move(means)), {st.z}};
}

inline ModelState em_step(const ModelState &state, const ExpectationEngine &engine,
                          EmMode mode = EmMode::Full) {
  return em_step_detailed(state, engine, mode).next;
}

namespace detail {

inline double max_change(const ModelState &a, const ModelState &b) {
  return std::max((a.pi() - b.pi()).cwiseAbs().maxCoeff(),
                  (a.means() - b.means()).cwiseAbs().maxCoeff());
}

inline StepRecord make_record(std::size_t t, const ModelState &s, const PartitionFunctions &z,
                              double loss, EmMode mode) {
  StepRecord rec;
  rec.t = t;
  rec.pi = s.pi();
  rec.means = s.means();
  rec.z = z.z;
  rec.loss = loss;
  rec.mode = mode;
  return rec;
}

inline Trajectory new_trajectory(const ModelState &s, const ExpectationEngine &engine) {
  Trajectory traj;
  traj.family = engine.truth().family().kind();
  traj.dim = s.dim();
  traj.components = s.components();
  return traj;
}

inline void require_stop_rule(const StopRule &stop) {
  if (stop.max_steps < 1)
    throw std::invalid_argument("run: T (max_steps) must be at least 1");
  if (!(stop.escape_threshold > 0.0 && stop.escape_threshold <= 1.0))
    throw std::invalid_argument("run: escape threshold must lie in (0, 1]");
}

} // namespace detail

inline constexpr double kMonotoneSlack = 1e-9;

/// Iterate EM for up to T = stop.max_steps steps, recording Z, loss and the
/// derived columns at every iterate t = 0..T.
inline Trajectory run_em(const ModelState &state0, const ExpectationEngine &engine, EmMode mode,
                         const StopRule &stop) {
  detail::require_stop_rule(stop);
  Trajectory traj = detail::new_trajectory(state0, engine);
  const StepAnnotator annotate(engine.truth());
  ModelState state = state0;
  double prev_loss = std::numeric_limits<double>::quiet_NaN();
  bool converged = false;
  for (std::size_t t = 0;; ++t) {
    EmStep step = em_step_detailed(state, engine, mode);
    const double loss = cross_entropy_loss(state, engine);
    StepRecord rec = detail::make_record(t, state, step.z, loss, mode);
    annotate.annotate(rec);
    traj.steps.push_back(std::move(rec));

    if (mode == EmMode::Full && engine.has_support() && t > 0 && loss > prev_loss + kMonotoneSlack)
      ++traj.monotone_violations;
    prev_loss = loss;

    if (!traj.escape_step && state.pi()[0] >= stop.escape_threshold) {
      traj.escape_step = t;
      if (stop.stop_on_escape)
        break;
    }
    if (t == stop.max_steps)
      break;
    if (stop.param_tol > 0.0 && detail::max_change(step.next, state) <= stop.param_tol) {
      converged = true;
      break;
    }
    state = std::move(step.next);
  }
  traj.outcome = traj.escape_step ? Outcome::Escaped
                                  : (converged ? Outcome::Trapped : Outcome::BudgetExhausted);
  return traj;
}

} // namespace mixlab
