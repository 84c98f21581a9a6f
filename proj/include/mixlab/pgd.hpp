#pragma once

#include "mixlab/em.hpp"

#include <algorithm>
#include <functional>
#include <numeric>
#include <vector>

namespace mixlab {

/// Gradient of the cross entropy w.r.t. (pi, means); column c of d_means is
/// the derivative w.r.t. mu_c.
struct Gradient {
  Vec d_pi;
  Mat d_means;
  PartitionFunctions z;

  [[nodiscard]] Vec d_mu1() const { return d_means.col(0); }
  [[nodiscard]] Vec d_mu2() const { return d_means.col(1); }
};

namespace detail {

/// Bernoulli d l / d mu_cj without dividing by mu (1 - mu):
///   -pi_c E[(-1)^{1 - x_j} prod_{i != j} B(x_i | mu_ci) / p(x)].
/// Leave-one-out sums are formed from the finite terms plus a count of
/// -inf terms, so boundary means stay finite.
inline void accumulate_bernoulli_loo(const PreparedComponents &prep, const Vec &x, Index c,
                                     double log_norm, double w, Mat &acc) {
  const Index dim = x.size();
  double finite = 0.0;
  int n_inf = 0;
  Index inf_at = -1;
  for (Index i = 0; i < dim; ++i) {
    const double t = prep.log_term(x[i], i, c);
    if (t == -std::numeric_limits<double>::infinity()) {
      ++n_inf;
      inf_at = i;
    } else {
      finite += t;
    }
  }
  if (n_inf >= 2)
    return;
  for (Index j = 0; j < dim; ++j) {
    double loo = 0.0;
    if (n_inf == 1) {
      if (j != inf_at)
        continue;
      loo = finite;
    } else {
      loo = finite - prep.log_term(x[j], j, c);
    }
    const double v = w * std::exp(loo - log_norm);
    acc(j, c) += x[j] != 0.0 ? v : -v;
  }
}

} // namespace detail

/// d l / d pi_c = -Z_c and d l / d mu_c per family. OneClusterApprox uses the
/// approximate responsibilities in the same formulas (gamma_2 = 1).
inline Gradient gradient(const ModelState &state, const ExpectationEngine &engine,
                         EmMode mode = EmMode::Full) {
  detail::require_mode_fits(state, engine, mode);
  const Index m = state.components();
  const Index dim = state.dim();
  const auto &family = engine.truth().family();
  Gradient g;
  g.d_means = Mat::Zero(dim, m);

  if (!engine.has_support()) {
    const auto mom = one_cluster_moments(engine.truth(), state.mu1(), state.mu2());
    g.z.z = Vec(2);
    g.z.z << mom.z1, 1.0;
    const auto dm = one_cluster_mean_gradient(engine.truth(), state.pi()[0], state.pi()[1],
                                              state.mu1(), state.mu2());
    g.d_means.col(0) = dm.d_mu1;
    g.d_means.col(1) = dm.d_mu2;
    g.d_pi = -g.z.z;
    return g;
  }

  const detail::PreparedComponents prep(family, state.means());
  Vec z = Vec::Zero(m);
  Mat xz = Mat::Zero(dim, m);  // gaussian: E[gamma_c x]
  Mat acc = Mat::Zero(dim, m); // bernoulli: leave-one-out sums
  Vec logf(m), terms(m);
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
      log_norm = detail::log_sum_exp(terms);
    }
    if (log_norm == -std::numeric_limits<double>::infinity())
      throw NumericalDegeneracy("gradient: model density is zero on the support of p*");
    for (Index c = 0; c < m; ++c) {
      const double gamma = std::exp(logf[c] - log_norm);
      z[c] += w * gamma;
      if (family.is_bernoulli())
        detail::accumulate_bernoulli_loo(prep, x, c, log_norm, w, acc);
      else
        xz.col(c) += (w * gamma) * x;
    }
  });

  for (Index c = 0; c < m; ++c) {
    const double pc = state.pi()[c];
    if (family.is_bernoulli())
      g.d_means.col(c) = -pc * acc.col(c);
    else
      g.d_means.col(c) = -pc * family.precision_times(xz.col(c) - z[c] * state.means().col(c));
  }
  if (mode == EmMode::OneClusterApprox)
    z[1] = 1.0;
  g.z.z = z;
  g.d_pi = -z;
  return g;
}

struct SimplexProjection {
  Vec w;
  bool clipped = false; ///< some coordinate was cut to zero
};

/// Euclidean projection onto the probability simplex (sort and threshold).
/// For m = 2 the interior branch is the symmetric shift and w_2 = 1 - w_1.
inline SimplexProjection project_simplex_detailed(const Vec &v) {
  if (v.size() < 1 || !v.allFinite())
    throw std::invalid_argument("project_simplex: finite, non-empty input required");
  const Index m = v.size();
  SimplexProjection out;
  if (m == 2) {
    const double d = v[0] - v[1];
    out.w.resize(2);
    if (d >= 1.0) {
      out.w << 1.0, 0.0;
      out.clipped = true;
    } else if (d <= -1.0) {
      out.w << 0.0, 1.0;
      out.clipped = true;
    } else {
      out.w[0] = 0.5 * (d + 1.0);
      out.w[1] = 1.0 - out.w[0];
    }
    return out;
  }
  std::vector<double> u(v.data(), v.data() + m);
  std::sort(u.begin(), u.end(), std::greater<>());
  double css = 0.0, theta = 0.0;
  Index rho = 0;
  for (Index j = 0; j < m; ++j) {
    css += u[j];
    const double t = (css - 1.0) / static_cast<double>(j + 1);
    if (u[j] - t > 0.0) {
      rho = j + 1;
      theta = t;
    }
  }
  out.w = (v.array() - theta).max(0.0).matrix();
  out.clipped = rho < m;
  out.w /= out.w.sum();
  return out;
}

inline Vec project_simplex(const Vec &v) { return project_simplex_detailed(v).w; }

inline Vec project_box(const Vec &mu) {
  if (!mu.allFinite())
    throw std::invalid_argument("project_box: finite input required");
  return mu.cwiseMax(0.0).cwiseMin(1.0);
}

struct PgdStep {
  ModelState next;
  Gradient grad; ///< at the input state
  bool simplex_clipped = false;
};

inline constexpr double kDefaultStepSize = 0.05;

/// pi <- P_simplex(pi - alpha dl/dpi), mu_c <- mu_c - alpha dl/dmu_c, with the
/// box projection for Bernoulli means. alpha = 0 leaves the state unchanged.
inline PgdStep pgd_step_detailed(const ModelState &state, double alpha,
                                 const ExpectationEngine &engine, EmMode mode = EmMode::Full) {
  if (!(alpha >= 0.0) || !std::isfinite(alpha))
    throw std::invalid_argument("pgd_step: alpha must be finite and nonnegative");
  Gradient g = gradient(state, engine, mode);
  if (alpha == 0.0)
    return {state, std::move(g), false};
  const auto proj = project_simplex_detailed(state.pi() - alpha * g.d_pi);
  Mat means = state.means() - alpha * g.d_means;
  if (engine.truth().family().is_bernoulli())
    for (Index c = 0; c < means.cols(); ++c)
      means.col(c) = project_box(means.col(c));
  return {ModelState(proj.w, std::move(means)), std::move(g), proj.clipped};
}

inline ModelState pgd_step(const ModelState &state, double alpha, const ExpectationEngine &engine,
                           EmMode mode = EmMode::Full) {
  return pgd_step_detailed(state, alpha, engine, mode).next;
}

/// Iterate PGD for up to T = stop.max_steps steps. A run whose pi_1 sits at
/// exactly 0 for stop.absorb_steps consecutive iterates is labelled trapped.
inline Trajectory run_pgd(const ModelState &state0, double alpha, const ExpectationEngine &engine,
                          const StopRule &stop, EmMode mode = EmMode::Full) {
  detail::require_stop_rule(stop);
  Trajectory traj = detail::new_trajectory(state0, engine);
  const StepAnnotator annotate(engine.truth());
  ModelState state = state0;
  std::size_t at_zero = 0;
  bool trapped = false;
  bool converged = false;
  for (std::size_t t = 0;; ++t) {
    PgdStep step = pgd_step_detailed(state, alpha, engine, mode);
    const double loss = cross_entropy_loss(state, engine);
    StepRecord rec = detail::make_record(t, state, step.grad.z, loss, mode);
    rec.simplex_clipped = step.simplex_clipped;
    annotate.annotate(rec);
    traj.steps.push_back(std::move(rec));

    if (!traj.escape_step && state.pi()[0] >= stop.escape_threshold) {
      traj.escape_step = t;
      if (stop.stop_on_escape)
        break;
    }
    at_zero = state.pi()[0] == 0.0 ? at_zero + 1 : 0;
    if (stop.absorb_steps > 0 && at_zero >= stop.absorb_steps) {
      trapped = true;
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
  if (traj.escape_step)
    traj.outcome = Outcome::Escaped;
  else if (trapped || converged)
    traj.outcome = Outcome::Trapped;
  else
    traj.outcome = Outcome::BudgetExhausted;
  return traj;
}

} // namespace mixlab
