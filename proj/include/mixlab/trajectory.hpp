#pragma once

#include "mixlab/lambda.hpp"

#include <cmath>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace mixlab {

struct StepRecord {
  std::size_t t = 0;
  Vec pi;
  Mat means;
  Vec z; ///< partition functions at this iterate
  double loss = 0.0;
  std::optional<Vec> lambda;           ///< bernoulli, two components
  std::optional<double> cos_mu1_mustar; ///< gaussian, two components
  std::optional<RegionClass> region;
  EmMode mode = EmMode::Full;
  bool simplex_clipped = false; ///< PGD: the simplex projection clipped a weight
};

enum class Outcome { Escaped, Trapped, BudgetExhausted, Degenerate };

inline constexpr std::string_view to_string(Outcome o) noexcept {
  switch (o) {
  case Outcome::Escaped:
    return "escaped";
  case Outcome::Trapped:
    return "trapped";
  case Outcome::BudgetExhausted:
    return "budget_exhausted";
  case Outcome::Degenerate:
    return "degenerate";
  }
  return "unknown";
}

struct Trajectory {
  FamilyKind family = FamilyKind::Gaussian;
  Index dim = 0;
  Index components = 2;
  std::vector<StepRecord> steps;
  Outcome outcome = Outcome::BudgetExhausted;
  std::optional<std::size_t> escape_step;
  std::size_t monotone_violations = 0; ///< Full EM loss increases above 1e-9
  std::string note;                    ///< degeneracy message, if any

  [[nodiscard]] bool empty() const noexcept { return steps.empty(); }
  [[nodiscard]] const StepRecord &back() const { return steps.back(); }

  [[nodiscard]] std::vector<double> pi1_series() const {
    std::vector<double> out;
    out.reserve(steps.size());
    for (const auto &s : steps)
      out.push_back(s.pi[0]);
    return out;
  }

  /// t strictly increasing from 0 and every pi on the simplex.
  [[nodiscard]] bool well_formed(double tol = 1e-12) const {
    for (std::size_t k = 0; k < steps.size(); ++k) {
      const auto &s = steps[k];
      if (s.t != k)
        return false;
      if (s.pi.minCoeff() < 0.0 || std::abs(s.pi.sum() - 1.0) > tol)
        return false;
    }
    return true;
  }
};

/// Stopping rule shared by the EM and PGD runners.
struct StopRule {
  std::size_t max_steps = 1000;
  double escape_threshold = 0.01; ///< pi_1 >= threshold counts as escaped
  bool stop_on_escape = true;
  double param_tol = 0.0;         ///< stop when max |change| <= tol (0 disables)
  std::size_t absorb_steps = 10;  ///< PGD: consecutive steps at pi_1 = 0 => trapped
};

inline constexpr double kDefaultEscapeThreshold = 0.01;

/// First t with pi_1(t) >= threshold.
inline std::optional<std::size_t> escape_time(const std::vector<double> &pi1, double threshold) {
  if (!(threshold > 0.0 && threshold <= 0.5))
    throw std::invalid_argument("escape_time: threshold must lie in (0, 0.5]");
  for (std::size_t t = 0; t < pi1.size(); ++t)
    if (pi1[t] >= threshold)
      return t;
  return std::nullopt;
}

inline std::optional<std::size_t> escape_time(const Trajectory &traj, double threshold) {
  return escape_time(traj.pi1_series(), threshold);
}

/// Fills the derived columns of a record: lambda and region (Bernoulli), the
/// cosine to mu* in the canonical frame and a Z_1-based region (Gaussian).
class StepAnnotator {
public:
  explicit StepAnnotator(const TrueMixture &truth) {
    if (truth.components() != 2)
      return;
    if (truth.family().is_bernoulli()) {
      ctx_.emplace(truth);
    } else {
      midpoint_ = truth.midpoint();
      mu_star_ = truth.mu_star();
    }
  }

  void annotate(StepRecord &rec) const {
    if (rec.pi.size() != 2)
      return;
    const Vec b = rec.means.col(0) - rec.means.col(1);
    if (ctx_) {
      rec.lambda = lambda_from_b(b, *ctx_);
      rec.region = detail::classify_unchecked(*rec.lambda, ctx_->pi1(), ctx_->pi2(),
                                              kNeutralTolerance);
      return;
    }
    const Vec mu1 = rec.means.col(0) - midpoint_;
    const double denom = mu1.norm() * mu_star_.norm();
    if (denom > 0.0)
      rec.cos_mu1_mustar = mu1.dot(mu_star_) / denom;
    const double z1 = rec.z[0];
    if (z1 < 1.0 - kNeutralTolerance)
      rec.region = RegionClass::Trap;
    else if (std::abs(z1 - 1.0) <= kNeutralTolerance)
      rec.region = RegionClass::NeutralBoundary;
    else
      rec.region = RegionClass::Other;
  }

private:
  std::optional<LambdaContext> ctx_;
  Vec midpoint_;
  Vec mu_star_;
};

} // namespace mixlab
