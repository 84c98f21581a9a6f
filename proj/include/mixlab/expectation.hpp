#pragma once

#include "mixlab/mixture.hpp"
#include "mixlab/rng.hpp"

#include <cstdint>
#include <memory>
#include <random>
#include <string_view>

namespace mixlab {

inline constexpr int kDefaultMaxEnumerationDim = 20;
inline constexpr std::size_t kDefaultSampleSize = 100000;

/// Draw `n` i.i.d. points from the truth (one column each). The component is
/// chosen first, then the point is drawn from that component.
inline Mat sample(const TrueMixture &truth, std::size_t n, std::uint64_t seed) {
  if (n == 0)
    throw std::invalid_argument("sample: n must be at least 1");
  const Index dim = truth.dim();
  const Index m = truth.components();
  Rng rng = make_rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  const Mat chol = truth.family().is_gaussian() ? truth.family().sigma_sqrt(dim) : Mat();

  Mat out(dim, static_cast<Index>(n));
  Vec z(dim);
  for (Index k = 0; k < static_cast<Index>(n); ++k) {
    const double u = unif(rng);
    Index c = 0;
    double acc = truth.pi()[0];
    while (c + 1 < m && u >= acc)
      acc += truth.pi()[++c];
    if (truth.family().is_bernoulli()) {
      for (Index i = 0; i < dim; ++i)
        out(i, k) = unif(rng) < truth.params().means()(i, c) ? 1.0 : 0.0;
    } else {
      for (Index i = 0; i < dim; ++i)
        z[i] = normal(rng);
      out.col(k) = truth.params().means().col(c) + chol * z;
    }
  }
  return out;
}

enum class EngineKind { EnumerateBernoulli, Sample, OneClusterClosedForm };

inline constexpr std::string_view to_string(EngineKind k) noexcept {
  switch (k) {
  case EngineKind::EnumerateBernoulli:
    return "enumerate";
  case EngineKind::Sample:
    return "sample";
  case EngineKind::OneClusterClosedForm:
    return "closed_form";
  }
  return "unknown";
}

/// Strategy for expectations over p*.
///
/// - EnumerateBernoulli: all 2^D binary points weighted by p*(x); exact.
/// - Sample: a frozen, seed-deterministic i.i.d. sample with weights 1/N.
/// - OneClusterClosedForm: no support; one-cluster quantities are evaluated
///   by their closed forms (see em.hpp / pgd.hpp).
///
/// Engines are immutable; copies share the cached support.
class ExpectationEngine {
public:
  static ExpectationEngine enumerate(const TrueMixture &truth,
                                     int max_dim = kDefaultMaxEnumerationDim) {
    if (!truth.family().is_bernoulli())
      throw std::invalid_argument("enumeration engine requires a bernoulli truth");
    if (truth.dim() > max_dim)
      throw std::invalid_argument("enumeration engine: dimension exceeds D_max; use sampling");
    if (truth.dim() > 30)
      throw std::invalid_argument("enumeration engine: dimension too large");

    auto data = std::make_shared<Support>();
    const Index dim = truth.dim();
    const Index n = Index{1} << dim;
    data->log_weights.resize(n);
    data->weights.resize(n);
    const detail::PreparedComponents prep(truth.family(), truth.params().means());
    Vec x(dim);
    Vec terms(truth.components());
    for (Index k = 0; k < n; ++k) {
      fill_binary(k, x);
      for (Index c = 0; c < truth.components(); ++c)
        terms[c] = std::log(truth.pi()[c]) + prep.log_f(x, c);
      data->log_weights[k] = detail::log_sum_exp(terms);
      data->weights[k] = std::exp(data->log_weights[k]);
    }
    data->mean = data_mean(truth);
    return ExpectationEngine(EngineKind::EnumerateBernoulli, truth, std::move(data));
  }

  static ExpectationEngine sampled(const TrueMixture &truth, std::size_t n = kDefaultSampleSize,
                                   std::uint64_t seed = 0) {
    auto data = std::make_shared<Support>();
    data->points = sample(truth, n, seed);
    data->weights = Vec::Constant(static_cast<Index>(n), 1.0 / static_cast<double>(n));
    data->mean = data->points.rowwise().mean();
    data->seed = seed;
    return ExpectationEngine(EngineKind::Sample, truth, std::move(data));
  }

  static ExpectationEngine closed_form(const TrueMixture &truth) {
    if (truth.components() != 2)
      throw std::invalid_argument("closed-form engine requires a two-component truth");
    auto data = std::make_shared<Support>();
    data->mean = data_mean(truth);
    return ExpectationEngine(EngineKind::OneClusterClosedForm, truth, std::move(data));
  }

  [[nodiscard]] EngineKind kind() const noexcept { return kind_; }
  [[nodiscard]] const TrueMixture &truth() const noexcept { return *truth_; }
  [[nodiscard]] Index dim() const noexcept { return truth_->dim(); }
  [[nodiscard]] bool has_support() const noexcept { return kind_ != EngineKind::OneClusterClosedForm; }

  /// Mean of the distribution the engine integrates against (the sample
  /// mean for a sampled engine, x-bar otherwise).
  [[nodiscard]] const Vec &mean() const noexcept { return data_->mean; }

  [[nodiscard]] Index size() const noexcept { return data_->weights.size(); }
  [[nodiscard]] const Vec &weights() const noexcept { return data_->weights; }

  /// log p*(x_k) for enumeration engines.
  [[nodiscard]] const Vec &log_weights() const {
    if (kind_ != EngineKind::EnumerateBernoulli)
      throw std::logic_error("log weights exist only for enumeration engines");
    return data_->log_weights;
  }

  [[nodiscard]] const Mat &points() const {
    if (kind_ != EngineKind::Sample)
      throw std::logic_error("explicit points exist only for sampled engines");
    return data_->points;
  }

  [[nodiscard]] std::uint64_t seed() const noexcept { return data_->seed; }

  /// Calls f(x, weight, k) for every support point.
  template <class F> void for_each(F &&f) const {
    if (!has_support())
      throw std::invalid_argument("closed-form engine has no support to iterate");
    const Index n = size();
    if (kind_ == EngineKind::Sample) {
      Vec x(dim());
      for (Index k = 0; k < n; ++k) {
        x = data_->points.col(k);
        f(static_cast<const Vec &>(x), data_->weights[k], k);
      }
      return;
    }
    Vec x(dim());
    for (Index k = 0; k < n; ++k) {
      fill_binary(k, x);
      f(static_cast<const Vec &>(x), data_->weights[k], k);
    }
  }

  /// Binary point with index k: coordinate i is bit i of k.
  static void fill_binary(Index k, Vec &x) {
    for (Index i = 0; i < x.size(); ++i)
      x[i] = static_cast<double>((k >> i) & 1);
  }

private:
  struct Support {
    Mat points;
    Vec weights;
    Vec log_weights;
    Vec mean;
    std::uint64_t seed = 0;
  };

  ExpectationEngine(EngineKind kind, const TrueMixture &truth, std::shared_ptr<const Support> data)
      : kind_(kind), truth_(std::make_shared<const TrueMixture>(truth)), data_(std::move(data)) {}

  EngineKind kind_;
  std::shared_ptr<const TrueMixture> truth_;
  std::shared_ptr<const Support> data_;
};

} // namespace mixlab
