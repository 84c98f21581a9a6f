#pragma once

#include "mixlab/types.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <cmath>
#include <limits>
#include <memory>
#include <numbers>
#include <optional>
#include <string_view>

namespace mixlab {

enum class FamilyKind { Gaussian, GaussianFixedSigma, Bernoulli };

inline constexpr std::string_view to_string(FamilyKind k) noexcept {
  switch (k) {
  case FamilyKind::Gaussian:
    return "gaussian";
  case FamilyKind::GaussianFixedSigma:
    return "gaussian_fixed_sigma";
  case FamilyKind::Bernoulli:
    return "bernoulli";
  }
  return "unknown";
}

/// Component family of a two-component (or m-component) mixture.
///
/// Gaussian components share a covariance: identity, or a fixed symmetric
/// positive-definite Sigma supplied at construction. Bernoulli components
/// are products of independent binary marginals.
class MixtureFamily {
public:
  static MixtureFamily gaussian() { return MixtureFamily(FamilyKind::Gaussian); }

  static MixtureFamily bernoulli() { return MixtureFamily(FamilyKind::Bernoulli); }

  static MixtureFamily gaussian_fixed_sigma(const Mat &sigma) {
    if (sigma.rows() != sigma.cols() || sigma.rows() == 0)
      throw std::invalid_argument("sigma must be a non-empty square matrix");
    if (!sigma.allFinite())
      throw std::invalid_argument("sigma must be finite");
    const double scale = sigma.cwiseAbs().maxCoeff();
    if ((sigma - sigma.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, scale))
      throw std::invalid_argument("sigma must be symmetric");
    Eigen::SelfAdjointEigenSolver<Mat> eig(sigma, Eigen::EigenvaluesOnly);
    if (eig.info() != Eigen::Success || eig.eigenvalues().minCoeff() <= 0.0)
      throw std::invalid_argument("sigma must be positive definite");

    MixtureFamily f(FamilyKind::GaussianFixedSigma);
    auto cov = std::make_shared<Covariance>();
    cov->sigma = 0.5 * (sigma + sigma.transpose());
    cov->llt = Eigen::LLT<Mat>(cov->sigma);
    cov->inverse = cov->llt.solve(Mat::Identity(sigma.rows(), sigma.cols()));
    cov->log_det = 2.0 * cov->llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
    f.cov_ = std::move(cov);
    return f;
  }

  [[nodiscard]] FamilyKind kind() const noexcept { return kind_; }
  [[nodiscard]] bool is_gaussian() const noexcept { return kind_ != FamilyKind::Bernoulli; }
  [[nodiscard]] bool is_bernoulli() const noexcept { return kind_ == FamilyKind::Bernoulli; }
  [[nodiscard]] bool has_sigma() const noexcept { return cov_ != nullptr; }

  /// Fixed dimension imposed by Sigma, if any.
  [[nodiscard]] std::optional<Index> fixed_dim() const noexcept {
    if (cov_)
      return cov_->sigma.rows();
    return std::nullopt;
  }

  [[nodiscard]] const Mat &sigma() const { return checked_cov().sigma; }
  [[nodiscard]] const Mat &sigma_inverse() const { return checked_cov().inverse; }
  [[nodiscard]] double sigma_log_det() const { return checked_cov().log_det; }

  /// Lower Cholesky factor of Sigma (identity-covariance families return I).
  [[nodiscard]] Mat sigma_sqrt(Index dim) const {
    if (!cov_)
      return Mat::Identity(dim, dim);
    return cov_->llt.matrixL().toDenseMatrix();
  }

  /// <a, b> in the metric induced by the shared covariance: a^T Sigma^{-1} b.
  [[nodiscard]] double inner(const Vec &a, const Vec &b) const {
    detail::require_same_dim(a.size(), b.size(), "inner product");
    if (!cov_)
      return a.dot(b);
    detail::require_same_dim(a.size(), cov_->sigma.rows(), "inner product vs sigma");
    return a.dot(cov_->inverse * b);
  }

  /// Apply Sigma^{-1} (identity for the plain Gaussian family).
  [[nodiscard]] Vec precision_times(const Vec &v) const {
    if (!cov_)
      return v;
    return cov_->inverse * v;
  }

  /// log f(x | mu). Bernoulli uses 0^0 = 1, so a boundary mu is legal.
  [[nodiscard]] double log_density(const Vec &x, const Vec &mu) const {
    detail::require_same_dim(x.size(), mu.size(), "x vs mu");
    if (kind_ == FamilyKind::Bernoulli) {
      double acc = 0.0;
      for (Index i = 0; i < x.size(); ++i) {
        acc += bernoulli_log_term(x[i], mu[i]);
        if (acc == -std::numeric_limits<double>::infinity())
          return acc;
      }
      return acc;
    }
    const Vec d = x - mu;
    const double dim = static_cast<double>(x.size());
    if (!cov_)
      return -0.5 * dim * std::log(2.0 * std::numbers::pi) - 0.5 * d.squaredNorm();
    detail::require_same_dim(x.size(), cov_->sigma.rows(), "x vs sigma");
    return -0.5 * dim * std::log(2.0 * std::numbers::pi) - 0.5 * cov_->log_det -
           0.5 * d.dot(cov_->inverse * d);
  }

  [[nodiscard]] double density(const Vec &x, const Vec &mu) const {
    return std::exp(log_density(x, mu));
  }

  /// log B(x | mu) for a single binary coordinate; -inf on impossible outcomes.
  static double bernoulli_log_term(double x, double mu) {
    if (x != 0.0 && x != 1.0)
      throw std::invalid_argument("bernoulli sample coordinates must be 0 or 1");
    if (mu < 0.0 || mu > 1.0)
      throw std::invalid_argument("bernoulli mean outside [0, 1]");
    if (x == 1.0)
      return mu > 0.0 ? std::log(mu) : -std::numeric_limits<double>::infinity();
    return mu < 1.0 ? std::log1p(-mu) : -std::numeric_limits<double>::infinity();
  }

private:
  struct Covariance {
    Mat sigma;
    Mat inverse;
    Eigen::LLT<Mat> llt;
    double log_det = 0.0;
  };

  explicit MixtureFamily(FamilyKind k) : kind_(k) {}

  const Covariance &checked_cov() const {
    if (!cov_)
      throw std::logic_error("family has no fixed sigma");
    return *cov_;
  }

  FamilyKind kind_;
  std::shared_ptr<const Covariance> cov_;
};

/// log f(x | mu) and f(x | mu) as free functions.
inline double component_log_density(const MixtureFamily &family, const Vec &x, const Vec &mu) {
  return family.log_density(x, mu);
}

inline double component_density(const MixtureFamily &family, const Vec &x, const Vec &mu) {
  return family.density(x, mu);
}

} // namespace mixlab
