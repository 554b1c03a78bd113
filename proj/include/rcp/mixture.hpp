#pragma once

#include <vector>

#include "rcp/core.hpp"

namespace rcp {

/// Gaussian mixture with full covariances stored as Cholesky factors,
/// Sigma_k = L_k L_k^T.
class GaussianMixture {
 public:
  GaussianMixture() = default;

  /// weights must be nonnegative and sum to 1 within 1e-9; every factor must be
  /// lower triangular with a strictly positive diagonal.
  GaussianMixture(Vector weights, std::vector<Vector> means, std::vector<Matrix> chol_factors);

  /// Single component N(mean, cov). Throws DecompositionError if cov is not SPD.
  static GaussianMixture single(const Vector& mean, const Matrix& cov);

  Index components() const noexcept { return weights_.size(); }
  Index dim() const noexcept { return means_.empty() ? 0 : means_.front().size(); }

  const Vector& weights() const noexcept { return weights_; }
  const Vector& mean(Index k) const { return means_.at(static_cast<std::size_t>(k)); }
  const Matrix& chol(Index k) const { return chols_.at(static_cast<std::size_t>(k)); }
  Matrix covariance(Index k) const;

  /// log N(y | mu_k, Sigma_k).
  double component_log_density(Index k, const Vector& y) const;

  /// log sum_k pi_k N(y | mu_k, Sigma_k), computed with log-sum-exp.
  /// Returns -inf only if every weighted component underflows completely.
  double log_density(const Vector& y) const;
  double density(const Vector& y) const;

  Vector sample(Rng& rng) const;

 private:
  Vector weights_;
  std::vector<Vector> means_;
  std::vector<Matrix> chols_;
  Vector log_norm_;  // -d/2 log(2 pi) - sum log diag(L_k)
};

/// Squared Mahalanobis norm ||L^{-1} r||^2 for lower-triangular L.
double chol_quadratic_form(const Matrix& chol, const Vector& r);

}  // namespace rcp
