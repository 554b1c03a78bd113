#include "rcp/mixture.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace rcp {

namespace {
constexpr double kLog2Pi = 1.8378770664093454836;
}

double chol_quadratic_form(const Matrix& chol, const Vector& r) {
  const Vector s = chol.triangularView<Eigen::Lower>().solve(r);
  return s.squaredNorm();
}

GaussianMixture::GaussianMixture(Vector weights, std::vector<Vector> means,
                                 std::vector<Matrix> chol_factors)
    : weights_(std::move(weights)), means_(std::move(means)), chols_(std::move(chol_factors)) {
  const auto k = static_cast<std::size_t>(weights_.size());
  if (k == 0 || means_.size() != k || chols_.size() != k) {
    throw ShapeError("GaussianMixture: weights, means and factors must have equal nonzero counts");
  }
  if ((weights_.array() < 0.0).any() || std::abs(weights_.sum() - 1.0) > 1e-9) {
    throw ArgumentError("GaussianMixture: weights must be nonnegative and sum to 1");
  }
  const Index d = means_.front().size();
  if (d < 1) throw ShapeError("GaussianMixture: dimension must be >= 1");
  log_norm_.resize(static_cast<Index>(k));
  for (std::size_t c = 0; c < k; ++c) {
    const Matrix& l = chols_[c];
    if (means_[c].size() != d || l.rows() != d || l.cols() != d) {
      throw ShapeError("GaussianMixture: component dimension mismatch");
    }
    require_finite(means_[c], "GaussianMixture mean");
    require_finite(l, "GaussianMixture factor");
    double log_det = 0.0;
    for (Index i = 0; i < d; ++i) {
      if (!(l(i, i) > 0.0)) throw DecompositionError("GaussianMixture: factor diagonal must be positive");
      log_det += std::log(l(i, i));
      for (Index j = i + 1; j < d; ++j) {
        if (l(i, j) != 0.0) throw ArgumentError("GaussianMixture: factor must be lower triangular");
      }
    }
    log_norm_(static_cast<Index>(c)) = -0.5 * static_cast<double>(d) * kLog2Pi - log_det;
  }
}

GaussianMixture GaussianMixture::single(const Vector& mean, const Matrix& cov) {
  Eigen::LLT<Matrix> llt(cov);
  if (llt.info() != Eigen::Success || cov.rows() != mean.size()) {
    throw DecompositionError("GaussianMixture::single: covariance is not SPD");
  }
  Matrix l = llt.matrixL();
  return GaussianMixture(Vector::Ones(1), {mean}, {l});
}

Matrix GaussianMixture::covariance(Index k) const {
  const Matrix& l = chol(k);
  return l * l.transpose();
}

double GaussianMixture::component_log_density(Index k, const Vector& y) const {
  if (y.size() != dim()) throw ShapeError("GaussianMixture: response dimension mismatch");
  const auto c = static_cast<std::size_t>(k);
  return log_norm_(k) - 0.5 * chol_quadratic_form(chols_[c], y - means_[c]);
}

double GaussianMixture::log_density(const Vector& y) const {
  double best = -std::numeric_limits<double>::infinity();
  Vector terms(components());
  for (Index k = 0; k < components(); ++k) {
    terms(k) = weights_(k) > 0.0 ? std::log(weights_(k)) + component_log_density(k, y)
                                  : -std::numeric_limits<double>::infinity();
    best = std::max(best, terms(k));
  }
  if (!std::isfinite(best)) return best;
  double acc = 0.0;
  for (Index k = 0; k < components(); ++k) acc += std::exp(terms(k) - best);
  return best + std::log(acc);
}

double GaussianMixture::density(const Vector& y) const { return std::exp(log_density(y)); }

Vector GaussianMixture::sample(Rng& rng) const {
  const double u = rng.uniform();
  Index k = 0;
  double acc = weights_(0);
  while (u >= acc && k + 1 < components()) acc += weights_(++k);
  Vector z(dim());
  for (Index i = 0; i < dim(); ++i) z(i) = rng.normal();
  const auto c = static_cast<std::size_t>(k);
  return means_[c] + chols_[c].triangularView<Eigen::Lower>() * z;
}

}  // namespace rcp
