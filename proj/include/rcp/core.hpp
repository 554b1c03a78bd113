#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "rcp/errors.hpp"
#include "rcp/rng.hpp"

namespace rcp {

using Index = Eigen::Index;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Covariates (n x p) and responses (n x d), one sample per row.
class LabeledDataset {
 public:
  LabeledDataset() = default;
  LabeledDataset(Matrix x, Matrix y);

  Index size() const noexcept { return x_.rows(); }
  bool empty() const noexcept { return x_.rows() == 0; }
  Index covariate_dim() const noexcept { return x_.cols(); }
  Index response_dim() const noexcept { return y_.cols(); }

  const Matrix& x() const noexcept { return x_; }
  const Matrix& y() const noexcept { return y_; }

  Vector x_row(Index i) const { return x_.row(i).transpose(); }
  Vector y_row(Index i) const { return y_.row(i).transpose(); }

  /// Rows in the given order; indices may repeat.
  LabeledDataset subset(std::span<const std::size_t> rows) const;

  /// Row concatenation. Both datasets must have the same column counts.
  static LabeledDataset concat(const LabeledDataset& a, const LabeledDataset& b);

 private:
  Matrix x_;
  Matrix y_;
};

struct SplitSpec {
  std::size_t calibration_size = 2048;
  double train_fraction_of_rest = 0.7;
  std::uint64_t seed = 0;
};

struct DatasetSplit {
  LabeledDataset train;
  LabeledDataset calibration;
  LabeledDataset test;
  std::vector<std::size_t> train_rows;
  std::vector<std::size_t> calibration_rows;
  std::vector<std::size_t> test_rows;
};

/// Random train/calibration/test partition driven only by spec.seed.
/// Calibration gets exactly calibration_size rows, train gets
/// floor(rest * train_fraction_of_rest), test the remainder.
DatasetSplit split_dataset(const LabeledDataset& data, const SplitSpec& spec);

/// Splits a calibration set into the quantile-fitting part (first) and the
/// proper calibration part (second). The first part has
/// round-half-up(tau_fraction * n) rows.
std::pair<LabeledDataset, LabeledDataset> split_calibration(const LabeledDataset& cal,
                                                            double tau_fraction, Rng& rng);

/// Number of rows assigned to the quantile-fitting half.
std::size_t tau_split_size(std::size_t n, double tau_fraction);

/// Per-column z-scoring fitted on one dataset and applied to others.
class Standardizer {
 public:
  Standardizer() = default;
  /// Columns with (near) zero spread get scale 1.
  static Standardizer fit(const Matrix& m);
  static Standardizer identity(Index cols);

  Matrix transform(const Matrix& m) const;
  Vector transform(const Vector& v) const;
  Matrix inverse(const Matrix& m) const;
  Vector inverse(const Vector& v) const;

  const Vector& mean() const noexcept { return mean_; }
  const Vector& scale() const noexcept { return scale_; }

  Standardizer(Vector mean, Vector scale) : mean_(std::move(mean)), scale_(std::move(scale)) {}

 private:
  Vector mean_;
  Vector scale_;
};

void require_finite(const Vector& v, const char* what);
void require_finite(const Matrix& m, const char* what);

}  // namespace rcp
