#include "rcp/core.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

namespace rcp {

std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) noexcept {
  return splitmix64(splitmix64(a) ^ (b + 0x632be59bd9b4e019ULL));
}

std::uint64_t Rng::uniform_index(std::uint64_t n) {
  if (n == 0) throw ArgumentError("uniform_index: n must be positive");
  // Lemire's nearly divisionless method.
  unsigned __int128 m = static_cast<unsigned __int128>(engine_()) * n;
  auto low = static_cast<std::uint64_t>(m);
  if (low < n) {
    const std::uint64_t threshold = (0 - n) % n;
    while (low < threshold) {
      m = static_cast<unsigned __int128>(engine_()) * n;
      low = static_cast<std::uint64_t>(m);
    }
  }
  return static_cast<std::uint64_t>(m >> 64);
}

double Rng::normal() {
  // Box-Muller, one value per call. 1 - u keeps the log argument in (0, 1].
  const double u1 = 1.0 - uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

double Rng::gamma(double shape) {
  if (!(shape > 0.0)) throw ArgumentError("gamma: shape must be positive");
  if (shape < 1.0) {
    const double u = 1.0 - uniform();
    return gamma(shape + 1.0) * std::pow(u, 1.0 / shape);
  }
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x;
    double v;
    do {
      x = normal();
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = uniform();
    if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
    if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
  }
}

double Rng::beta(double a, double b) {
  const double ga = gamma(a);
  const double gb = gamma(b);
  return ga / (ga + gb);
}

std::vector<std::size_t> Rng::permutation(std::size_t n) {
  std::vector<std::size_t> p(n);
  std::iota(p.begin(), p.end(), std::size_t{0});
  shuffle(p);
  return p;
}

void require_finite(const Vector& v, const char* what) {
  if (!v.allFinite()) throw NumericError(std::string(what) + ": non-finite value");
}

void require_finite(const Matrix& m, const char* what) {
  if (!m.allFinite()) throw NumericError(std::string(what) + ": non-finite value");
}

LabeledDataset::LabeledDataset(Matrix x, Matrix y) : x_(std::move(x)), y_(std::move(y)) {
  if (x_.rows() != y_.rows()) {
    std::ostringstream msg;
    msg << "LabeledDataset: x has " << x_.rows() << " rows but y has " << y_.rows();
    throw ShapeError(msg.str());
  }
  if (x_.cols() < 1 || y_.cols() < 1) throw ShapeError("LabeledDataset: p and d must be >= 1");
  require_finite(x_, "LabeledDataset x");
  require_finite(y_, "LabeledDataset y");
}

LabeledDataset LabeledDataset::subset(std::span<const std::size_t> rows) const {
  Matrix x(static_cast<Index>(rows.size()), x_.cols());
  Matrix y(static_cast<Index>(rows.size()), y_.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto r = static_cast<Index>(rows[i]);
    if (r < 0 || r >= size()) throw ArgumentError("LabeledDataset::subset: row out of range");
    x.row(static_cast<Index>(i)) = x_.row(r);
    y.row(static_cast<Index>(i)) = y_.row(r);
  }
  LabeledDataset out;
  out.x_ = std::move(x);
  out.y_ = std::move(y);
  return out;
}

LabeledDataset LabeledDataset::concat(const LabeledDataset& a, const LabeledDataset& b) {
  if (a.covariate_dim() != b.covariate_dim() || a.response_dim() != b.response_dim()) {
    throw ShapeError("LabeledDataset::concat: column mismatch");
  }
  Matrix x(a.size() + b.size(), a.covariate_dim());
  Matrix y(a.size() + b.size(), a.response_dim());
  x << a.x_, b.x_;
  y << a.y_, b.y_;
  return LabeledDataset(std::move(x), std::move(y));
}

DatasetSplit split_dataset(const LabeledDataset& data, const SplitSpec& spec) {
  const auto n = static_cast<std::size_t>(data.size());
  if (!(spec.train_fraction_of_rest > 0.0 && spec.train_fraction_of_rest < 1.0)) {
    throw ArgumentError("split_dataset: train_fraction_of_rest must lie in (0, 1)");
  }
  if (n < spec.calibration_size + 2) {
    std::ostringstream msg;
    msg << "split_dataset: " << n << " rows cannot hold a calibration set of "
        << spec.calibration_size << " plus train and test rows";
    throw SizeError(msg.str());
  }
  const std::size_t rest = n - spec.calibration_size;
  const auto n_train =
      static_cast<std::size_t>(std::floor(static_cast<double>(rest) * spec.train_fraction_of_rest));
  if (n_train == 0 || n_train == rest) {
    throw SizeError("split_dataset: train or test part would be empty");
  }

  Rng rng(spec.seed);
  const auto perm = rng.permutation(n);

  DatasetSplit out;
  out.calibration_rows.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(spec.calibration_size));
  out.train_rows.assign(perm.begin() + static_cast<std::ptrdiff_t>(spec.calibration_size),
                        perm.begin() + static_cast<std::ptrdiff_t>(spec.calibration_size + n_train));
  out.test_rows.assign(perm.begin() + static_cast<std::ptrdiff_t>(spec.calibration_size + n_train), perm.end());
  out.train = data.subset(out.train_rows);
  out.calibration = data.subset(out.calibration_rows);
  out.test = data.subset(out.test_rows);
  return out;
}

std::size_t tau_split_size(std::size_t n, double tau_fraction) {
  return static_cast<std::size_t>(std::floor(tau_fraction * static_cast<double>(n) + 0.5));
}

std::pair<LabeledDataset, LabeledDataset> split_calibration(const LabeledDataset& cal,
                                                            double tau_fraction, Rng& rng) {
  if (!(tau_fraction > 0.0 && tau_fraction < 1.0)) {
    throw ArgumentError("split_calibration: tau_fraction must lie in (0, 1)");
  }
  const auto n = static_cast<std::size_t>(cal.size());
  const std::size_t n_tau = tau_split_size(n, tau_fraction);
  if (n_tau == 0 || n_tau >= n) {
    throw SizeError("split_calibration: one of the halves would be empty");
  }
  const auto perm = rng.permutation(n);
  const std::span<const std::size_t> all(perm);
  return {cal.subset(all.first(n_tau)), cal.subset(all.subspan(n_tau))};
}

Standardizer Standardizer::fit(const Matrix& m) {
  if (m.rows() == 0) throw SizeError("Standardizer::fit: empty matrix");
  Vector mean = m.colwise().mean().transpose();
  Vector scale(m.cols());
  for (Index j = 0; j < m.cols(); ++j) {
    const double var = (m.col(j).array() - mean(j)).square().mean();
    const double sd = std::sqrt(var);
    scale(j) = sd > 1e-12 ? sd : 1.0;
  }
  return Standardizer(std::move(mean), std::move(scale));
}

Standardizer Standardizer::identity(Index cols) {
  return Standardizer(Vector::Zero(cols), Vector::Ones(cols));
}

Matrix Standardizer::transform(const Matrix& m) const {
  if (m.cols() != mean_.size()) throw ShapeError("Standardizer: column count mismatch");
  return (m.rowwise() - mean_.transpose()).array().rowwise() / scale_.transpose().array();
}

Vector Standardizer::transform(const Vector& v) const {
  if (v.size() != mean_.size()) throw ShapeError("Standardizer: dimension mismatch");
  return (v - mean_).cwiseQuotient(scale_);
}

Matrix Standardizer::inverse(const Matrix& m) const {
  if (m.cols() != mean_.size()) throw ShapeError("Standardizer: column count mismatch");
  return (m.array().rowwise() * scale_.transpose().array()).matrix().rowwise() + mean_.transpose();
}

Vector Standardizer::inverse(const Vector& v) const {
  if (v.size() != mean_.size()) throw ShapeError("Standardizer: dimension mismatch");
  return v.cwiseProduct(scale_) + mean_;
}

}  // namespace rcp
