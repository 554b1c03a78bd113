#include "rcp/datagen.hpp"

#include <cmath>
#include <numbers>

namespace rcp {

double toy_mean(double x) noexcept { return x * std::sin(x); }
double toy_sd(double x) noexcept { return x * x; }

LabeledDataset sample_toy(std::size_t n, Rng& rng) {
  if (n < 1) throw SizeError("sample_toy: n must be at least 1");
  Matrix x(static_cast<Index>(n), 1);
  Matrix y(static_cast<Index>(n), 1);
  for (Index i = 0; i < static_cast<Index>(n); ++i) {
    const double xi = rng.beta(kToyBetaA, kToyBetaB);
    x(i, 0) = xi;
    y(i, 0) = toy_mean(xi) + toy_sd(xi) * rng.normal();
  }
  return {std::move(x), std::move(y)};
}

LabeledDataset sample_toy(const ToySpec& spec) {
  Rng rng(spec.seed);
  return sample_toy(spec.n, rng);
}

double normal_cdf(double z) noexcept { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

double inverse_normal_cdf(double p) {
  if (!(p > 0.0 && p < 1.0)) throw ArgumentError("inverse_normal_cdf: probability must lie in (0, 1)");
  // Acklam (2003) coefficients.
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                                 1.383577518672690e+02,  -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                                 6.680131188771972e+01,  -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                                 -2.549732539343734e+00, 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                                 3.754408661907416e+00};
  constexpr double p_low = 0.02425;
  double x = 0.0;
  if (p < p_low) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - p_low) {
    const double q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log1p(-p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  // Halley step on Phi(x) - p; the upper tail uses the complement to avoid cancellation.
  const double e = p > 0.5 ? (1.0 - p) - 0.5 * std::erfc(x / std::numbers::sqrt2)
                           : 0.5 * std::erfc(-x / std::numbers::sqrt2) - p;
  const double u = e * std::sqrt(2.0 * std::numbers::pi) * std::exp(0.5 * x * x);
  return x - u / (1.0 + 0.5 * x * u);
}

double oracle_toy_quantile(double x, double alpha) {
  if (!(x > 0.0)) throw ArgumentError("oracle_toy_quantile: x must be positive");
  if (!(alpha > 0.0 && alpha < 1.0)) throw ArgumentError("oracle_toy_quantile: alpha must lie in (0, 1)");
  return x * x * inverse_normal_cdf(1.0 - 0.5 * alpha);
}

double contaminated_tau(double x, double alpha, double omega, Rng& rng) {
  if (!(omega >= 0.0 && omega <= 1.0)) throw ArgumentError("contamination omega must lie in [0, 1]");
  const double q = oracle_toy_quantile(x, alpha);
  if (omega == 0.0) return q;
  return (1.0 - omega) * q + omega * x * x * rng.normal();
}

double contaminated_tau(double x, double alpha, const ContaminationSpec& spec) {
  Vector key(1);
  key(0) = x;
  Rng rng(hash_covariate(key, spec.seed));
  return contaminated_tau(x, alpha, spec.omega, rng);
}

Vector ToyMeanPredictor::predict(const Vector& x) const {
  if (x.size() != 1) throw ShapeError("toy predictor expects a scalar covariate");
  Vector out(1);
  out(0) = toy_mean(x(0));
  return out;
}

GaussianMixture ToyMixturePredictor::predict(const Vector& x) const {
  if (x.size() != 1) throw ShapeError("toy predictor expects a scalar covariate");
  std::vector<Vector> means(1, Vector::Constant(1, toy_mean(x(0))));
  std::vector<Matrix> chols(1, Matrix::Constant(1, 1, toy_sd(x(0))));
  return GaussianMixture(Vector::Ones(1), std::move(means), std::move(chols));
}

ToyQuantileEstimator::ToyQuantileEstimator(double alpha, ContaminationSpec spec)
    : QuantileEstimator(PinballLevel::from_alpha(alpha)), alpha_(alpha), spec_(spec) {
  if (!(spec.omega >= 0.0 && spec.omega <= 1.0)) throw ArgumentError("contamination omega must lie in [0, 1]");
}

double ToyQuantileEstimator::predict(const Vector& x) const {
  if (x.size() != 1) throw ShapeError("toy estimator expects a scalar covariate");
  return contaminated_tau(x(0), alpha_, spec_);
}

double default_moons_noise(double x) noexcept { return 0.05 + 0.15 * x; }

LabeledDataset sample_two_moons(std::size_t n, const NoiseScale& noise, std::uint64_t seed, std::vector<int>* arms) {
  if (n < 1) throw SizeError("sample_two_moons: n must be at least 1");
  Rng rng(seed);
  Matrix x(static_cast<Index>(n), 1);
  Matrix y(static_cast<Index>(n), 2);
  if (arms) arms->assign(n, 0);
  for (Index i = 0; i < static_cast<Index>(n); ++i) {
    const double xi = rng.uniform();
    const double theta = std::numbers::pi * xi;
    const bool arm = rng.bernoulli(0.5);
    const double sd = noise ? noise(xi) : default_moons_noise(xi);
    x(i, 0) = xi;
    if (!arm) {
      y(i, 0) = std::cos(theta);
      y(i, 1) = std::sin(theta);
    } else {
      y(i, 0) = 1.0 - std::cos(theta);
      y(i, 1) = 0.5 - std::sin(theta);
    }
    y(i, 0) += sd * rng.normal();
    y(i, 1) += sd * rng.normal();
    if (arms) (*arms)[static_cast<std::size_t>(i)] = arm ? 1 : 0;
  }
  return {std::move(x), std::move(y)};
}

}  // namespace rcp
