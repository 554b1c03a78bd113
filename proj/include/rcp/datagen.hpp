#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "rcp/core.hpp"
#include "rcp/quantile.hpp"
#include "rcp/scores.hpp"

namespace rcp {

/// Toy law: X ~ Beta(1.2, 0.8), Y | X = x ~ N(x sin x, x^4).
struct ToySpec {
  std::size_t n = 1000;
  std::uint64_t seed = 0;
};

inline constexpr double kToyBetaA = 1.2;
inline constexpr double kToyBetaB = 0.8;

double toy_mean(double x) noexcept;
double toy_sd(double x) noexcept;

LabeledDataset sample_toy(const ToySpec& spec);
LabeledDataset sample_toy(std::size_t n, Rng& rng);

/// Standard normal CDF.
double normal_cdf(double z) noexcept;

/// Standard normal quantile: Acklam's rational approximation followed by one
/// Halley step against erfc. Throws ArgumentError outside (0, 1).
double inverse_normal_cdf(double p);

/// (1 - alpha)-quantile of |N(0, x^4)|: x^2 * Phi^{-1}(1 - alpha / 2).
double oracle_toy_quantile(double x, double alpha);

struct ContaminationSpec {
  double omega = 0.0;
  std::uint64_t seed = 0;
};

/// (1 - omega) * oracle + omega * x^2 * Z with Z drawn from `rng`.
double contaminated_tau(double x, double alpha, double omega, Rng& rng);

/// Same with Z fixed per covariate value by (x, spec.seed), so repeated
/// queries at one x agree.
double contaminated_tau(double x, double alpha, const ContaminationSpec& spec);

/// mu(x) = x sin x as a point predictor.
class ToyMeanPredictor final : public PointPredictor {
 public:
  Vector predict(const Vector& x) const override;
  Index response_dim() const override { return 1; }
  std::string tag() const override { return "toy_oracle"; }
};

/// The exact conditional law N(x sin x, x^4) as a one-component mixture.
class ToyMixturePredictor final : public MixturePredictor {
 public:
  GaussianMixture predict(const Vector& x) const override;
  Index response_dim() const override { return 1; }
  std::string tag() const override { return "toy_oracle"; }
};

/// Oracle (possibly contaminated) quantile of |Y - mu(x)|, in raw-score units.
class ToyQuantileEstimator final : public QuantileEstimator {
 public:
  ToyQuantileEstimator(double alpha, ContaminationSpec spec);
  EstimatorKind kind() const override { return EstimatorKind::external; }
  double predict(const Vector& x) const override;

  double alpha() const noexcept { return alpha_; }
  const ContaminationSpec& contamination() const noexcept { return spec_; }

 private:
  double alpha_;
  ContaminationSpec spec_;
};

/// Bimodal bivariate response: x ~ U(0,1), theta = pi x; arm 0 at
/// (cos theta, sin theta), arm 1 at (1 - cos theta, 0.5 - sin theta), chosen by a
/// fair coin, plus isotropic noise with s.d. noise(x).
using NoiseScale = std::function<double(double)>;

double default_moons_noise(double x) noexcept;

LabeledDataset sample_two_moons(std::size_t n, const NoiseScale& noise, std::uint64_t seed,
                                std::vector<int>* arms = nullptr);

}  // namespace rcp
