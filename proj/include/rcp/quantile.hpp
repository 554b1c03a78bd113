#pragma once

#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "rcp/core.hpp"
#include "rcp/nnet.hpp"
#include "rcp/scores.hpp"

namespace rcp {

/// Quantile level beta = 1 - alpha, strictly inside (0, 1).
struct PinballLevel {
  double beta = 0.9;

  PinballLevel() = default;
  explicit PinballLevel(double b);
  static PinballLevel from_alpha(double alpha) { return PinballLevel(1.0 - alpha); }
};

/// beta * u for u > 0, -(1 - beta) * u otherwise.
double pinball_loss(double u, PinballLevel level) noexcept;

/// k = ceil((1 - alpha)(n + 1)), the conformal rank among n scores.
std::size_t conformal_rank(std::size_t n, double alpha);

/// k-th smallest of values together with +inf; +inf when k = n + 1.
double empirical_quantile_conformal(std::span<const double> values, double alpha);

/// Smallest value whose cumulative normalized weight reaches beta.
double weighted_quantile(std::span<const double> values, std::span<const double> weights, PinballLevel level);

/// Order-statistic quantile with uniform weights: the ceil(beta n)-th smallest.
double empirical_quantile(std::span<const double> values, PinballLevel level);

/// sum_k w_k rho_beta(v_k - t).
double weighted_pinball_objective(std::span<const double> values, std::span<const double> weights, double t,
                                  PinballLevel level);

/// Covariates paired with (transformed) scores.
struct ScoredDataset {
  Matrix x;
  Vector v;

  ScoredDataset() = default;
  ScoredDataset(Matrix x_, Vector v_);

  Index size() const noexcept { return v.size(); }
  ScoredDataset subset(std::span<const std::size_t> rows) const;
};

enum class EstimatorKind { constant, local_kernel, pinball_net, external };

std::string to_string(EstimatorKind kind);
EstimatorKind parse_estimator_kind(const std::string& name);

/// Fitted map x -> tau_hat(x). Immutable after construction.
class QuantileEstimator {
 public:
  virtual ~QuantileEstimator() = default;
  virtual EstimatorKind kind() const = 0;
  virtual double predict(const Vector& x) const = 0;
  virtual Vector predict_batch(const Matrix& x) const;
  PinballLevel level() const noexcept { return level_; }

 protected:
  explicit QuantileEstimator(PinballLevel level) : level_(level) {}

 private:
  PinballLevel level_;
};

using EstimatorPtr = std::shared_ptr<const QuantileEstimator>;

class ConstantEstimator final : public QuantileEstimator {
 public:
  ConstantEstimator(double value, PinballLevel level);
  EstimatorKind kind() const override { return EstimatorKind::constant; }
  double predict(const Vector&) const override { return value_; }
  double value() const noexcept { return value_; }

 private:
  double value_;
};

/// Weighted quantile of the support scores with Gaussian kernel weights
/// exp(-|x - x_k|^2 / (2 h^2)). Falls back to the unconditional quantile
/// when every weight underflows.
class LocalKernelEstimator final : public QuantileEstimator {
 public:
  LocalKernelEstimator(Matrix support_x, Vector support_v, double bandwidth, PinballLevel level);
  EstimatorKind kind() const override { return EstimatorKind::local_kernel; }
  double predict(const Vector& x) const override;

  double bandwidth() const noexcept { return bandwidth_; }
  const Matrix& support_x() const noexcept { return x_; }
  const Vector& support_v() const noexcept { return v_; }

 private:
  Matrix x_;  // rows ordered by increasing v_
  Vector v_;
  double bandwidth_;
  double fallback_;
};

/// Network regressor trained with the pinball loss. Inputs are z-scored;
/// targets are centred and scaled for the identity link, only scaled for softplus.
class PinballNetEstimator final : public QuantileEstimator {
 public:
  PinballNetEstimator(Mlp net, OutputLink link, Standardizer x_std, double target_center, double target_scale,
                      PinballLevel level);
  EstimatorKind kind() const override { return EstimatorKind::pinball_net; }
  double predict(const Vector& x) const override;
  Vector predict_batch(const Matrix& x) const override;

  const Mlp& net() const noexcept { return net_; }
  OutputLink link() const noexcept { return link_; }
  const Standardizer& x_standardizer() const noexcept { return x_std_; }
  double target_center() const noexcept { return center_; }
  double target_scale() const noexcept { return scale_; }

  NetSnapshot snapshot() const;
  static std::shared_ptr<PinballNetEstimator> from_snapshot(const NetSnapshot& snap);

 private:
  Mlp net_;
  OutputLink link_;
  Standardizer x_std_;
  double center_;
  double scale_;
};

struct KernelSpec {
  double bandwidth = 0.1;
  std::vector<double> grid;  // empty means the default log grid
};

/// `count` log-spaced bandwidths in [lo, hi], ascending.
std::vector<double> log_bandwidth_grid(std::size_t count = 20, double lo = 1e-3, double hi = 1.0);

std::shared_ptr<ConstantEstimator> fit_constant(const ScoredDataset& data, PinballLevel level);
std::shared_ptr<LocalKernelEstimator> fit_local_kernel(const ScoredDataset& data, double bandwidth,
                                                       PinballLevel level);

/// Grid bandwidth minimizing held-out mean pinball loss on an internal
/// 80/20 split; ties go to the smaller bandwidth.
double select_bandwidth(const ScoredDataset& data, const KernelSpec& spec, PinballLevel level, Rng& rng);

/// Pinball regression with Adam and early stopping. Falls back to the constant
/// estimator when the network does not beat it on the training rows.
EstimatorPtr fit_pinball_net(const ScoredDataset& data, PinballLevel level, NetConfig config, Rng& rng,
                             OutputLink link = OutputLink::identity);

struct EstimatorSpec {
  EstimatorKind kind = EstimatorKind::local_kernel;
  KernelSpec kernel;
  bool tune_bandwidth = true;
  NetConfig net;
};

/// Fits the estimator described by `spec` at `level`. `positive` requests
/// estimates in (0, inf), used for families whose parameter domain is positive.
EstimatorPtr fit_estimator(const EstimatorSpec& spec, const ScoredDataset& data, PinballLevel level, Rng& rng,
                           bool positive = false);

/// Builds a score from a model trained on one fold's complement.
using FoldScoreTrainer = std::function<ScoreFunction(const LabeledDataset& fold_train)>;

/// Out-of-fold scores: each row is scored by a model trained on the other
/// folds. Rows keep their original order.
ScoredDataset cv_scores(const LabeledDataset& train, std::size_t folds, const FoldScoreTrainer& trainer, Rng& rng);

/// Fold assignment used by cv_scores: a shuffled round-robin partition.
std::vector<std::vector<std::size_t>> make_folds(std::size_t n, std::size_t folds, Rng& rng);

}  // namespace rcp
