#pragma once

#include "rcp/adjustments.hpp"
#include "rcp/core.hpp"
#include "rcp/quantile.hpp"
#include "rcp/scores.hpp"

namespace rcp {

/// Split conformal model: {y : V(x, y) <= threshold}.
class ScpModel {
 public:
  ScpModel(ScoreFunction score, double alpha, double threshold);

  const ScoreFunction& score() const noexcept { return score_; }
  double alpha() const noexcept { return alpha_; }
  /// +inf when alpha < 1/(n+1).
  double threshold() const noexcept { return threshold_; }

  bool contains(const Vector& x, const Vector& y) const;
  SetGeometry set(const Vector& x) const { return score_.sublevel(x, threshold_); }

 private:
  ScoreFunction score_;
  double alpha_;
  double threshold_;
};

ScpModel scp_calibrate(const LabeledDataset& cal, const ScoreFunction& score, double alpha);

struct RcpOptions {
  /// Share of the calibration rows used to fit tau_hat.
  double tau_fraction = 0.5;
  /// Apply the recommended score shift instead of failing.
  bool auto_shift = false;
  /// Fit the quantile on raw scores and map it with invert_in_t afterwards
  /// instead of fitting on transformed scores.
  bool raw_space = false;
};

/// Rectified conformal model: {y : f^{-1}_{tau(x)}(V(x, y)) <= threshold}.
class RcpModel {
 public:
  RcpModel(ScoreFunction score, AdjustmentFamily family, EstimatorPtr estimator, bool raw_space, double alpha,
           double threshold);

  const ScoreFunction& score() const noexcept { return score_; }
  const AdjustmentFamily& family() const noexcept { return family_; }
  const EstimatorPtr& estimator() const noexcept { return estimator_; }
  bool raw_space() const noexcept { return raw_space_; }
  double alpha() const noexcept { return alpha_; }
  double threshold() const noexcept { return threshold_; }
  /// Shift that was added to the base score (also visible as score().shift()).
  double shift() const noexcept { return score_.shift(); }

  /// tau_hat(x) in the family's parameter space.
  double tau(const Vector& x) const;
  /// Rectified score f^{-1}_{tau(x)}(V(x, y)).
  double rectified(const Vector& x, const Vector& y) const;
  bool contains(const Vector& x, const Vector& y) const;
  /// f_{tau(x)}(threshold): the cutoff on the base score at x.
  double base_level(const Vector& x) const;
  SetGeometry set(const Vector& x) const { return score_.sublevel(x, base_level(x)); }

 private:
  ScoreFunction score_;
  AdjustmentFamily family_;
  EstimatorPtr estimator_;
  bool raw_space_;
  double alpha_;
  double threshold_;
};

/// Full calibration: split `cal`, fit tau_hat on the first part, conformalize
/// the rectified scores of the second part.
RcpModel rcp_calibrate(const LabeledDataset& cal, const ScoreFunction& score, const AdjustmentFamily& family,
                       const EstimatorSpec& estimator, double alpha, const RcpOptions& options, Rng& rng);

/// Conformalizes with an already fitted tau_hat on the whole of `proper`.
/// `estimator` must have been fitted on data disjoint from `proper`.
RcpModel rcp_calibrate_prefit(const LabeledDataset& proper, const ScoreFunction& score,
                              const AdjustmentFamily& family, EstimatorPtr estimator, double alpha,
                              const RcpOptions& options);

/// Variant where tau_hat is fitted on out-of-fold training scores (cv_scores)
/// and every calibration row is used for conformalization.
RcpModel rcp_calibrate_cv(const ScoredDataset& train_scores, const LabeledDataset& cal, const ScoreFunction& score,
                          const AdjustmentFamily& family, const EstimatorSpec& estimator, double alpha,
                          const RcpOptions& options, Rng& rng);

/// Transformed scores V_phi = invert_in_t(V) (or raw V when raw_space).
ScoredDataset transform_scores(const AdjustmentFamily& family, const Matrix& x, const Vector& v, bool raw_space);

}  // namespace rcp
