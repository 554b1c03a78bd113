#include "rcp/calibrate.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace rcp {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void require_alpha(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw ArgumentError("alpha must lie in (0, 1)");
}

std::span<const double> as_span(const Vector& v) { return {v.data(), static_cast<std::size_t>(v.size())}; }

/// Returns the score with any required shift applied, or throws.
ScoreFunction ensure_domain(const ScoreFunction& score, const AdjustmentFamily& family, const Vector& scores,
                            bool auto_shift, double* extra_shift) {
  const DomainCheck structure = validate_structure(family, score.kind());
  if (structure.status == DomainCheck::Status::structural) throw CalibrationError(structure.message);
  const DomainCheck check = validate_domain(family, as_span(scores));
  if (check.status == DomainCheck::Status::structural) throw CalibrationError(check.message);
  if (check.ok()) {
    *extra_shift = 0.0;
    return score;
  }
  if (!auto_shift) throw DomainError(check.message, check.shift);
  *extra_shift = check.shift;
  return score.shifted(check.shift);
}

double check_tau(const AdjustmentFamily& family, double t, const Vector& x) {
  if (!std::isfinite(t) || !family.t_domain().contains(t)) {
    std::ostringstream msg;
    msg << family.name() << ": tau_hat(x) = " << t << " at x = [" << x.transpose()
        << "] is outside the parameter domain; the estimate must lie in it for every x";
    throw CalibrationError(msg.str());
  }
  return t;
}

double conformalize(const LabeledDataset& proper, const ScoreFunction& score, const AdjustmentFamily& family,
                    const EstimatorPtr& estimator, bool raw_space, double alpha) {
  const Vector v = score.evaluate(proper);
  Vector q = estimator->predict_batch(proper.x());
  Vector rect(proper.size());
  for (Index i = 0; i < proper.size(); ++i) {
    const double t = check_tau(family, raw_space ? family.invert_in_t(q(i)) : q(i), proper.x_row(i));
    rect(i) = family.invert_in_v(t, v(i));
  }
  return empirical_quantile_conformal(as_span(rect), alpha);
}

}  // namespace

ScpModel::ScpModel(ScoreFunction score, double alpha, double threshold)
    : score_(std::move(score)), alpha_(alpha), threshold_(threshold) {
  require_alpha(alpha);
}

bool ScpModel::contains(const Vector& x, const Vector& y) const {
  if (threshold_ == kInf) return true;
  return score_(x, y) <= threshold_;
}

ScpModel scp_calibrate(const LabeledDataset& cal, const ScoreFunction& score, double alpha) {
  require_alpha(alpha);
  if (cal.empty()) throw SizeError("scp_calibrate: empty calibration set");
  const Vector v = score.evaluate(cal);
  return ScpModel(score, alpha, empirical_quantile_conformal(as_span(v), alpha));
}

RcpModel::RcpModel(ScoreFunction score, AdjustmentFamily family, EstimatorPtr estimator, bool raw_space,
                   double alpha, double threshold)
    : score_(std::move(score)),
      family_(family),
      estimator_(std::move(estimator)),
      raw_space_(raw_space),
      alpha_(alpha),
      threshold_(threshold) {
  require_alpha(alpha);
  if (!estimator_) throw ArgumentError("RcpModel: missing quantile estimator");
}

double RcpModel::tau(const Vector& x) const {
  const double q = estimator_->predict(x);
  return check_tau(family_, raw_space_ ? family_.invert_in_t(q) : q, x);
}

double RcpModel::rectified(const Vector& x, const Vector& y) const {
  const double v = score_(x, y);
  const Interval dom = family_.v_domain();
  if (v < dom.lower) {
    std::ostringstream msg;
    msg << family_.name() << ": test score " << v << " is below the score domain bound " << dom.lower
        << "; the calibration shift is too small for this input";
    throw DomainError(msg.str(), std::ceil((dom.lower - v + 0.1) * 10.0 - 1e-9) / 10.0);
  }
  return family_.invert_in_v(tau(x), v);
}

bool RcpModel::contains(const Vector& x, const Vector& y) const {
  if (threshold_ == kInf) return true;
  return rectified(x, y) <= threshold_;
}

double RcpModel::base_level(const Vector& x) const {
  if (threshold_ == kInf) return kInf;
  return family_.forward(tau(x), threshold_);
}

ScoredDataset transform_scores(const AdjustmentFamily& family, const Matrix& x, const Vector& v, bool raw_space) {
  Vector out(v.size());
  for (Index i = 0; i < v.size(); ++i) out(i) = raw_space ? v(i) : family.invert_in_t(v(i));
  return {x, std::move(out)};
}

RcpModel rcp_calibrate(const LabeledDataset& cal, const ScoreFunction& score, const AdjustmentFamily& family,
                       const EstimatorSpec& estimator, double alpha, const RcpOptions& options, Rng& rng) {
  require_alpha(alpha);
  if (!(options.tau_fraction > 0.0 && options.tau_fraction < 1.0)) {
    throw ArgumentError("tau_fraction must lie in (0, 1)");
  }
  if (cal.size() < 2) throw SizeError("rcp_calibrate: need at least 2 calibration rows to split");
  double extra = 0.0;
  const ScoreFunction shifted = ensure_domain(score, family, score.evaluate(cal), options.auto_shift, &extra);

  auto [d_tau, proper] = split_calibration(cal, options.tau_fraction, rng);
  const ScoredDataset fit_data = transform_scores(family, d_tau.x(), shifted.evaluate(d_tau), options.raw_space);
  const bool positive = !options.raw_space && std::isfinite(family.t_domain().lower);
  EstimatorPtr tau_hat = fit_estimator(estimator, fit_data, PinballLevel::from_alpha(alpha), rng, positive);
  const double thr = conformalize(proper, shifted, family, tau_hat, options.raw_space, alpha);
  return RcpModel(shifted, family, std::move(tau_hat), options.raw_space, alpha, thr);
}

RcpModel rcp_calibrate_prefit(const LabeledDataset& proper, const ScoreFunction& score,
                              const AdjustmentFamily& family, EstimatorPtr estimator, double alpha,
                              const RcpOptions& options) {
  require_alpha(alpha);
  if (proper.empty()) throw SizeError("rcp_calibrate_prefit: empty calibration set");
  double extra = 0.0;
  const ScoreFunction shifted = ensure_domain(score, family, score.evaluate(proper), options.auto_shift, &extra);
  const double thr = conformalize(proper, shifted, family, estimator, options.raw_space, alpha);
  return RcpModel(shifted, family, std::move(estimator), options.raw_space, alpha, thr);
}

RcpModel rcp_calibrate_cv(const ScoredDataset& train_scores, const LabeledDataset& cal, const ScoreFunction& score,
                          const AdjustmentFamily& family, const EstimatorSpec& estimator, double alpha,
                          const RcpOptions& options, Rng& rng) {
  require_alpha(alpha);
  if (cal.empty()) throw SizeError("rcp_calibrate_cv: empty calibration set");
  if (train_scores.size() < 1) throw SizeError("rcp_calibrate_cv: no out-of-fold scores");
  Vector all(train_scores.size() + cal.size());
  all << train_scores.v, score.evaluate(cal);
  double extra = 0.0;
  const ScoreFunction shifted = ensure_domain(score, family, all, options.auto_shift, &extra);
  const Vector oof = train_scores.v.array() + extra;
  const ScoredDataset fit_data = transform_scores(family, train_scores.x, oof, options.raw_space);
  const bool positive = !options.raw_space && std::isfinite(family.t_domain().lower);
  EstimatorPtr tau_hat = fit_estimator(estimator, fit_data, PinballLevel::from_alpha(alpha), rng, positive);
  const double thr = conformalize(cal, shifted, family, tau_hat, options.raw_space, alpha);
  return RcpModel(shifted, family, std::move(tau_hat), options.raw_space, alpha, thr);
}

}  // namespace rcp
