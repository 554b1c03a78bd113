#include "rcp/quantile.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace rcp {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::vector<std::size_t> sorted_order(std::span<const double> values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  return order;
}

double mean_pinball(const Vector& v, const Vector& pred, PinballLevel level) {
  double total = 0.0;
  for (Index i = 0; i < v.size(); ++i) total += pinball_loss(v(i) - pred(i), level);
  return total / static_cast<double>(v.size());
}

std::span<const double> as_span(const Vector& v) { return {v.data(), static_cast<std::size_t>(v.size())}; }

}  // namespace

PinballLevel::PinballLevel(double b) : beta(b) {
  if (!(b > 0.0 && b < 1.0)) throw ArgumentError("quantile level must lie in (0, 1)");
}

double pinball_loss(double u, PinballLevel level) noexcept {
  return u > 0.0 ? level.beta * u : -(1.0 - level.beta) * u;
}

std::size_t conformal_rank(std::size_t n, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw ArgumentError("alpha must lie in (0, 1)");
  // The small guard keeps exact products such as 0.9 * 10 from rounding up.
  const double raw = (1.0 - alpha) * static_cast<double>(n + 1);
  const auto k = static_cast<std::size_t>(std::ceil(raw - 1e-9 * raw));
  return std::clamp<std::size_t>(k, 1, n + 1);
}

double empirical_quantile_conformal(std::span<const double> values, double alpha) {
  if (values.empty()) throw SizeError("empirical_quantile_conformal: no values");
  const std::size_t k = conformal_rank(values.size(), alpha);
  if (k == values.size() + 1) return kInf;
  std::vector<double> copy(values.begin(), values.end());
  std::nth_element(copy.begin(), copy.begin() + static_cast<std::ptrdiff_t>(k - 1), copy.end());
  return copy[k - 1];
}

double weighted_quantile(std::span<const double> values, std::span<const double> weights, PinballLevel level) {
  if (values.size() != weights.size()) throw ShapeError("weighted_quantile: values and weights differ in length");
  if (values.empty()) throw SizeError("weighted_quantile: no values");
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw ArgumentError("weighted_quantile: weights must be finite and nonnegative");
    total += w;
  }
  if (!(total > 0.0)) throw ArgumentError("weighted_quantile: total weight is zero");
  const auto order = sorted_order(values);
  const double target = level.beta * total * (1.0 - 1e-12);
  double cum = 0.0;
  for (std::size_t i : order) {
    cum += weights[i];
    if (cum >= target && weights[i] > 0.0) return values[i];
  }
  return values[order.back()];
}

double empirical_quantile(std::span<const double> values, PinballLevel level) {
  if (values.empty()) throw SizeError("empirical_quantile: no values");
  const double raw = level.beta * static_cast<double>(values.size());
  auto k = static_cast<std::size_t>(std::ceil(raw - 1e-12 * raw));
  k = std::clamp<std::size_t>(k, 1, values.size());
  std::vector<double> copy(values.begin(), values.end());
  std::nth_element(copy.begin(), copy.begin() + static_cast<std::ptrdiff_t>(k - 1), copy.end());
  return copy[k - 1];
}

double weighted_pinball_objective(std::span<const double> values, std::span<const double> weights, double t,
                                  PinballLevel level) {
  if (values.size() != weights.size()) throw ShapeError("weighted_pinball_objective: length mismatch");
  double total = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) total += weights[i] * pinball_loss(values[i] - t, level);
  return total;
}

ScoredDataset::ScoredDataset(Matrix x_, Vector v_) : x(std::move(x_)), v(std::move(v_)) {
  if (x.rows() != v.size()) throw ShapeError("ScoredDataset: covariate and score counts differ");
}

ScoredDataset ScoredDataset::subset(std::span<const std::size_t> rows) const {
  Matrix xs(static_cast<Index>(rows.size()), x.cols());
  Vector vs(static_cast<Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto r = static_cast<Index>(rows[i]);
    if (r < 0 || r >= size()) throw ArgumentError("ScoredDataset::subset: row out of range");
    xs.row(static_cast<Index>(i)) = x.row(r);
    vs(static_cast<Index>(i)) = v(r);
  }
  return {std::move(xs), std::move(vs)};
}

std::string to_string(EstimatorKind kind) {
  switch (kind) {
    case EstimatorKind::constant: return "constant";
    case EstimatorKind::local_kernel: return "local_kernel";
    case EstimatorKind::pinball_net: return "pinball_net";
    case EstimatorKind::external: return "external";
  }
  return "?";
}

EstimatorKind parse_estimator_kind(const std::string& name) {
  if (name == "constant") return EstimatorKind::constant;
  if (name == "local_kernel" || name == "kernel" || name == "local") return EstimatorKind::local_kernel;
  if (name == "pinball_net" || name == "net" || name == "neural") return EstimatorKind::pinball_net;
  throw ArgumentError("unknown quantile estimator '" + name + "' (expected constant, local_kernel, pinball_net)");
}

Vector QuantileEstimator::predict_batch(const Matrix& x) const {
  Vector out(x.rows());
  for (Index i = 0; i < x.rows(); ++i) out(i) = predict(x.row(i).transpose());
  return out;
}

ConstantEstimator::ConstantEstimator(double value, PinballLevel level) : QuantileEstimator(level), value_(value) {
  if (!std::isfinite(value)) throw NumericError("ConstantEstimator: value must be finite");
}

// ---------------------------------------------------------------------------

LocalKernelEstimator::LocalKernelEstimator(Matrix support_x, Vector support_v, double bandwidth, PinballLevel level)
    : QuantileEstimator(level), bandwidth_(bandwidth) {
  if (support_x.rows() != support_v.size()) throw ShapeError("LocalKernelEstimator: support size mismatch");
  if (support_v.size() < 1) throw SizeError("LocalKernelEstimator: empty support");
  if (!(bandwidth > 0.0) || !std::isfinite(bandwidth)) throw ArgumentError("bandwidth must be positive and finite");
  require_finite(support_x, "kernel support covariates");
  require_finite(support_v, "kernel support scores");
  const auto order = sorted_order(as_span(support_v));
  x_.resize(support_x.rows(), support_x.cols());
  v_.resize(support_v.size());
  for (std::size_t i = 0; i < order.size(); ++i) {
    x_.row(static_cast<Index>(i)) = support_x.row(static_cast<Index>(order[i]));
    v_(static_cast<Index>(i)) = support_v(static_cast<Index>(order[i]));
  }
  fallback_ = empirical_quantile(as_span(v_), level);
}

double LocalKernelEstimator::predict(const Vector& x) const {
  if (x.size() != x_.cols()) throw ShapeError("LocalKernelEstimator::predict: covariate dimension mismatch");
  const Index m = v_.size();
  const double inv = 1.0 / (2.0 * bandwidth_ * bandwidth_);
  Vector w(m);
  double total = 0.0;
  for (Index k = 0; k < m; ++k) {
    w(k) = std::exp(-(x_.row(k).transpose() - x).squaredNorm() * inv);
    total += w(k);
  }
  if (!(total > 0.0)) return fallback_;
  // Values are already sorted, so scan the cumulative mass directly.
  const double target = level().beta * total * (1.0 - 1e-12);
  double cum = 0.0;
  for (Index k = 0; k < m; ++k) {
    cum += w(k);
    if (cum >= target && w(k) > 0.0) return v_(k);
  }
  return v_(m - 1);
}

std::vector<double> log_bandwidth_grid(std::size_t count, double lo, double hi) {
  if (count == 0 || !(lo > 0.0) || !(hi >= lo)) throw ArgumentError("log_bandwidth_grid: invalid range");
  std::vector<double> grid(count);
  if (count == 1) {
    grid[0] = lo;
    return grid;
  }
  const double a = std::log(lo);
  const double b = std::log(hi);
  for (std::size_t i = 0; i < count; ++i) {
    grid[i] = std::exp(a + (b - a) * static_cast<double>(i) / static_cast<double>(count - 1));
  }
  grid.front() = lo;
  grid.back() = hi;
  return grid;
}

std::shared_ptr<ConstantEstimator> fit_constant(const ScoredDataset& data, PinballLevel level) {
  if (data.size() < 1) throw SizeError("fit_constant: no scores");
  return std::make_shared<ConstantEstimator>(empirical_quantile(as_span(data.v), level), level);
}

std::shared_ptr<LocalKernelEstimator> fit_local_kernel(const ScoredDataset& data, double bandwidth,
                                                       PinballLevel level) {
  if (data.size() < 2) throw SizeError("fit_local_kernel: need at least 2 scored points");
  return std::make_shared<LocalKernelEstimator>(data.x, data.v, bandwidth, level);
}

double select_bandwidth(const ScoredDataset& data, const KernelSpec& spec, PinballLevel level, Rng& rng) {
  std::vector<double> grid = spec.grid.empty() ? log_bandwidth_grid() : spec.grid;
  std::sort(grid.begin(), grid.end());
  if (grid.size() == 1) return grid.front();
  if (data.size() < 10) throw SizeError("select_bandwidth: need at least 10 scored points");
  const auto n = static_cast<std::size_t>(data.size());
  const auto perm = rng.permutation(n);
  const auto n_fit = static_cast<std::size_t>(std::floor(0.8 * static_cast<double>(n)));
  const ScoredDataset fit_part = data.subset(std::span(perm).first(n_fit));
  const ScoredDataset held = data.subset(std::span(perm).subspan(n_fit));

  double best_h = grid.front();
  double best_loss = kInf;
  for (double h : grid) {
    const LocalKernelEstimator est(fit_part.x, fit_part.v, h, level);
    const double loss = mean_pinball(held.v, est.predict_batch(held.x), level);
    if (loss < best_loss) {
      best_loss = loss;
      best_h = h;
    }
  }
  return best_h;
}

// ---------------------------------------------------------------------------

PinballNetEstimator::PinballNetEstimator(Mlp net, OutputLink link, Standardizer x_std, double target_center,
                                         double target_scale, PinballLevel level)
    : QuantileEstimator(level),
      net_(std::move(net)),
      link_(link),
      x_std_(std::move(x_std)),
      center_(target_center),
      scale_(target_scale) {
  if (net_.output_dim() != 1) throw ShapeError("PinballNetEstimator: network must have one output");
  if (!(scale_ > 0.0)) throw ArgumentError("PinballNetEstimator: target scale must be positive");
}

Vector PinballNetEstimator::predict_batch(const Matrix& x) const {
  const Matrix out = net_.forward(x_std_.transform(x));
  Vector pred(x.rows());
  for (Index i = 0; i < x.rows(); ++i) {
    const double o = link_ == OutputLink::softplus ? softplus(out(i, 0)) : out(i, 0);
    pred(i) = center_ + scale_ * o;
  }
  return pred;
}

double PinballNetEstimator::predict(const Vector& x) const {
  return predict_batch(x.transpose())(0);
}

NetSnapshot PinballNetEstimator::snapshot() const {
  std::vector<double> aux;
  aux.insert(aux.end(), x_std_.mean().data(), x_std_.mean().data() + x_std_.mean().size());
  aux.insert(aux.end(), x_std_.scale().data(), x_std_.scale().data() + x_std_.scale().size());
  aux.push_back(center_);
  aux.push_back(scale_);
  return {net_, LossSpec::pinball(level().beta, link_), std::move(aux)};
}

std::shared_ptr<PinballNetEstimator> PinballNetEstimator::from_snapshot(const NetSnapshot& snap) {
  if (snap.loss.kind != LossKind::pinball) throw ParseError("pinball_net snapshot must carry a pinball head");
  const Index p = snap.net.input_dim();
  if (static_cast<Index>(snap.aux.size()) != 2 * p + 2) throw ParseError("pinball_net snapshot: bad aux block");
  Vector mean = Eigen::Map<const Vector>(snap.aux.data(), p);
  Vector scale = Eigen::Map<const Vector>(snap.aux.data() + p, p);
  return std::make_shared<PinballNetEstimator>(snap.net, snap.loss.link, Standardizer(std::move(mean), std::move(scale)),
                                               snap.aux[2 * p], snap.aux[2 * p + 1], PinballLevel(snap.loss.beta));
}

EstimatorPtr fit_pinball_net(const ScoredDataset& data, PinballLevel level, NetConfig config, Rng& rng,
                             OutputLink link) {
  const Index m = data.size();
  if (m < 2 * config.batch_size) {
    std::ostringstream msg;
    msg << "fit_pinball_net: " << m << " scored points, need at least 2 x batch size = " << 2 * config.batch_size;
    throw SizeError(msg.str());
  }
  require_finite(data.v, "pinball targets");
  config.loss = LossSpec::pinball(level.beta, link);

  double center = 0.0;
  double scale = 1.0;
  if (link == OutputLink::softplus) {
    if ((data.v.array() <= 0.0).any()) throw DomainError("fit_pinball_net: positive link needs positive targets", 0.0);
    scale = data.v.array().abs().mean();
  } else {
    center = data.v.mean();
    scale = std::sqrt((data.v.array() - center).square().mean());
  }
  if (!(scale > 1e-12)) scale = 1.0;

  Standardizer xs = Standardizer::fit(data.x);
  Mlp net(config.widths(data.x.cols()));
  net.initialize(rng);
  const Vector target = (data.v.array() - center) / scale;
  train(net, xs.transform(data.x), target, config, rng);

  auto est = std::make_shared<PinballNetEstimator>(std::move(net), link, std::move(xs), center, scale, level);
  auto constant = fit_constant(data, level);
  const double net_loss = mean_pinball(data.v, est->predict_batch(data.x), level);
  const double const_loss = mean_pinball(data.v, Vector::Constant(m, constant->value()), level);
  if (!(net_loss <= const_loss)) return constant;
  return est;
}

EstimatorPtr fit_estimator(const EstimatorSpec& spec, const ScoredDataset& data, PinballLevel level, Rng& rng,
                           bool positive) {
  switch (spec.kind) {
    case EstimatorKind::constant: return fit_constant(data, level);
    case EstimatorKind::local_kernel: {
      double h = spec.kernel.bandwidth;
      if (spec.tune_bandwidth) h = select_bandwidth(data, spec.kernel, level, rng);
      return fit_local_kernel(data, h, level);
    }
    case EstimatorKind::pinball_net:
      return fit_pinball_net(data, level, spec.net, rng, positive ? OutputLink::softplus : OutputLink::identity);
    case EstimatorKind::external: break;
  }
  throw ArgumentError("fit_estimator: external estimators are supplied already fitted");
}

std::vector<std::vector<std::size_t>> make_folds(std::size_t n, std::size_t folds, Rng& rng) {
  if (folds < 2) throw ArgumentError("cross-validation needs at least 2 folds");
  if (folds > n) throw ArgumentError("cross-validation: more folds than rows leaves a fold with <1 point");
  const auto perm = rng.permutation(n);
  std::vector<std::vector<std::size_t>> out(folds);
  for (std::size_t i = 0; i < n; ++i) out[i % folds].push_back(perm[i]);
  for (auto& f : out) std::sort(f.begin(), f.end());
  return out;
}

ScoredDataset cv_scores(const LabeledDataset& train, std::size_t folds, const FoldScoreTrainer& trainer, Rng& rng) {
  const auto n = static_cast<std::size_t>(train.size());
  const auto parts = make_folds(n, folds, rng);
  Vector scores(static_cast<Index>(n));
  std::vector<char> in_fold(n);
  for (const auto& held : parts) {
    std::fill(in_fold.begin(), in_fold.end(), 0);
    for (std::size_t i : held) in_fold[i] = 1;
    std::vector<std::size_t> rest;
    for (std::size_t i = 0; i < n; ++i) {
      if (!in_fold[i]) rest.push_back(i);
    }
    const ScoreFunction score = trainer(train.subset(rest));
    const LabeledDataset held_data = train.subset(held);
    const Vector v = score.evaluate(held_data);
    for (std::size_t j = 0; j < held.size(); ++j) scores(static_cast<Index>(held[j])) = v(static_cast<Index>(j));
  }
  return {train.x(), std::move(scores)};
}

}  // namespace rcp
