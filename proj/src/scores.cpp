#include "rcp/scores.hpp"

#include <cmath>
#include <cstring>
#include <limits>

namespace rcp {

namespace {

void require_finite_scalar(double v, const char* what) {
  if (!std::isfinite(v)) throw NumericError(std::string(what) + ": non-finite input");
}

void require_same_dim(const Vector& a, const Vector& b, const char* what) {
  if (a.size() != b.size()) throw ShapeError(std::string(what) + ": dimension mismatch");
}

}  // namespace

double abs_residual(double mu, double y, double shift) {
  require_finite_scalar(mu, "abs_residual");
  require_finite_scalar(y, "abs_residual");
  return std::abs(y - mu) + shift;
}

double linf_residual(const Vector& mu, const Vector& y, double shift) {
  require_same_dim(mu, y, "linf_residual");
  require_finite(mu, "linf_residual");
  require_finite(y, "linf_residual");
  return (y - mu).cwiseAbs().maxCoeff() + shift;
}

double mahalanobis_chol(const Vector& mu, const Matrix& chol, const Vector& y) {
  require_same_dim(mu, y, "mahalanobis");
  if (chol.rows() != mu.size() || chol.cols() != mu.size()) throw ShapeError("mahalanobis: covariance shape");
  return std::sqrt(chol_quadratic_form(chol, y - mu));
}

double mahalanobis(const Vector& mu, const Matrix& cov, const Vector& y) {
  if (cov.rows() != mu.size() || cov.cols() != mu.size()) throw ShapeError("mahalanobis: covariance shape");
  if (!cov.isApprox(cov.transpose(), 1e-12)) throw DecompositionError("mahalanobis: covariance not symmetric");
  Eigen::LLT<Matrix> llt(cov);
  if (llt.info() != Eigen::Success) throw DecompositionError("mahalanobis: covariance is not positive definite");
  const Matrix l = llt.matrixL();
  return mahalanobis_chol(mu, l, y);
}

NllValue mixture_nll(const GaussianMixture& mixture, const Vector& y) {
  require_finite(y, "mixture_nll");
  const double lp = mixture.log_density(y);
  if (!(lp > -kNllSaturation)) return {kNllSaturation, true};
  return {-lp, false};
}

double sample_distance(const std::vector<Vector>& samples, const Vector& y) {
  if (samples.empty()) throw ArgumentError("sample_distance: empty sample list");
  double best = std::numeric_limits<double>::infinity();
  for (const auto& s : samples) {
    require_same_dim(s, y, "sample_distance");
    best = std::min(best, (y - s).squaredNorm());
  }
  return std::sqrt(best);
}

std::string to_string(ScoreKind kind) {
  switch (kind) {
    case ScoreKind::abs_residual: return "abs_residual";
    case ScoreKind::linf_residual: return "linf_residual";
    case ScoreKind::mahalanobis: return "mahalanobis";
    case ScoreKind::mixture_nll: return "mixture_nll";
    case ScoreKind::sample_distance: return "sample_distance";
  }
  return "?";
}

ScoreKind parse_score_kind(const std::string& name) {
  if (name == "abs_residual" || name == "abs") return ScoreKind::abs_residual;
  if (name == "linf_residual" || name == "linf" || name == "rescp") return ScoreKind::linf_residual;
  if (name == "mahalanobis") return ScoreKind::mahalanobis;
  if (name == "mixture_nll" || name == "dcp") return ScoreKind::mixture_nll;
  if (name == "sample_distance" || name == "pcp") return ScoreKind::sample_distance;
  throw ArgumentError("unknown score kind '" + name + "'");
}

bool score_is_nonnegative(ScoreKind kind) { return kind != ScoreKind::mixture_nll; }

std::string to_string(GeometryKind kind) {
  switch (kind) {
    case GeometryKind::interval: return "interval";
    case GeometryKind::hypercube: return "hypercube";
    case GeometryKind::ellipsoid: return "ellipsoid";
    case GeometryKind::density_superlevel: return "density_superlevel";
    case GeometryKind::ball_union: return "ball_union";
  }
  return "?";
}

std::uint64_t hash_covariate(const Vector& x, std::uint64_t seed) {
  std::uint64_t h = splitmix64(seed ^ static_cast<std::uint64_t>(x.size()));
  for (Index i = 0; i < x.size(); ++i) {
    double v = x(i);
    if (v == 0.0) v = 0.0;  // fold -0 onto +0
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof bits);
    h = splitmix64(h ^ bits);
  }
  return h;
}

Index SetGeometry::dim() const {
  switch (kind) {
    case GeometryKind::interval:
    case GeometryKind::hypercube:
    case GeometryKind::ellipsoid: return center.size();
    case GeometryKind::density_superlevel: return mixture.dim();
    case GeometryKind::ball_union: return centers.empty() ? 0 : centers.front().size();
  }
  return 0;
}

bool SetGeometry::contains(const Vector& y) const {
  switch (kind) {
    case GeometryKind::interval: return rcp::abs_residual(center(0), y(0), shift) <= level;
    case GeometryKind::hypercube: return linf_residual(center, y, shift) <= level;
    case GeometryKind::ellipsoid: return mahalanobis_chol(center, chol, y) + shift <= level;
    case GeometryKind::density_superlevel: return mixture_nll(mixture, y).value + shift <= level;
    case GeometryKind::ball_union: return sample_distance(centers, y) + shift <= level;
  }
  return false;
}

// ---------------------------------------------------------------------------

ScoreFunction ScoreFunction::abs_residual(std::shared_ptr<const PointPredictor> predictor, double shift) {
  if (!predictor) throw ArgumentError("ScoreFunction: null predictor");
  if (predictor->response_dim() != 1) throw ShapeError("abs_residual requires a scalar response");
  ScoreFunction s;
  s.kind_ = ScoreKind::abs_residual;
  s.point_ = std::move(predictor);
  s.shift_ = shift;
  return s;
}

ScoreFunction ScoreFunction::linf_residual(std::shared_ptr<const PointPredictor> predictor, double shift) {
  if (!predictor) throw ArgumentError("ScoreFunction: null predictor");
  ScoreFunction s;
  s.kind_ = ScoreKind::linf_residual;
  s.point_ = std::move(predictor);
  s.shift_ = shift;
  return s;
}

ScoreFunction ScoreFunction::mahalanobis(std::shared_ptr<const MixturePredictor> predictor, double shift) {
  if (!predictor) throw ArgumentError("ScoreFunction: null predictor");
  ScoreFunction s;
  s.kind_ = ScoreKind::mahalanobis;
  s.mixture_ = std::move(predictor);
  s.shift_ = shift;
  return s;
}

ScoreFunction ScoreFunction::mixture_nll(std::shared_ptr<const MixturePredictor> predictor, double shift) {
  if (!predictor) throw ArgumentError("ScoreFunction: null predictor");
  ScoreFunction s;
  s.kind_ = ScoreKind::mixture_nll;
  s.mixture_ = std::move(predictor);
  s.shift_ = shift;
  return s;
}

ScoreFunction ScoreFunction::sample_distance(std::shared_ptr<const MixturePredictor> predictor,
                                             std::size_t samples, std::uint64_t sample_seed,
                                             double shift) {
  if (!predictor) throw ArgumentError("ScoreFunction: null predictor");
  if (samples == 0) throw ArgumentError("sample_distance: sample count must be positive");
  ScoreFunction s;
  s.kind_ = ScoreKind::sample_distance;
  s.mixture_ = std::move(predictor);
  s.samples_ = samples;
  s.sample_seed_ = sample_seed;
  s.shift_ = shift;
  return s;
}

Index ScoreFunction::response_dim() const {
  return point_ ? point_->response_dim() : mixture_->response_dim();
}

ScoreFunction ScoreFunction::shifted(double extra) const {
  ScoreFunction s = *this;
  s.shift_ += extra;
  return s;
}

std::vector<Vector> ScoreFunction::draw_samples(const Vector& x) const {
  if (kind_ != ScoreKind::sample_distance) throw ArgumentError("draw_samples: not a sample_distance score");
  const GaussianMixture mix = mixture_->predict(x);
  Rng rng(hash_covariate(x, sample_seed_));
  std::vector<Vector> out;
  out.reserve(samples_);
  for (std::size_t i = 0; i < samples_; ++i) out.push_back(mix.sample(rng));
  return out;
}

namespace {

Matrix single_component_chol(const GaussianMixture& mix) {
  if (mix.components() != 1) throw ShapeError("mahalanobis score needs a single-component predictor");
  return mix.chol(0);
}

}  // namespace

double ScoreFunction::operator()(const Vector& x, const Vector& y) const {
  switch (kind_) {
    case ScoreKind::abs_residual: {
      if (y.size() != 1) throw ShapeError("abs_residual: response must be scalar");
      return rcp::abs_residual(point_->predict(x)(0), y(0), shift_);
    }
    case ScoreKind::linf_residual: return rcp::linf_residual(point_->predict(x), y, shift_);
    case ScoreKind::mahalanobis: {
      const GaussianMixture mix = mixture_->predict(x);
      return mahalanobis_chol(mix.mean(0), single_component_chol(mix), y) + shift_;
    }
    case ScoreKind::mixture_nll: return rcp::mixture_nll(mixture_->predict(x), y).value + shift_;
    case ScoreKind::sample_distance: return rcp::sample_distance(draw_samples(x), y) + shift_;
  }
  return 0.0;
}

Vector ScoreFunction::evaluate(const LabeledDataset& data) const {
  Vector out(data.size());
  for (Index i = 0; i < data.size(); ++i) out(i) = (*this)(data.x_row(i), data.y_row(i));
  return out;
}

SetGeometry ScoreFunction::sublevel(const Vector& x, double level) const {
  SetGeometry g;
  g.level = level;
  g.shift = shift_;
  switch (kind_) {
    case ScoreKind::abs_residual:
      g.kind = GeometryKind::interval;
      g.center = point_->predict(x);
      break;
    case ScoreKind::linf_residual:
      g.kind = GeometryKind::hypercube;
      g.center = point_->predict(x);
      break;
    case ScoreKind::mahalanobis: {
      const GaussianMixture mix = mixture_->predict(x);
      g.kind = GeometryKind::ellipsoid;
      g.center = mix.mean(0);
      g.chol = single_component_chol(mix);
      break;
    }
    case ScoreKind::mixture_nll:
      g.kind = GeometryKind::density_superlevel;
      g.mixture = mixture_->predict(x);
      break;
    case ScoreKind::sample_distance:
      g.kind = GeometryKind::ball_union;
      g.centers = draw_samples(x);
      break;
  }
  return g;
}

}  // namespace rcp
