#pragma once

#include <functional>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "rcp/core.hpp"
#include "rcp/mixture.hpp"

namespace rcp {

// ---------------------------------------------------------------------------
// Base predictors consumed by the score functions.

class PointPredictor {
 public:
  virtual ~PointPredictor() = default;
  virtual Vector predict(const Vector& x) const = 0;
  virtual Index response_dim() const = 0;
  /// Identifier used by the model container; empty if not serializable.
  virtual std::string tag() const { return {}; }
};

class MixturePredictor {
 public:
  virtual ~MixturePredictor() = default;
  virtual GaussianMixture predict(const Vector& x) const = 0;
  virtual Index response_dim() const = 0;
  virtual std::string tag() const { return {}; }
};

/// Point predictor backed by an arbitrary callable.
class FunctionPointPredictor final : public PointPredictor {
 public:
  FunctionPointPredictor(std::function<Vector(const Vector&)> fn, Index response_dim,
                         std::string tag = {})
      : fn_(std::move(fn)), dim_(response_dim), tag_(std::move(tag)) {}
  Vector predict(const Vector& x) const override { return fn_(x); }
  Index response_dim() const override { return dim_; }
  std::string tag() const override { return tag_; }

 private:
  std::function<Vector(const Vector&)> fn_;
  Index dim_;
  std::string tag_;
};

// ---------------------------------------------------------------------------
// Raw score formulas.

double abs_residual(double mu, double y, double shift = 0.0);
double linf_residual(const Vector& mu, const Vector& y, double shift = 0.0);
/// sqrt((y-mu)^T cov^{-1} (y-mu)); DecompositionError if cov is not SPD.
double mahalanobis(const Vector& mu, const Matrix& cov, const Vector& y);
/// Same distance from a precomputed lower Cholesky factor of cov.
double mahalanobis_chol(const Vector& mu, const Matrix& chol, const Vector& y);

/// -log p(y) is clamped here so that order statistics stay well defined.
inline constexpr double kNllSaturation = 1e12;

struct NllValue {
  double value = 0.0;
  bool saturated = false;
};

NllValue mixture_nll(const GaussianMixture& mixture, const Vector& y);
double sample_distance(const std::vector<Vector>& samples, const Vector& y);

// ---------------------------------------------------------------------------

enum class ScoreKind { abs_residual, linf_residual, mahalanobis, mixture_nll, sample_distance };

std::string to_string(ScoreKind kind);
ScoreKind parse_score_kind(const std::string& name);

/// Whether a score kind can take negative values.
bool score_is_nonnegative(ScoreKind kind);

enum class GeometryKind { interval, hypercube, ellipsoid, density_superlevel, ball_union };

std::string to_string(GeometryKind kind);

/// The set {y : V(x, y) <= level} for one fixed x.
///
/// Membership is decided with the same arithmetic as the score itself
/// (raw distance + shift <= level), so contains(y) agrees bit-for-bit with
/// comparing the score against the level.
struct SetGeometry {
  GeometryKind kind = GeometryKind::interval;
  double level = 0.0;
  double shift = 0.0;
  Vector center;                 // interval, hypercube, ellipsoid
  Matrix chol;                   // ellipsoid: Cholesky factor of the covariance
  GaussianMixture mixture;       // density_superlevel
  std::vector<Vector> centers;   // ball_union

  /// Half-width, radius or negative log density cutoff in raw-score units.
  double radius() const noexcept { return level - shift; }
  bool empty() const noexcept { return radius() < 0.0; }
  bool unbounded() const noexcept { return level == std::numeric_limits<double>::infinity(); }
  Index dim() const;
  bool contains(const Vector& y) const;
};

/// Conformity score V(x, y) + shift, together with its sublevel geometry.
/// Immutable; copies share the underlying predictor.
class ScoreFunction {
 public:
  static ScoreFunction abs_residual(std::shared_ptr<const PointPredictor> predictor, double shift = 0.0);
  static ScoreFunction linf_residual(std::shared_ptr<const PointPredictor> predictor, double shift = 0.0);
  /// Uses a single-component mixture predictor as the (mean, covariance) model.
  static ScoreFunction mahalanobis(std::shared_ptr<const MixturePredictor> predictor, double shift = 0.0);
  static ScoreFunction mixture_nll(std::shared_ptr<const MixturePredictor> predictor, double shift = 0.0);
  /// PCP-style score: distance to the nearest of `samples` draws from the
  /// predicted mixture. Draws depend only on (x, sample_seed).
  static ScoreFunction sample_distance(std::shared_ptr<const MixturePredictor> predictor,
                                       std::size_t samples = 50, std::uint64_t sample_seed = 0,
                                       double shift = 0.0);

  ScoreKind kind() const noexcept { return kind_; }
  double shift() const noexcept { return shift_; }
  std::size_t sample_count() const noexcept { return samples_; }
  std::uint64_t sample_seed() const noexcept { return sample_seed_; }
  Index response_dim() const;

  /// Same score with `extra` added to the shift.
  ScoreFunction shifted(double extra) const;

  double operator()(const Vector& x, const Vector& y) const;
  /// Scores every row of a dataset.
  Vector evaluate(const LabeledDataset& data) const;

  SetGeometry sublevel(const Vector& x, double level) const;

  std::vector<Vector> draw_samples(const Vector& x) const;

  const std::shared_ptr<const PointPredictor>& point_predictor() const noexcept { return point_; }
  const std::shared_ptr<const MixturePredictor>& mixture_predictor() const noexcept { return mixture_; }

 private:
  ScoreFunction() = default;

  ScoreKind kind_ = ScoreKind::abs_residual;
  double shift_ = 0.0;
  std::shared_ptr<const PointPredictor> point_;
  std::shared_ptr<const MixturePredictor> mixture_;
  std::size_t samples_ = 0;
  std::uint64_t sample_seed_ = 0;
};

/// Seed derived from the bit patterns of x, used for per-input deterministic draws.
std::uint64_t hash_covariate(const Vector& x, std::uint64_t seed);

}  // namespace rcp
