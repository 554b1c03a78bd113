#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <vector>

#include "rcp/core.hpp"
#include "rcp/mixture.hpp"
#include "rcp/scores.hpp"

namespace rcp {

enum class LossKind { mse, pinball, mixture_nll };

/// Map from the last linear layer to the pinball prediction.
enum class OutputLink { identity, softplus };

/// Loss attached to the network head. Network outputs are laid out as
///   mse:         d values
///   pinball:     1 value (passed through `link`)
///   mixture_nll: K logits, K*d means, K*d(d+1)/2 Cholesky entries
///                (row-major lower triangle; diagonal through softplus).
struct LossSpec {
  LossKind kind = LossKind::mse;
  double beta = 0.9;
  Index components = 1;
  Index response_dim = 1;
  OutputLink link = OutputLink::identity;

  static LossSpec mse(Index d) { return {LossKind::mse, 0.9, 1, d, OutputLink::identity}; }
  static LossSpec pinball(double beta, OutputLink link = OutputLink::identity) {
    return {LossKind::pinball, beta, 1, 1, link};
  }
  static LossSpec mixture(Index k, Index d) { return {LossKind::mixture_nll, 0.9, k, d, OutputLink::identity}; }

  Index output_dim() const;
};

/// Mean loss over the rows of `out` (B x output_dim) against `target` (B x d).
/// If `d_out` is given it receives d(loss)/d(out).
double evaluate_loss(const LossSpec& loss, const Matrix& out, const Matrix& target, Matrix* d_out);

/// Mixture encoded in one output row of a mixture_nll head.
GaussianMixture decode_mixture(const LossSpec& loss, const Vector& row);

double softplus(double x) noexcept;

/// Dense feed-forward network: ReLU hidden layers, linear output layer.
/// All weights live in one flat parameter vector (per layer: W column-major, then b).
class Mlp {
 public:
  Mlp() = default;
  explicit Mlp(std::vector<Index> widths);

  /// He-uniform weights, zero biases.
  void initialize(Rng& rng);

  const std::vector<Index>& widths() const noexcept { return widths_; }
  Index input_dim() const { return widths_.front(); }
  Index output_dim() const { return widths_.back(); }
  Index parameter_count() const noexcept { return params_.size(); }

  Vector& parameters() noexcept { return params_; }
  const Vector& parameters() const noexcept { return params_; }

  /// x is B x input_dim; returns B x output_dim.
  Matrix forward(const Matrix& x) const;

  /// Smallest |pre-activation| over hidden units and rows: the distance of the
  /// batch from the ReLU kinks, where finite differences are unreliable.
  double min_hidden_preactivation(const Matrix& x) const;

  /// Loss on the batch; fills `grad` (same size as parameters) when non-null.
  double loss_and_gradient(const Matrix& x, const Matrix& y, const LossSpec& loss, Vector* grad) const;

 private:
  std::vector<Index> widths_;
  std::vector<Index> offsets_;
  Vector params_;
};

struct NetConfig {
  std::vector<Index> hidden = {100, 100, 100};
  LossSpec loss;
  double learning_rate = 1e-3;
  Index batch_size = 128;
  Index max_epochs = 200;
  Index patience = 20;
  double validation_fraction = 0.2;
  std::uint64_t seed = 0;

  /// Full width list [input, hidden..., loss output].
  std::vector<Index> widths(Index input_dim) const;
};

struct TrainResult {
  std::vector<double> train_loss;   // mean minibatch loss per epoch
  std::vector<double> val_loss;     // early-stopping loss per epoch
  std::vector<double> best_so_far;  // running minimum of val_loss
  Index best_epoch = 0;
  double best_loss = 0.0;
};

/// Adam with the usual defaults (beta1 0.9, beta2 0.999, eps 1e-8).
class Adam {
 public:
  Adam(Index n, double learning_rate);
  void step(Vector& params, const Vector& grad);

 private:
  double lr_;
  double beta1_ = 0.9;
  double beta2_ = 0.999;
  double eps_ = 1e-8;
  long t_ = 0;
  Vector m_;
  Vector v_;
};

/// Minibatch Adam on `config.loss`. A `validation_fraction` share of rows is
/// held out for early stopping; the parameters at the best validation loss are
/// restored. Throws TrainingError if the loss becomes non-finite.
TrainResult train(Mlp& net, const Matrix& x, const Matrix& y, const NetConfig& config, Rng& rng);

/// Max over parameters of |analytic - central difference| / (|analytic| + |fd| + 1e-8).
double grad_check(const Mlp& net, const LossSpec& loss, const Matrix& x, const Matrix& y, double step = 1e-5);

// ---------------------------------------------------------------------------
// Binary snapshot: "RCPN", u16 version, u8 loss kind, u8 link, f64 beta,
// u32 components, u32 response dim, u32 layer count, u32 widths...,
// u64 parameter count, f64 parameters..., u64 aux count, f64 aux...
// All integers and doubles little-endian.

struct NetSnapshot {
  Mlp net;
  LossSpec loss;
  std::vector<double> aux;
};

void write_snapshot(std::ostream& out, const NetSnapshot& snap);
NetSnapshot read_snapshot(std::istream& in);

// ---------------------------------------------------------------------------
// Base predictors backed by networks. Inputs and targets are z-scored
// internally with statistics of the training rows.

class MeanNetPredictor final : public PointPredictor {
 public:
  MeanNetPredictor(Mlp net, Standardizer x_std, Standardizer y_std);

  static std::shared_ptr<MeanNetPredictor> fit(const LabeledDataset& train, NetConfig config,
                                               TrainResult* result = nullptr);

  Vector predict(const Vector& x) const override;
  Matrix predict_batch(const Matrix& x) const;
  Index response_dim() const override { return net_.output_dim(); }
  std::string tag() const override { return "mean_net"; }

  NetSnapshot snapshot() const;
  static std::shared_ptr<MeanNetPredictor> from_snapshot(const NetSnapshot& snap);

 private:
  Mlp net_;
  Standardizer x_std_;
  Standardizer y_std_;
};

class MixtureNetPredictor final : public MixturePredictor {
 public:
  MixtureNetPredictor(Mlp net, LossSpec loss, Standardizer x_std, Standardizer y_std);

  static std::shared_ptr<MixtureNetPredictor> fit(const LabeledDataset& train, Index components,
                                                  NetConfig config, TrainResult* result = nullptr);

  GaussianMixture predict(const Vector& x) const override;
  Index response_dim() const override { return loss_.response_dim; }
  std::string tag() const override { return "mixture_net"; }

  NetSnapshot snapshot() const;
  static std::shared_ptr<MixtureNetPredictor> from_snapshot(const NetSnapshot& snap);

 private:
  Mlp net_;
  LossSpec loss_;
  Standardizer x_std_;
  Standardizer y_std_;
};

/// Flattens two standardizers into snapshot aux data and back.
std::vector<double> pack_standardizers(const Standardizer& a, const Standardizer& b);
std::pair<Standardizer, Standardizer> unpack_standardizers(const std::vector<double>& aux, Index a_dim, Index b_dim);

}  // namespace rcp
