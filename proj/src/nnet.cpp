#include "rcp/nnet.hpp"

#include "binary.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <istream>
#include <limits>
#include <ostream>
#include <span>
#include <sstream>
#include <type_traits>

namespace rcp {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;
constexpr double kDiagFloor = 1e-6;

double sigmoid(double x) noexcept {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Index tri_size(Index d) { return d * (d + 1) / 2; }
Index tri_index(Index i, Index j) { return i * (i + 1) / 2 + j; }

double pinball_slope(double u, double beta) { return u >= 0.0 ? beta : -(1.0 - beta); }

}  // namespace

double softplus(double x) noexcept { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

Index LossSpec::output_dim() const {
  switch (kind) {
    case LossKind::mse: return response_dim;
    case LossKind::pinball: return 1;
    case LossKind::mixture_nll:
      return components + components * response_dim + components * tri_size(response_dim);
  }
  return 0;
}

GaussianMixture decode_mixture(const LossSpec& loss, const Vector& row) {
  const Index k = loss.components;
  const Index d = loss.response_dim;
  if (row.size() != loss.output_dim()) throw ShapeError("decode_mixture: output width mismatch");
  const Vector logits = row.head(k);
  const double mx = logits.maxCoeff();
  Vector w = (logits.array() - mx).exp().matrix();
  w /= w.sum();
  std::vector<Vector> means;
  std::vector<Matrix> chols;
  for (Index c = 0; c < k; ++c) {
    means.emplace_back(row.segment(k + c * d, d));
    Matrix l = Matrix::Zero(d, d);
    const Index base = k + k * d + c * tri_size(d);
    for (Index i = 0; i < d; ++i) {
      for (Index j = 0; j < i; ++j) l(i, j) = row(base + tri_index(i, j));
      l(i, i) = softplus(row(base + tri_index(i, i))) + kDiagFloor;
    }
    chols.push_back(std::move(l));
  }
  // Renormalize against rounding so the mixture constructor's check holds.
  return GaussianMixture(w / w.sum(), std::move(means), std::move(chols));
}

namespace {

double mixture_loss(const LossSpec& loss, const Matrix& out, const Matrix& target, Matrix* d_out) {
  const Index k = loss.components;
  const Index d = loss.response_dim;
  const Index b = out.rows();
  double total = 0.0;
  Vector a(k);
  std::vector<Matrix> ls(static_cast<std::size_t>(k));
  std::vector<Vector> ss(static_cast<std::size_t>(k));
  for (Index r = 0; r < b; ++r) {
    const Vector row = out.row(r).transpose();
    const Vector y = target.row(r).transpose();
    const Vector logits = row.head(k);
    const double zmax = logits.maxCoeff();
    const double zlse = zmax + std::log((logits.array() - zmax).exp().sum());
    for (Index c = 0; c < k; ++c) {
      Matrix l = Matrix::Zero(d, d);
      const Index base = k + k * d + c * tri_size(d);
      double log_det = 0.0;
      for (Index i = 0; i < d; ++i) {
        for (Index j = 0; j < i; ++j) l(i, j) = row(base + tri_index(i, j));
        l(i, i) = softplus(row(base + tri_index(i, i))) + kDiagFloor;
        log_det += std::log(l(i, i));
      }
      const Vector resid = y - row.segment(k + c * d, d);
      Vector s = l.triangularView<Eigen::Lower>().solve(resid);
      a(c) = (logits(c) - zlse) - 0.5 * static_cast<double>(d) * kLog2Pi - log_det - 0.5 * s.squaredNorm();
      ls[static_cast<std::size_t>(c)] = std::move(l);
      ss[static_cast<std::size_t>(c)] = std::move(s);
    }
    const double amax = a.maxCoeff();
    const double lse = amax + std::log((a.array() - amax).exp().sum());
    total -= lse;
    if (d_out) {
      auto g = d_out->row(r);
      for (Index c = 0; c < k; ++c) {
        const double gamma = std::exp(a(c) - lse);
        const double pi = std::exp(logits(c) - zlse);
        g(c) = (pi - gamma) / static_cast<double>(b);
        const Matrix& l = ls[static_cast<std::size_t>(c)];
        const Vector& s = ss[static_cast<std::size_t>(c)];
        // d log N / d mu = L^{-T} s ;  d log N / d L = (L^{-T} s) s^T - diag(1/L_ii)
        const Vector lts = l.transpose().triangularView<Eigen::Upper>().solve(s);
        for (Index i = 0; i < d; ++i) g(k + c * d + i) = -gamma * lts(i) / static_cast<double>(b);
        const Index base = k + k * d + c * tri_size(d);
        for (Index i = 0; i < d; ++i) {
          for (Index j = 0; j < i; ++j) {
            g(base + tri_index(i, j)) = -gamma * lts(i) * s(j) / static_cast<double>(b);
          }
          const double raw = out(r, base + tri_index(i, i));
          const double dl = lts(i) * s(i) - 1.0 / l(i, i);
          g(base + tri_index(i, i)) = -gamma * dl * sigmoid(raw) / static_cast<double>(b);
        }
      }
    }
  }
  return total / static_cast<double>(b);
}

}  // namespace

double evaluate_loss(const LossSpec& loss, const Matrix& out, const Matrix& target, Matrix* d_out) {
  if (out.rows() != target.rows() || out.cols() != loss.output_dim()) {
    throw ShapeError("evaluate_loss: output shape mismatch");
  }
  if (out.rows() == 0) throw SizeError("evaluate_loss: empty batch");
  if (d_out) d_out->setZero(out.rows(), out.cols());
  const auto b = static_cast<double>(out.rows());
  switch (loss.kind) {
    case LossKind::mse: {
      if (target.cols() != loss.response_dim) throw ShapeError("mse: target width mismatch");
      const Matrix diff = out - target;
      const double denom = b * static_cast<double>(diff.cols());
      if (d_out) *d_out = 2.0 * diff / denom;
      return diff.squaredNorm() / denom;
    }
    case LossKind::pinball: {
      if (target.cols() != 1) throw ShapeError("pinball: target must have one column");
      double total = 0.0;
      for (Index r = 0; r < out.rows(); ++r) {
        const double o = out(r, 0);
        const double pred = loss.link == OutputLink::softplus ? softplus(o) : o;
        const double u = target(r, 0) - pred;
        total += u > 0.0 ? loss.beta * u : -(1.0 - loss.beta) * u;
        if (d_out) {
          const double dlink = loss.link == OutputLink::softplus ? sigmoid(o) : 1.0;
          (*d_out)(r, 0) = -pinball_slope(u, loss.beta) * dlink / b;
        }
      }
      return total / b;
    }
    case LossKind::mixture_nll:
      if (target.cols() != loss.response_dim) throw ShapeError("mixture_nll: target width mismatch");
      return mixture_loss(loss, out, target, d_out);
  }
  return 0.0;
}

// ---------------------------------------------------------------------------

Mlp::Mlp(std::vector<Index> widths) : widths_(std::move(widths)) {
  if (widths_.size() < 2) throw ShapeError("Mlp: need at least input and output widths");
  Index total = 0;
  for (std::size_t l = 0; l + 1 < widths_.size(); ++l) {
    if (widths_[l] < 1 || widths_[l + 1] < 1) throw ShapeError("Mlp: widths must be >= 1");
    offsets_.push_back(total);
    total += widths_[l + 1] * widths_[l] + widths_[l + 1];
  }
  params_ = Vector::Zero(total);
}

void Mlp::initialize(Rng& rng) {
  const std::size_t layers = widths_.size() - 1;
  for (std::size_t l = 0; l < layers; ++l) {
    const Index in = widths_[l];
    const Index out = widths_[l + 1];
    const bool last = l + 1 == layers;
    const double limit = last ? std::sqrt(6.0 / static_cast<double>(in + out))
                              : std::sqrt(6.0 / static_cast<double>(in));
    for (Index i = 0; i < in * out; ++i) params_(offsets_[l] + i) = rng.uniform(-limit, limit);
    params_.segment(offsets_[l] + in * out, out).setZero();
  }
}

Matrix Mlp::forward(const Matrix& x) const {
  if (x.cols() != input_dim()) {
    std::ostringstream msg;
    msg << "Mlp::forward: expected " << input_dim() << " input columns, got " << x.cols();
    throw ShapeError(msg.str());
  }
  Matrix a = x.transpose();
  const std::size_t layers = widths_.size() - 1;
  for (std::size_t l = 0; l < layers; ++l) {
    const Index in = widths_[l];
    const Index out = widths_[l + 1];
    Eigen::Map<const Matrix> w(params_.data() + offsets_[l], out, in);
    Eigen::Map<const Vector> bias(params_.data() + offsets_[l] + out * in, out);
    Matrix z = w * a;
    z.colwise() += bias;
    if (l + 1 < layers) z = z.cwiseMax(0.0);
    a = std::move(z);
  }
  return a.transpose();
}

double Mlp::min_hidden_preactivation(const Matrix& x) const {
  if (x.cols() != input_dim()) throw ShapeError("Mlp: input width mismatch");
  double closest = std::numeric_limits<double>::infinity();
  Matrix a = x.transpose();
  const std::size_t layers = widths_.size() - 1;
  for (std::size_t l = 0; l + 1 < layers; ++l) {
    const Index in = widths_[l];
    const Index out = widths_[l + 1];
    Eigen::Map<const Matrix> w(params_.data() + offsets_[l], out, in);
    Eigen::Map<const Vector> bias(params_.data() + offsets_[l] + out * in, out);
    Matrix z = w * a;
    z.colwise() += bias;
    closest = std::min(closest, z.cwiseAbs().minCoeff());
    a = z.cwiseMax(0.0);
  }
  return closest;
}

double Mlp::loss_and_gradient(const Matrix& x, const Matrix& y, const LossSpec& loss, Vector* grad) const {
  if (x.cols() != input_dim()) throw ShapeError("Mlp: input width mismatch");
  if (loss.output_dim() != output_dim()) throw ShapeError("Mlp: loss head does not match output width");
  const std::size_t layers = widths_.size() - 1;
  std::vector<Matrix> acts;  // acts[l] is the input to layer l (features x batch)
  acts.reserve(layers + 1);
  acts.push_back(x.transpose());
  for (std::size_t l = 0; l < layers; ++l) {
    const Index in = widths_[l];
    const Index out = widths_[l + 1];
    Eigen::Map<const Matrix> w(params_.data() + offsets_[l], out, in);
    Eigen::Map<const Vector> bias(params_.data() + offsets_[l] + out * in, out);
    Matrix z = w * acts.back();
    z.colwise() += bias;
    if (l + 1 < layers) z = z.cwiseMax(0.0);
    acts.push_back(std::move(z));
  }
  const Matrix out_rows = acts.back().transpose();
  if (!grad) return evaluate_loss(loss, out_rows, y, nullptr);

  Matrix d_out;
  const double value = evaluate_loss(loss, out_rows, y, &d_out);
  grad->setZero(params_.size());
  Matrix delta = d_out.transpose();
  for (std::size_t l = layers; l-- > 0;) {
    const Index in = widths_[l];
    const Index out = widths_[l + 1];
    Eigen::Map<Matrix> gw(grad->data() + offsets_[l], out, in);
    Eigen::Map<Vector> gb(grad->data() + offsets_[l] + out * in, out);
    gw.noalias() = delta * acts[l].transpose();
    gb = delta.rowwise().sum();
    if (l > 0) {
      Eigen::Map<const Matrix> w(params_.data() + offsets_[l], out, in);
      Matrix prev = w.transpose() * delta;
      prev = prev.cwiseProduct((acts[l].array() > 0.0).cast<double>().matrix());
      delta = std::move(prev);
    }
  }
  return value;
}

std::vector<Index> NetConfig::widths(Index input_dim) const {
  std::vector<Index> w;
  w.push_back(input_dim);
  w.insert(w.end(), hidden.begin(), hidden.end());
  w.push_back(loss.output_dim());
  return w;
}

Adam::Adam(Index n, double learning_rate) : lr_(learning_rate), m_(Vector::Zero(n)), v_(Vector::Zero(n)) {
  if (!(learning_rate > 0.0)) throw ArgumentError("Adam: learning rate must be positive");
}

void Adam::step(Vector& params, const Vector& grad) {
  ++t_;
  m_ = beta1_ * m_ + (1.0 - beta1_) * grad;
  v_ = beta2_ * v_ + (1.0 - beta2_) * grad.cwiseProduct(grad);
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  params.array() -= lr_ * (m_.array() / c1) / ((v_.array() / c2).sqrt() + eps_);
}

namespace {

Matrix gather_rows(const Matrix& m, std::span<const std::size_t> rows) {
  Matrix out(static_cast<Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Index>(i)) = m.row(static_cast<Index>(rows[i]));
  return out;
}

}  // namespace

TrainResult train(Mlp& net, const Matrix& x, const Matrix& y, const NetConfig& config, Rng& rng) {
  if (x.rows() == 0) throw SizeError("train: empty dataset");
  if (x.rows() != y.rows()) throw ShapeError("train: x and y row counts differ");
  if (config.batch_size < 1 || config.max_epochs < 1) throw ArgumentError("train: invalid batch size or epochs");
  const auto n = static_cast<std::size_t>(x.rows());
  auto n_val = static_cast<std::size_t>(std::floor(config.validation_fraction * static_cast<double>(n)));
  if (n_val >= n) n_val = 0;

  auto perm = rng.permutation(n);
  const std::vector<std::size_t> val_rows(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_val));
  std::vector<std::size_t> train_rows(perm.begin() + static_cast<std::ptrdiff_t>(n_val), perm.end());
  const Matrix x_val = n_val > 0 ? gather_rows(x, val_rows) : gather_rows(x, train_rows);
  const Matrix y_val = n_val > 0 ? gather_rows(y, val_rows) : gather_rows(y, train_rows);

  Adam adam(net.parameter_count(), config.learning_rate);
  TrainResult result;
  Vector best = net.parameters();
  double best_loss = net.loss_and_gradient(x_val, y_val, config.loss, nullptr);
  if (!std::isfinite(best_loss)) throw TrainingError("train: initial loss is not finite");
  result.best_loss = best_loss;
  Index since_best = 0;
  Vector grad;
  const auto batch = static_cast<std::size_t>(config.batch_size);

  for (Index epoch = 0; epoch < config.max_epochs; ++epoch) {
    rng.shuffle(train_rows);
    double epoch_loss = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < train_rows.size(); start += batch) {
      const std::size_t len = std::min(batch, train_rows.size() - start);
      const std::span<const std::size_t> rows(train_rows.data() + start, len);
      const double l = net.loss_and_gradient(gather_rows(x, rows), gather_rows(y, rows), config.loss, &grad);
      if (!std::isfinite(l) || !grad.allFinite()) {
        std::ostringstream msg;
        msg << "train: non-finite loss at epoch " << epoch << " batch " << batches
            << "; last finite validation loss " << result.best_loss << " (epoch " << result.best_epoch << ")";
        net.parameters() = best;
        throw TrainingError(msg.str());
      }
      adam.step(net.parameters(), grad);
      epoch_loss += l;
      ++batches;
    }
    const double val = net.loss_and_gradient(x_val, y_val, config.loss, nullptr);
    if (!std::isfinite(val)) {
      std::ostringstream msg;
      msg << "train: non-finite validation loss at epoch " << epoch << "; best " << result.best_loss;
      net.parameters() = best;
      throw TrainingError(msg.str());
    }
    result.train_loss.push_back(epoch_loss / static_cast<double>(std::max<std::size_t>(batches, 1)));
    result.val_loss.push_back(val);
    if (val < best_loss) {
      best_loss = val;
      best = net.parameters();
      result.best_epoch = epoch;
      since_best = 0;
    } else if (++since_best >= config.patience) {
      result.best_so_far.push_back(best_loss);
      break;
    }
    result.best_so_far.push_back(best_loss);
  }
  result.best_loss = best_loss;
  net.parameters() = best;
  return result;
}

double grad_check(const Mlp& net, const LossSpec& loss, const Matrix& x, const Matrix& y, double step) {
  Vector analytic;
  net.loss_and_gradient(x, y, loss, &analytic);
  Mlp probe = net;
  double worst = 0.0;
  for (Index i = 0; i < probe.parameter_count(); ++i) {
    const double saved = probe.parameters()(i);
    probe.parameters()(i) = saved + step;
    const double up = probe.loss_and_gradient(x, y, loss, nullptr);
    probe.parameters()(i) = saved - step;
    const double down = probe.loss_and_gradient(x, y, loss, nullptr);
    probe.parameters()(i) = saved;
    const double fd = (up - down) / (2.0 * step);
    const double err = std::abs(analytic(i) - fd) / (std::abs(analytic(i)) + std::abs(fd) + 1e-8);
    worst = std::max(worst, err);
  }
  return worst;
}

// ---------------------------------------------------------------------------
// Snapshot I/O

namespace {

constexpr char kMagic[4] = {'R', 'C', 'P', 'N'};
constexpr std::uint16_t kVersion = 1;

}  // namespace

using detail::get_le;
using detail::put_le;

void write_snapshot(std::ostream& out, const NetSnapshot& snap) {
  out.write(kMagic, 4);
  put_le<std::uint16_t>(out, kVersion);
  put_le<std::uint8_t>(out, static_cast<std::uint8_t>(snap.loss.kind));
  put_le<std::uint8_t>(out, static_cast<std::uint8_t>(snap.loss.link));
  put_le<double>(out, snap.loss.beta);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(snap.loss.components));
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(snap.loss.response_dim));
  const auto& widths = snap.net.widths();
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(widths.size()));
  for (Index w : widths) put_le<std::uint32_t>(out, static_cast<std::uint32_t>(w));
  put_le<std::uint64_t>(out, static_cast<std::uint64_t>(snap.net.parameter_count()));
  for (Index i = 0; i < snap.net.parameter_count(); ++i) put_le<double>(out, snap.net.parameters()(i));
  put_le<std::uint64_t>(out, snap.aux.size());
  for (double v : snap.aux) put_le<double>(out, v);
  if (!out) throw IoError("write_snapshot: stream error");
}

NetSnapshot read_snapshot(std::istream& in) {
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0) throw ParseError("snapshot: bad magic bytes");
  const auto version = get_le<std::uint16_t>(in);
  if (version != kVersion) throw ParseError("snapshot: unsupported version " + std::to_string(version));
  NetSnapshot snap;
  const auto kind = get_le<std::uint8_t>(in);
  const auto link = get_le<std::uint8_t>(in);
  if (kind > 2 || link > 1) throw ParseError("snapshot: bad loss descriptor");
  snap.loss.kind = static_cast<LossKind>(kind);
  snap.loss.link = static_cast<OutputLink>(link);
  snap.loss.beta = get_le<double>(in);
  snap.loss.components = get_le<std::uint32_t>(in);
  snap.loss.response_dim = get_le<std::uint32_t>(in);
  const auto layers = get_le<std::uint32_t>(in);
  if (layers < 2 || layers > 1024) throw ParseError("snapshot: bad layer count");
  std::vector<Index> widths;
  for (std::uint32_t i = 0; i < layers; ++i) widths.push_back(get_le<std::uint32_t>(in));
  snap.net = Mlp(widths);
  const auto count = get_le<std::uint64_t>(in);
  if (count != static_cast<std::uint64_t>(snap.net.parameter_count())) throw ParseError("snapshot: parameter count mismatch");
  for (Index i = 0; i < snap.net.parameter_count(); ++i) snap.net.parameters()(i) = get_le<double>(in);
  const auto aux = get_le<std::uint64_t>(in);
  if (aux > (1u << 24)) throw ParseError("snapshot: aux block too large");
  snap.aux.resize(aux);
  for (auto& v : snap.aux) v = get_le<double>(in);
  if (snap.loss.output_dim() != snap.net.output_dim()) throw ParseError("snapshot: head does not match network");
  return snap;
}

std::vector<double> pack_standardizers(const Standardizer& a, const Standardizer& b) {
  std::vector<double> aux;
  for (const Standardizer* s : {&a, &b}) {
    aux.insert(aux.end(), s->mean().data(), s->mean().data() + s->mean().size());
    aux.insert(aux.end(), s->scale().data(), s->scale().data() + s->scale().size());
  }
  return aux;
}

std::pair<Standardizer, Standardizer> unpack_standardizers(const std::vector<double>& aux, Index a_dim, Index b_dim) {
  if (static_cast<Index>(aux.size()) != 2 * (a_dim + b_dim)) throw ParseError("snapshot: standardizer block size");
  const double* p = aux.data();
  auto take = [&p](Index n) {
    Vector v = Eigen::Map<const Vector>(p, n);
    p += n;
    return v;
  };
  Vector am = take(a_dim);
  Vector as = take(a_dim);
  Vector bm = take(b_dim);
  Vector bs = take(b_dim);
  return {Standardizer(std::move(am), std::move(as)), Standardizer(std::move(bm), std::move(bs))};
}

// ---------------------------------------------------------------------------

MeanNetPredictor::MeanNetPredictor(Mlp net, Standardizer x_std, Standardizer y_std)
    : net_(std::move(net)), x_std_(std::move(x_std)), y_std_(std::move(y_std)) {}

std::shared_ptr<MeanNetPredictor> MeanNetPredictor::fit(const LabeledDataset& train, NetConfig config,
                                                        TrainResult* result) {
  config.loss = LossSpec::mse(train.response_dim());
  Standardizer xs = Standardizer::fit(train.x());
  Standardizer ys = Standardizer::fit(train.y());
  Rng rng(config.seed);
  Mlp net(config.widths(train.covariate_dim()));
  net.initialize(rng);
  TrainResult r = rcp::train(net, xs.transform(train.x()), ys.transform(train.y()), config, rng);
  if (result) *result = std::move(r);
  return std::make_shared<MeanNetPredictor>(std::move(net), std::move(xs), std::move(ys));
}

Vector MeanNetPredictor::predict(const Vector& x) const {
  const Matrix row = x_std_.transform(x).transpose();
  return y_std_.inverse(Vector(net_.forward(row).row(0).transpose()));
}

Matrix MeanNetPredictor::predict_batch(const Matrix& x) const {
  return y_std_.inverse(net_.forward(x_std_.transform(x)));
}

NetSnapshot MeanNetPredictor::snapshot() const {
  return {net_, LossSpec::mse(net_.output_dim()), pack_standardizers(x_std_, y_std_)};
}

std::shared_ptr<MeanNetPredictor> MeanNetPredictor::from_snapshot(const NetSnapshot& snap) {
  if (snap.loss.kind != LossKind::mse) throw ParseError("mean_net snapshot must carry an mse head");
  auto [xs, ys] = unpack_standardizers(snap.aux, snap.net.input_dim(), snap.net.output_dim());
  return std::make_shared<MeanNetPredictor>(snap.net, std::move(xs), std::move(ys));
}

MixtureNetPredictor::MixtureNetPredictor(Mlp net, LossSpec loss, Standardizer x_std, Standardizer y_std)
    : net_(std::move(net)), loss_(loss), x_std_(std::move(x_std)), y_std_(std::move(y_std)) {}

std::shared_ptr<MixtureNetPredictor> MixtureNetPredictor::fit(const LabeledDataset& train, Index components,
                                                              NetConfig config, TrainResult* result) {
  config.loss = LossSpec::mixture(components, train.response_dim());
  Standardizer xs = Standardizer::fit(train.x());
  Standardizer ys = Standardizer::fit(train.y());
  Rng rng(config.seed);
  Mlp net(config.widths(train.covariate_dim()));
  net.initialize(rng);
  TrainResult r = rcp::train(net, xs.transform(train.x()), ys.transform(train.y()), config, rng);
  if (result) *result = std::move(r);
  return std::make_shared<MixtureNetPredictor>(std::move(net), config.loss, std::move(xs), std::move(ys));
}

GaussianMixture MixtureNetPredictor::predict(const Vector& x) const {
  const Matrix row = x_std_.transform(x).transpose();
  const GaussianMixture z = decode_mixture(loss_, net_.forward(row).row(0).transpose());
  std::vector<Vector> means;
  std::vector<Matrix> chols;
  for (Index k = 0; k < z.components(); ++k) {
    means.push_back(y_std_.inverse(z.mean(k)));
    chols.push_back(y_std_.scale().asDiagonal() * z.chol(k));
  }
  return GaussianMixture(z.weights(), std::move(means), std::move(chols));
}

NetSnapshot MixtureNetPredictor::snapshot() const { return {net_, loss_, pack_standardizers(x_std_, y_std_)}; }

std::shared_ptr<MixtureNetPredictor> MixtureNetPredictor::from_snapshot(const NetSnapshot& snap) {
  if (snap.loss.kind != LossKind::mixture_nll) throw ParseError("mixture_net snapshot must carry a mixture head");
  auto [xs, ys] = unpack_standardizers(snap.aux, snap.net.input_dim(), snap.loss.response_dim);
  return std::make_shared<MixtureNetPredictor>(snap.net, snap.loss, std::move(xs), std::move(ys));
}

}  // namespace rcp
