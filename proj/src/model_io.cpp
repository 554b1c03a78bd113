#include "rcp/model_io.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include "binary.hpp"
#include "rcp/datagen.hpp"
#include "rcp/nnet.hpp"

namespace rcp {

using detail::get_le;
using detail::put_le;

namespace {

constexpr const char* kFormat = "rcp-model 1";

std::string fmt(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  std::ostringstream s;
  s.precision(17);
  s << v;
  return s.str();
}

double parse_num(const std::map<std::string, std::string>& h, const std::string& key) {
  const auto it = h.find(key);
  if (it == h.end()) throw ParseError("model header lacks '" + key + "'");
  if (it->second == "inf") return std::numeric_limits<double>::infinity();
  if (it->second == "-inf") return -std::numeric_limits<double>::infinity();
  try {
    std::size_t used = 0;
    const double v = std::stod(it->second, &used);
    if (used != it->second.size()) throw ParseError("");
    return v;
  } catch (const std::exception&) {
    throw ParseError("model header: '" + key + "' is not a number");
  }
}

const std::string& get(const std::map<std::string, std::string>& h, const std::string& key) {
  const auto it = h.find(key);
  if (it == h.end()) throw ParseError("model header lacks '" + key + "'");
  return it->second;
}

void put_section(std::ostream& out, const char tag[4], const std::string& payload) {
  out.write(tag, 4);
  put_le<std::uint64_t>(out, payload.size());
  out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
}

void put_vector(std::ostream& out, const Vector& v) {
  put_le<std::uint64_t>(out, static_cast<std::uint64_t>(v.size()));
  for (Index i = 0; i < v.size(); ++i) put_le<double>(out, v(i));
}

Vector get_vector(std::istream& in) {
  const auto n = get_le<std::uint64_t>(in);
  if (n > (1ull << 32)) throw ParseError("model: vector length out of range");
  Vector v(static_cast<Index>(n));
  for (Index i = 0; i < v.size(); ++i) v(i) = get_le<double>(in);
  return v;
}

std::string snapshot_bytes(const NetSnapshot& snap) {
  std::ostringstream s(std::ios::binary);
  write_snapshot(s, snap);
  return s.str();
}

std::string estimator_payload(const QuantileEstimator& est, std::string* tag) {
  std::ostringstream s(std::ios::binary);
  if (const auto* c = dynamic_cast<const ConstantEstimator*>(&est)) {
    *tag = "constant";
    put_le<double>(s, c->level().beta);
    put_le<double>(s, c->value());
  } else if (const auto* k = dynamic_cast<const LocalKernelEstimator*>(&est)) {
    *tag = "local_kernel";
    put_le<double>(s, k->level().beta);
    put_le<double>(s, k->bandwidth());
    put_le<std::uint64_t>(s, static_cast<std::uint64_t>(k->support_x().cols()));
    put_vector(s, Eigen::Map<const Vector>(k->support_x().data(), k->support_x().size()));
    put_vector(s, k->support_v());
  } else if (const auto* n = dynamic_cast<const PinballNetEstimator*>(&est)) {
    *tag = "pinball_net";
    write_snapshot(s, n->snapshot());
  } else if (const auto* t = dynamic_cast<const ToyQuantileEstimator*>(&est)) {
    *tag = "toy_oracle";
    put_le<double>(s, t->alpha());
    put_le<double>(s, t->contamination().omega);
    put_le<std::uint64_t>(s, t->contamination().seed);
  } else {
    throw ArgumentError("save_model: this quantile estimator cannot be serialized");
  }
  return s.str();
}

EstimatorPtr read_estimator(const std::string& tag, const std::string& payload) {
  std::istringstream s(payload, std::ios::binary);
  if (tag == "constant") {
    const double beta = get_le<double>(s);
    return std::make_shared<ConstantEstimator>(get_le<double>(s), PinballLevel(beta));
  }
  if (tag == "local_kernel") {
    const double beta = get_le<double>(s);
    const double h = get_le<double>(s);
    const auto p = static_cast<Index>(get_le<std::uint64_t>(s));
    const Vector flat = get_vector(s);
    const Vector v = get_vector(s);
    if (p < 1 || flat.size() != p * v.size()) throw ParseError("model: kernel support shape mismatch");
    const Matrix x = Eigen::Map<const Matrix>(flat.data(), v.size(), p);
    return std::make_shared<LocalKernelEstimator>(x, v, h, PinballLevel(beta));
  }
  if (tag == "pinball_net") return PinballNetEstimator::from_snapshot(read_snapshot(s));
  if (tag == "toy_oracle") {
    const double alpha = get_le<double>(s);
    ContaminationSpec c;
    c.omega = get_le<double>(s);
    c.seed = get_le<std::uint64_t>(s);
    return std::make_shared<ToyQuantileEstimator>(alpha, c);
  }
  throw ParseError("model: unknown estimator tag '" + tag + "'");
}

bool uses_point_predictor(ScoreKind k) { return k == ScoreKind::abs_residual || k == ScoreKind::linf_residual; }

}  // namespace

const ScoreFunction& ModelBundle::score() const { return rcp ? rcp->score() : scp.value().score(); }
double ModelBundle::alpha() const { return rcp ? rcp->alpha() : scp.value().alpha(); }
double ModelBundle::threshold() const { return rcp ? rcp->threshold() : scp.value().threshold(); }

bool ModelBundle::contains(const Vector& x, const Vector& y) const {
  const Vector z = covariates.transform(x);
  return rcp ? rcp->contains(z, y) : scp.value().contains(z, y);
}

SetGeometry ModelBundle::set(const Vector& x) const {
  const Vector z = covariates.transform(x);
  return rcp ? rcp->set(z) : scp.value().set(z);
}

double ModelBundle::base_level(const Vector& x) const {
  return rcp ? rcp->base_level(covariates.transform(x)) : scp.value().threshold();
}

void save_model(std::ostream& out, const ModelBundle& model) {
  if (model.scp.has_value() == model.rcp.has_value()) throw ArgumentError("save_model: exactly one model expected");
  const ScoreFunction& score = model.score();
  const bool point = uses_point_predictor(score.kind());
  const std::string pred_tag = point ? score.point_predictor()->tag() : score.mixture_predictor()->tag();

  std::ostringstream head;
  head << "format=" << kFormat << '\n';
  head << "method=" << (model.is_rcp() ? "rcp" : "scp") << '\n';
  head << "score=" << to_string(score.kind()) << '\n';
  head << "shift=" << fmt(score.shift()) << '\n';
  head << "samples=" << score.sample_count() << '\n';
  head << "sample_seed=" << score.sample_seed() << '\n';
  head << "alpha=" << fmt(model.alpha()) << '\n';
  head << "threshold=" << fmt(model.threshold()) << '\n';
  head << "predictor=" << pred_tag << '\n';
  std::string est_tag;
  std::string est_payload;
  if (model.rcp) {
    est_payload = estimator_payload(*model.rcp->estimator(), &est_tag);
    head << "family=" << to_string(model.rcp->family().kind()) << '\n';
    head << "estimator=" << est_tag << '\n';
    head << "raw_space=" << (model.rcp->raw_space() ? 1 : 0) << '\n';
  }
  head << "END_HEADER\n";
  out << head.str();

  std::ostringstream xs(std::ios::binary);
  put_vector(xs, model.covariates.mean());
  put_vector(xs, model.covariates.scale());
  put_section(out, "XSTD", xs.str());

  if (pred_tag == "mean_net") {
    const auto* p = dynamic_cast<const MeanNetPredictor*>(score.point_predictor().get());
    put_section(out, "PRED", snapshot_bytes(p->snapshot()));
  } else if (pred_tag == "mixture_net") {
    const auto* p = dynamic_cast<const MixtureNetPredictor*>(score.mixture_predictor().get());
    put_section(out, "PRED", snapshot_bytes(p->snapshot()));
  } else if (pred_tag != "toy_oracle") {
    throw ArgumentError("save_model: predictor '" + pred_tag + "' cannot be serialized");
  }
  if (model.rcp) put_section(out, "ESTM", est_payload);
  put_section(out, "END.", "");
  if (!out) throw IoError("save_model: write failed");
}

void save_model(const std::string& path, const ModelBundle& model) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  save_model(out, model);
}

ModelBundle load_model(std::istream& in) {
  std::map<std::string, std::string> h;
  std::string line;
  bool closed = false;
  while (std::getline(in, line)) {
    if (line == "END_HEADER") {
      closed = true;
      break;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError("model header: malformed line '" + line + "'");
    h[line.substr(0, eq)] = line.substr(eq + 1);
  }
  if (!closed) throw ParseError("model header: missing END_HEADER");
  if (get(h, "format") != kFormat) throw ParseError("model: unsupported format '" + get(h, "format") + "'");

  std::map<std::string, std::string> sections;
  while (true) {
    char tag[4];
    in.read(tag, 4);
    if (!in) throw ParseError("model: truncated section table");
    const std::string name(tag, 4);
    const auto len = get_le<std::uint64_t>(in);
    if (len > (1ull << 34)) throw ParseError("model: section too large");
    std::string payload(len, '\0');
    in.read(payload.data(), static_cast<std::streamsize>(len));
    if (!in && len > 0) throw ParseError("model: truncated section '" + name + "'");
    if (name == "END.") break;
    sections[name] = std::move(payload);
  }

  ModelBundle model;
  {
    const auto it = sections.find("XSTD");
    if (it == sections.end()) throw ParseError("model: missing covariate standardizer");
    std::istringstream s(it->second, std::ios::binary);
    Vector mean = get_vector(s);
    Vector scale = get_vector(s);
    model.covariates = Standardizer(std::move(mean), std::move(scale));
  }

  const ScoreKind kind = parse_score_kind(get(h, "score"));
  const double shift = parse_num(h, "shift");
  const std::string& pred = get(h, "predictor");
  auto snapshot = [&]() {
    const auto it = sections.find("PRED");
    if (it == sections.end()) throw ParseError("model: missing predictor section");
    std::istringstream s(it->second, std::ios::binary);
    return read_snapshot(s);
  };

  std::optional<ScoreFunction> score;
  if (uses_point_predictor(kind)) {
    std::shared_ptr<const PointPredictor> p;
    if (pred == "mean_net") {
      p = MeanNetPredictor::from_snapshot(snapshot());
    } else if (pred == "toy_oracle") {
      p = std::make_shared<ToyMeanPredictor>();
    } else {
      throw ParseError("model: unknown point predictor '" + pred + "'");
    }
    score = kind == ScoreKind::abs_residual ? ScoreFunction::abs_residual(p, shift)
                                            : ScoreFunction::linf_residual(p, shift);
  } else {
    std::shared_ptr<const MixturePredictor> p;
    if (pred == "mixture_net") {
      p = MixtureNetPredictor::from_snapshot(snapshot());
    } else if (pred == "toy_oracle") {
      p = std::make_shared<ToyMixturePredictor>();
    } else {
      throw ParseError("model: unknown mixture predictor '" + pred + "'");
    }
    switch (kind) {
      case ScoreKind::mahalanobis: score = ScoreFunction::mahalanobis(p, shift); break;
      case ScoreKind::mixture_nll: score = ScoreFunction::mixture_nll(p, shift); break;
      default:
        score = ScoreFunction::sample_distance(p, static_cast<std::size_t>(parse_num(h, "samples")),
                                               std::stoull(get(h, "sample_seed")), shift);
    }
  }

  const double alpha = parse_num(h, "alpha");
  const double threshold = parse_num(h, "threshold");
  const std::string& method = get(h, "method");
  if (method == "scp") {
    model.scp.emplace(*score, alpha, threshold);
  } else if (method == "rcp") {
    const auto it = sections.find("ESTM");
    if (it == sections.end()) throw ParseError("model: missing estimator section");
    EstimatorPtr est = read_estimator(get(h, "estimator"), it->second);
    const AdjustmentFamily family(parse_adjustment_kind(get(h, "family")));
    model.rcp.emplace(*score, family, std::move(est), get(h, "raw_space") == "1", alpha, threshold);
  } else {
    throw ParseError("model: unknown method '" + method + "'");
  }
  return model;
}

ModelBundle load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  return load_model(in);
}

}  // namespace rcp
