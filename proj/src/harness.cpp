#include "rcp/harness.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

#include "rcp/calibrate.hpp"
#include "rcp/csv.hpp"
#include "rcp/datagen.hpp"

namespace rcp {

namespace {

std::vector<std::string> split_list(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, sep)) {
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    if (b != std::string::npos) out.push_back(item.substr(b, e - b + 1));
  }
  return out;
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

bool uses_point(ScoreKind k) { return k == ScoreKind::abs_residual || k == ScoreKind::linf_residual; }

}  // namespace

std::string MethodSpec::id() const {
  std::string s = rectified ? "rcp:" : "scp:";
  s += to_string(score);
  if (rectified) s += ":" + to_string(family) + ":" + to_string(estimator);
  return s;
}

MethodSpec parse_method(const std::string& text) {
  const auto parts = split_list(text, ':');
  MethodSpec m;
  if (parts.empty()) throw ArgumentError("empty method specification");
  if (parts[0] == "scp") {
    if (parts.size() != 2) throw ArgumentError("method '" + text + "': expected scp:<score>");
    m.score = parse_score_kind(parts[1]);
    return m;
  }
  if (parts[0] == "rcp") {
    if (parts.size() != 4) throw ArgumentError("method '" + text + "': expected rcp:<score>:<family>:<estimator>");
    m.rectified = true;
    m.score = parse_score_kind(parts[1]);
    m.family = parse_adjustment_kind(parts[2]);
    m.estimator = parse_estimator_kind(parts[3]);
    return m;
  }
  throw ArgumentError("method '" + text + "' must start with scp or rcp");
}

ExperimentConfig parse_config(std::istream& in, const std::string& source) {
  ExperimentConfig c;
  c.base_net.hidden = {100, 100, 100};
  c.quantile_net.hidden = {100, 100, 100};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const auto b = line.find_first_not_of(" \t\r");
    if (b == std::string::npos) continue;
    const auto eq = line.find('=');
    auto fail = [&](const std::string& why) {
      std::ostringstream msg;
      msg << source << ":" << line_no << ": " << why;
      throw ParseError(msg.str());
    };
    if (eq == std::string::npos) fail("expected key = value");
    std::string key = line.substr(0, eq);
    std::string value = line.substr(eq + 1);
    key.erase(0, key.find_first_not_of(" \t"));
    key.erase(key.find_last_not_of(" \t") + 1);
    value.erase(0, value.find_first_not_of(" \t"));
    const auto vend = value.find_last_not_of(" \t\r");
    value.erase(vend == std::string::npos ? 0 : vend + 1);

    auto num = [&]() {
      try {
        std::size_t used = 0;
        const double v = std::stod(value, &used);
        if (used != value.size()) fail("'" + key + "' expects a number, got '" + value + "'");
        return v;
      } catch (const std::logic_error&) {
        fail("'" + key + "' expects a number, got '" + value + "'");
      }
      return 0.0;
    };
    auto count = [&]() {
      const double v = num();
      if (v < 0 || v != std::floor(v)) fail("'" + key + "' expects a nonnegative integer");
      return static_cast<std::size_t>(v);
    };
    auto flag = [&]() {
      if (value == "1" || value == "true" || value == "yes") return true;
      if (value == "0" || value == "false" || value == "no") return false;
      fail("'" + key + "' expects a boolean");
      return false;
    };
    auto widths = [&]() {
      std::vector<Index> w;
      for (const auto& item : split_list(value, ',')) {
        try {
          w.push_back(static_cast<Index>(std::stoul(item)));
        } catch (const std::logic_error&) {
          fail("'" + key + "' expects a comma-separated list of widths");
        }
      }
      return w;
    };

    try {
      if (key == "data.csv") c.csv_path = value;
      else if (key == "data.covariates") c.covariates = static_cast<Index>(count());
      else if (key == "data.responses") c.responses = static_cast<Index>(count());
      else if (key == "data.generator") c.generator = value;
      else if (key == "data.n") c.generator_n = count();
      else if (key == "alpha") c.alpha = num();
      else if (key == "methods") {
        c.methods.clear();
        for (const auto& m : split_list(value, ',')) c.methods.push_back(parse_method(m));
      }
      else if (key == "split.calibration") c.split.calibration_size = count();
      else if (key == "split.train_fraction") c.split.train_fraction_of_rest = num();
      else if (key == "tau_fraction") c.tau_fraction = num();
      else if (key == "standardize") c.standardize = flag();
      else if (key == "predictor") c.predictor = value;
      else if (key == "mixture.components") c.mixture_components = count();
      else if (key == "pcp.samples") c.pcp_samples = count();
      else if (key == "net.hidden") c.base_net.hidden = widths();
      else if (key == "net.epochs") c.base_net.max_epochs = static_cast<Index>(count());
      else if (key == "net.batch") c.base_net.batch_size = static_cast<Index>(count());
      else if (key == "net.lr") c.base_net.learning_rate = num();
      else if (key == "net.patience") c.base_net.patience = static_cast<Index>(count());
      else if (key == "qnet.hidden") c.quantile_net.hidden = widths();
      else if (key == "qnet.epochs") c.quantile_net.max_epochs = static_cast<Index>(count());
      else if (key == "qnet.batch") c.quantile_net.batch_size = static_cast<Index>(count());
      else if (key == "qnet.lr") c.quantile_net.learning_rate = num();
      else if (key == "qnet.patience") c.quantile_net.patience = static_cast<Index>(count());
      else if (key == "kernel.bandwidth") c.kernel.bandwidth = num();
      else if (key == "kernel.grid") {
        c.kernel.grid.clear();
        for (const auto& item : split_list(value, ',')) c.kernel.grid.push_back(std::stod(item));
      }
      else if (key == "wsc.delta") c.wsc.delta = num();
      else if (key == "wsc.directions") c.wsc.directions = count();
      else if (key == "cce.cells") c.cce.cells = count();
      else if (key == "cce.min_cell") c.cce.min_cell = count();
      else if (key == "cce.max") c.cce.use_max = flag();
      else if (key == "volume") c.compute_volume = flag();
      else if (key == "volume.draws") c.volume.draws = count();
      else if (key == "seed") {
        c.seed = static_cast<std::uint64_t>(std::stoull(value));
        c.seed_given = true;
      }
      else if (key == "replications") c.replications = count();
      else if (key == "auto_shift") c.auto_shift = flag();
      else if (key == "allow_structural") c.allow_structural = flag();
      else if (key == "timing") c.timing = flag();
      else fail("unknown key '" + key + "'");
    } catch (const ParseError&) {
      throw;
    } catch (const std::exception& e) {
      fail(e.what());
    }
  }
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path + "'");
  return parse_config(in, path);
}

void validate_config(const ExperimentConfig& c) {
  if (!(c.alpha > 0.0 && c.alpha < 1.0)) throw ArgumentError("config: alpha must lie in (0, 1)");
  if (c.methods.empty()) throw ArgumentError("config: no methods listed");
  if (c.replications < 1) throw ArgumentError("config: replications must be >= 1");
  if (!(c.tau_fraction > 0.0 && c.tau_fraction < 1.0)) throw ArgumentError("config: tau_fraction must lie in (0, 1)");
  if (c.predictor != "net" && c.predictor != "oracle") throw ArgumentError("config: predictor must be net or oracle");
  if (c.csv_path.empty() && c.generator != "toy" && c.generator != "two_moons") {
    throw ArgumentError("config: unknown generator '" + c.generator + "' (toy, two_moons)");
  }
  if (c.predictor == "oracle" && (!c.csv_path.empty() || c.generator != "toy")) {
    throw ArgumentError("config: the oracle predictor is only defined for the toy generator");
  }
  for (const auto& m : c.methods) {
    if (!m.rectified || c.allow_structural) continue;
    const DomainCheck check = validate_structure(AdjustmentFamily(m.family), m.score);
    if (check.status == DomainCheck::Status::structural) {
      throw ArgumentError("config: method " + m.id() + " rejected: " + check.message +
                          " (set allow_structural = 1 to run it anyway)");
    }
  }
}

LabeledDataset experiment_data(const ExperimentConfig& c, std::uint64_t seed) {
  if (!c.csv_path.empty()) return load_csv(c.csv_path, c.covariates, c.responses);
  if (c.generator == "toy") {
    Rng rng(mix_seed(seed, 1));
    return sample_toy(c.generator_n, rng);
  }
  if (c.generator == "two_moons") return sample_two_moons(c.generator_n, default_moons_noise, mix_seed(seed, 1));
  throw ArgumentError("unknown generator '" + c.generator + "'");
}

namespace {

struct Predictors {
  std::shared_ptr<const PointPredictor> point;
  std::map<std::size_t, std::shared_ptr<const MixturePredictor>> mixtures;
  std::string point_error;
  std::map<std::size_t, std::string> mixture_errors;
};

ScoreFunction build_score(const MethodSpec& m, const ExperimentConfig& c, Predictors& preds,
                          const LabeledDataset& train, std::uint64_t seed) {
  if (uses_point(m.score)) {
    if (!preds.point && preds.point_error.empty()) {
      try {
        if (c.predictor == "oracle") {
          preds.point = std::make_shared<ToyMeanPredictor>();
        } else {
          NetConfig net = c.base_net;
          net.seed = mix_seed(seed, 2);
          preds.point = MeanNetPredictor::fit(train, net);
        }
      } catch (const std::exception& e) {
        preds.point_error = std::string("base predictor training failed: ") + e.what();
      }
    }
    if (!preds.point) throw TrainingError(preds.point_error);
    return m.score == ScoreKind::abs_residual ? ScoreFunction::abs_residual(preds.point)
                                              : ScoreFunction::linf_residual(preds.point);
  }
  const std::size_t k = m.score == ScoreKind::mahalanobis ? 1 : c.mixture_components;
  if (!preds.mixtures.count(k) && !preds.mixture_errors.count(k)) {
    try {
      if (c.predictor == "oracle") {
        preds.mixtures[k] = std::make_shared<ToyMixturePredictor>();
      } else {
        NetConfig net = c.base_net;
        net.seed = mix_seed(seed, 3 + k);
        preds.mixtures[k] = MixtureNetPredictor::fit(train, static_cast<Index>(k), net);
      }
    } catch (const std::exception& e) {
      preds.mixture_errors[k] = std::string("mixture predictor training failed: ") + e.what();
    }
  }
  if (!preds.mixtures.count(k)) throw TrainingError(preds.mixture_errors[k]);
  const auto& p = preds.mixtures[k];
  switch (m.score) {
    case ScoreKind::mahalanobis: return ScoreFunction::mahalanobis(p);
    case ScoreKind::mixture_nll: return ScoreFunction::mixture_nll(p);
    default: return ScoreFunction::sample_distance(p, c.pcp_samples, mix_seed(seed, 4));
  }
}

template <typename Model>
void evaluate(const Model& model, const LabeledDataset& test, const ExperimentConfig& c, std::uint64_t seed,
              ReportRow& row) {
  std::vector<CoverageRecord> records(static_cast<std::size_t>(test.size()));
  for (Index i = 0; i < test.size(); ++i) {
    auto& r = records[static_cast<std::size_t>(i)];
    r.x = test.x_row(i);
    r.covered = model.contains(r.x, test.y_row(i));
    if (c.compute_volume) {
      VolumeSpec vs = c.volume;
      vs.seed = mix_seed(seed, 1000 + static_cast<std::uint64_t>(i));
      r.log_volume_per_dim = set_volume(model.set(r.x), vs).log_volume_per_dim;
    }
  }
  row.coverage = marginal_coverage(records);
  WscSpec wsc = c.wsc;
  wsc.seed = mix_seed(seed, 5);
  row.wsc = worst_slab_coverage(records, wsc);
  PartitionSpec cce = c.cce;
  cce.seed = mix_seed(seed, 6);
  const CceResult cr = conditional_coverage_error(records, c.alpha, cce);
  row.cce = cr.defined ? cr.value : std::numeric_limits<double>::quiet_NaN();
  const VolumeSummary vol = summarize_volumes(records);
  row.median_logvol_d = vol.median;
  row.mean_logvol_d = vol.mean;
  row.empty_sets = vol.empty;
}

}  // namespace

std::vector<ReportRow> run_experiment(const ExperimentConfig& c) {
  validate_config(c);
  std::vector<std::vector<ReportRow>> per_method(c.methods.size());
  for (std::size_t rep = 0; rep < c.replications; ++rep) {
    const std::uint64_t seed = c.seed + rep;
    std::string data_error;
    DatasetSplit split;
    try {
      const LabeledDataset data = experiment_data(c, seed);
      SplitSpec ss = c.split;
      ss.seed = seed;
      split = split_dataset(data, ss);
      if (c.standardize && c.predictor != "oracle") {
        const Standardizer xs = Standardizer::fit(split.train.x());
        split.train = LabeledDataset(xs.transform(split.train.x()), split.train.y());
        split.calibration = LabeledDataset(xs.transform(split.calibration.x()), split.calibration.y());
        split.test = LabeledDataset(xs.transform(split.test.x()), split.test.y());
      }
    } catch (const std::exception& e) {
      data_error = std::string("data preparation failed: ") + e.what();
    }
    Predictors preds;
    for (std::size_t mi = 0; mi < c.methods.size(); ++mi) {
      const MethodSpec& m = c.methods[mi];
      ReportRow row;
      row.method = m.id();
      row.seed = seed;
      const auto start = std::chrono::steady_clock::now();
      try {
        if (!data_error.empty()) throw Error(data_error);
        row.calibration_points = static_cast<std::size_t>(split.calibration.size());
        const ScoreFunction score = build_score(m, c, preds, split.train, seed);
        Rng rng(mix_seed(seed, fnv1a(row.method)));
        if (!m.rectified) {
          const ScpModel model = scp_calibrate(split.calibration, score, c.alpha);
          evaluate(model, split.test, c, seed, row);
        } else {
          EstimatorSpec es;
          es.kind = m.estimator;
          es.kernel = c.kernel;
          es.net = c.quantile_net;
          RcpOptions opt;
          opt.tau_fraction = c.tau_fraction;
          opt.auto_shift = c.auto_shift;
          const RcpModel model =
              rcp_calibrate(split.calibration, score, AdjustmentFamily(m.family), es, c.alpha, opt, rng);
          evaluate(model, split.test, c, seed, row);
        }
      } catch (const std::exception& e) {
        row.failed = true;
        row.failure = e.what();
      }
      row.runtime_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      per_method[mi].push_back(std::move(row));
    }
  }
  std::vector<ReportRow> rows;
  for (auto& v : per_method) {
    for (auto& r : v) rows.push_back(std::move(r));
  }
  return rows;
}

namespace {

std::string cell(double v, bool failed) {
  if (failed || !std::isfinite(v)) return "NA";
  std::ostringstream s;
  s << std::fixed << std::setprecision(6) << v;
  return s.str();
}

std::string sanitize(std::string s) {
  for (char& ch : s) {
    if (ch == ',' || ch == '\n' || ch == '\r') ch = ';';
  }
  return s;
}

}  // namespace

void write_report(std::ostream& out, const std::vector<ReportRow>& rows, bool timing) {
  out << "method,seed,coverage,wsc,cce,med_logvol_d,mean_logvol_d,runtime_s,failure\n";
  for (const auto& r : rows) {
    out << r.method << ',' << r.seed << ',' << cell(r.coverage, r.failed) << ',' << cell(r.wsc, r.failed) << ','
        << cell(r.cce, r.failed) << ',' << cell(r.median_logvol_d, r.failed) << ','
        << cell(r.mean_logvol_d, r.failed) << ',' << (timing ? cell(r.runtime_s, false) : "NA") << ','
        << sanitize(r.failure) << '\n';
  }
}

void emit_report(const std::vector<ReportRow>& rows, const std::string& path, bool timing) {
  if (rows.empty()) throw ArgumentError("emit_report: no rows");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  write_report(out, rows, timing);
  if (!out) throw IoError("write failed for '" + path + "'");
}

std::string summary_table(const std::vector<ReportRow>& rows) {
  struct Acc {
    std::size_t ok = 0;
    std::size_t failed = 0;
    double cov = 0.0;
    double wsc = 0.0;
    double cce = 0.0;
    std::size_t cce_n = 0;
    double vol = 0.0;
    std::size_t vol_n = 0;
  };
  std::vector<std::string> order;
  std::map<std::string, Acc> acc;
  for (const auto& r : rows) {
    if (!acc.count(r.method)) order.push_back(r.method);
    Acc& a = acc[r.method];
    if (r.failed) {
      ++a.failed;
      continue;
    }
    ++a.ok;
    a.cov += r.coverage;
    a.wsc += r.wsc;
    if (std::isfinite(r.cce)) {
      a.cce += r.cce;
      ++a.cce_n;
    }
    if (std::isfinite(r.median_logvol_d)) {
      a.vol += r.median_logvol_d;
      ++a.vol_n;
    }
  }
  std::ostringstream s;
  s << std::left << std::setw(44) << "method" << std::right << std::setw(5) << "ok" << std::setw(7) << "failed"
    << std::setw(10) << "coverage" << std::setw(10) << "wsc" << std::setw(10) << "cce" << std::setw(14)
    << "med_logvol_d" << '\n';
  for (const auto& m : order) {
    const Acc& a = acc[m];
    auto mean = [](double sum, std::size_t n) { return n ? cell(sum / static_cast<double>(n), false) : "NA"; };
    s << std::left << std::setw(44) << m << std::right << std::setw(5) << a.ok << std::setw(7) << a.failed
      << std::setw(10) << mean(a.cov, a.ok) << std::setw(10) << mean(a.wsc, a.ok) << std::setw(10)
      << mean(a.cce, a.cce_n) << std::setw(14) << mean(a.vol, a.vol_n) << '\n';
  }
  return s.str();
}

}  // namespace rcp
