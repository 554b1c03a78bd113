// Command-line front end: data generation, splitting, calibration,
// prediction, evaluation, benchmarks and theory checks.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "rcp/calibrate.hpp"
#include "rcp/csv.hpp"
#include "rcp/datagen.hpp"
#include "rcp/harness.hpp"
#include "rcp/metrics.hpp"
#include "rcp/model_io.hpp"
#include "rcp/theory.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitFailedRow = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void write_dataset(const rcp::LabeledDataset& data, const std::string& path) {
  if (path.empty() || path == "-") {
    rcp::write_csv(std::cout, data);
  } else {
    rcp::write_csv(path, data);
  }
}

// --- gen-data --------------------------------------------------------------

struct GenArgs {
  std::string generator = "toy";
  std::size_t n = 1000;
  std::uint64_t seed = 0;
  std::string out;
};

int run_gen(const GenArgs& a) {
  if (a.generator == "toy") {
    write_dataset(rcp::sample_toy({a.n, a.seed}), a.out);
  } else if (a.generator == "two_moons") {
    write_dataset(rcp::sample_two_moons(a.n, rcp::default_moons_noise, a.seed), a.out);
  } else {
    throw UsageError("unknown generator '" + a.generator + "' (toy, two_moons)");
  }
  return kExitOk;
}

// --- split -----------------------------------------------------------------

struct SplitArgs {
  std::string data;
  rcp::Index p = 1;
  rcp::Index d = 1;
  std::size_t calibration = 2048;
  double train_fraction = 0.7;
  std::uint64_t seed = 0;
  std::string out_dir = ".";
};

int run_split(const SplitArgs& a) {
  const rcp::LabeledDataset data = rcp::load_csv(a.data, a.p, a.d);
  const rcp::DatasetSplit s = rcp::split_dataset(data, {a.calibration, a.train_fraction, a.seed});
  const std::filesystem::path dir(a.out_dir);
  std::filesystem::create_directories(dir);
  rcp::write_csv((dir / "train.csv").string(), s.train);
  rcp::write_csv((dir / "calibration.csv").string(), s.calibration);
  rcp::write_csv((dir / "test.csv").string(), s.test);
  std::cout << "train " << s.train.size() << ", calibration " << s.calibration.size() << ", test " << s.test.size()
            << '\n';
  return kExitOk;
}

// --- calibrate ---------------------------------------------------------------

struct CalibrateArgs {
  std::string train;
  std::string cal;
  rcp::Index p = 1;
  rcp::Index d = 1;
  std::string method = "rcp:abs_residual:additive:local_kernel";
  std::string predictor = "net";
  double alpha = 0.1;
  double tau_fraction = 0.5;
  std::uint64_t seed = 0;
  bool auto_shift = false;
  bool allow_structural = false;
  bool raw_space = false;
  std::size_t components = 3;
  std::size_t samples = 50;
  std::vector<rcp::Index> hidden = {100, 100, 100};
  std::vector<rcp::Index> qhidden = {100, 100, 100};
  rcp::Index epochs = 200;
  rcp::Index batch = 128;
  double bandwidth = 0.0;
  std::string out = "model.rcp";
};

int run_calibrate(const CalibrateArgs& a) {
  const rcp::MethodSpec m = rcp::parse_method(a.method);
  if (m.rectified && !a.allow_structural) {
    const auto check = rcp::validate_structure(rcp::AdjustmentFamily(m.family), m.score);
    if (!check.ok()) throw UsageError(check.message + " (pass --allow-structural to override)");
  }
  const rcp::LabeledDataset cal_raw = rcp::load_csv(a.cal, a.p, a.d);
  rcp::ModelBundle bundle;
  rcp::LabeledDataset cal = cal_raw;
  std::shared_ptr<const rcp::PointPredictor> point;
  std::shared_ptr<const rcp::MixturePredictor> mixture;
  const bool needs_point = m.score == rcp::ScoreKind::abs_residual || m.score == rcp::ScoreKind::linf_residual;

  if (a.predictor == "oracle") {
    bundle.covariates = rcp::Standardizer::identity(a.p);
    if (needs_point) {
      point = std::make_shared<rcp::ToyMeanPredictor>();
    } else {
      mixture = std::make_shared<rcp::ToyMixturePredictor>();
    }
  } else if (a.predictor == "net") {
    if (a.train.empty()) throw UsageError("--train is required with --predictor net");
    const rcp::LabeledDataset train_raw = rcp::load_csv(a.train, a.p, a.d);
    bundle.covariates = rcp::Standardizer::fit(train_raw.x());
    const rcp::LabeledDataset train(bundle.covariates.transform(train_raw.x()), train_raw.y());
    cal = rcp::LabeledDataset(bundle.covariates.transform(cal_raw.x()), cal_raw.y());
    rcp::NetConfig net;
    net.hidden = a.hidden;
    net.max_epochs = a.epochs;
    net.batch_size = a.batch;
    net.seed = rcp::mix_seed(a.seed, 2);
    if (needs_point) {
      point = rcp::MeanNetPredictor::fit(train, net);
    } else {
      const std::size_t k = m.score == rcp::ScoreKind::mahalanobis ? 1 : a.components;
      mixture = rcp::MixtureNetPredictor::fit(train, static_cast<rcp::Index>(k), net);
    }
  } else {
    throw UsageError("--predictor must be net or oracle");
  }

  std::optional<rcp::ScoreFunction> score;
  switch (m.score) {
    case rcp::ScoreKind::abs_residual: score = rcp::ScoreFunction::abs_residual(point); break;
    case rcp::ScoreKind::linf_residual: score = rcp::ScoreFunction::linf_residual(point); break;
    case rcp::ScoreKind::mahalanobis: score = rcp::ScoreFunction::mahalanobis(mixture); break;
    case rcp::ScoreKind::mixture_nll: score = rcp::ScoreFunction::mixture_nll(mixture); break;
    case rcp::ScoreKind::sample_distance:
      score = rcp::ScoreFunction::sample_distance(mixture, a.samples, rcp::mix_seed(a.seed, 4));
      break;
  }

  if (!m.rectified) {
    bundle.scp = rcp::scp_calibrate(cal, *score, a.alpha);
  } else {
    rcp::EstimatorSpec es;
    es.kind = m.estimator;
    if (a.bandwidth > 0.0) {
      es.kernel.bandwidth = a.bandwidth;
      es.tune_bandwidth = false;
    }
    es.net.hidden = a.qhidden;
    es.net.max_epochs = a.epochs;
    es.net.batch_size = a.batch;
    es.net.seed = rcp::mix_seed(a.seed, 7);
    rcp::RcpOptions opt;
    opt.tau_fraction = a.tau_fraction;
    opt.auto_shift = a.auto_shift;
    opt.raw_space = a.raw_space;
    rcp::Rng rng(rcp::mix_seed(a.seed, 8));
    bundle.rcp = rcp::rcp_calibrate(cal, *score, rcp::AdjustmentFamily(m.family), es, a.alpha, opt, rng);
  }
  rcp::save_model(a.out, bundle);
  std::cout << "method " << m.id() << ", alpha " << a.alpha << ", threshold " << bundle.threshold() << ", shift "
            << bundle.score().shift() << " -> " << a.out << '\n';
  return kExitOk;
}

// --- predict / evaluate --------------------------------------------------------

struct PredictArgs {
  std::string model;
  std::string data;
  rcp::Index p = 1;
  rcp::Index d = 1;
  std::string out;
};

int run_predict(const PredictArgs& a) {
  const rcp::ModelBundle model = rcp::load_model(a.model);
  const rcp::LabeledDataset data = rcp::load_csv(a.data, a.p, a.d);
  std::ofstream file;
  if (!a.out.empty()) {
    file.open(a.out);
    if (!file) throw rcp::IoError("cannot open '" + a.out + "' for writing");
  }
  std::ostream& out = a.out.empty() ? std::cout : file;
  out << std::setprecision(10);
  out << "row,base_level,radius,lower,upper,covered\n";
  for (rcp::Index i = 0; i < data.size(); ++i) {
    const rcp::Vector x = data.x_row(i);
    const rcp::SetGeometry g = model.set(x);
    out << i << ',' << g.level << ',' << g.radius() << ',';
    if (g.kind == rcp::GeometryKind::interval && !g.empty()) {
      out << g.center(0) - g.radius() << ',' << g.center(0) + g.radius();
    } else {
      out << "NA,NA";
    }
    out << ',' << (model.contains(x, data.y_row(i)) ? 1 : 0) << '\n';
  }
  return kExitOk;
}

struct EvaluateArgs {
  std::string model;
  std::string data;
  rcp::Index p = 1;
  rcp::Index d = 1;
  std::uint64_t seed = 0;
  std::size_t draws = 20000;
  bool volume = true;
};

int run_evaluate(const EvaluateArgs& a) {
  const rcp::ModelBundle model = rcp::load_model(a.model);
  const rcp::LabeledDataset data = rcp::load_csv(a.data, a.p, a.d);
  std::vector<rcp::CoverageRecord> records(static_cast<std::size_t>(data.size()));
  for (rcp::Index i = 0; i < data.size(); ++i) {
    auto& r = records[static_cast<std::size_t>(i)];
    r.x = model.covariates.transform(data.x_row(i));
    r.covered = model.contains(data.x_row(i), data.y_row(i));
    if (a.volume) {
      rcp::VolumeSpec vs{a.draws, rcp::mix_seed(a.seed, 1000 + static_cast<std::uint64_t>(i))};
      r.log_volume_per_dim = rcp::set_volume(model.set(data.x_row(i)), vs).log_volume_per_dim;
    }
  }
  const double n = static_cast<double>(records.size());
  const double cov = rcp::marginal_coverage(records);
  std::vector<rcp::MetricRow> rows;
  rows.push_back({"coverage", cov, std::sqrt(cov * (1.0 - cov) / n), records.size()});
  rcp::WscSpec wsc;
  wsc.seed = rcp::mix_seed(a.seed, 5);
  rows.push_back({"wsc", rcp::worst_slab_coverage(records, wsc), std::numeric_limits<double>::quiet_NaN(),
                  records.size()});
  rcp::PartitionSpec part;
  part.seed = rcp::mix_seed(a.seed, 6);
  const rcp::CceResult cce = rcp::conditional_coverage_error(records, model.alpha(), part);
  rows.push_back({"cce", cce.defined ? cce.value : std::numeric_limits<double>::quiet_NaN(),
                  std::numeric_limits<double>::quiet_NaN(), records.size()});
  if (a.volume) {
    const rcp::VolumeSummary vol = rcp::summarize_volumes(records);
    rows.push_back({"med_logvol_d", vol.median, std::numeric_limits<double>::quiet_NaN(), vol.used});
    rows.push_back({"mean_logvol_d", vol.mean, std::numeric_limits<double>::quiet_NaN(), vol.used});
    rows.push_back({"empty_sets", static_cast<double>(vol.empty), std::numeric_limits<double>::quiet_NaN(),
                    records.size()});
  }
  rcp::write_metric_rows(std::cout, rows);
  return kExitOk;
}

// --- bench -------------------------------------------------------------------

struct BenchArgs {
  std::string config;
  std::uint64_t seed = 0;
  std::string out = "report.csv";
  bool timing = false;
};

int run_bench(const BenchArgs& a) {
  rcp::ExperimentConfig config = rcp::load_config(a.config);
  config.seed = a.seed;
  config.timing = config.timing || a.timing;
  try {
    rcp::validate_config(config);
  } catch (const rcp::ArgumentError& e) {
    throw UsageError(e.what());
  }
  const auto rows = rcp::run_experiment(config);
  rcp::emit_report(rows, a.out, config.timing);
  std::cout << rcp::summary_table(rows);
  for (const auto& r : rows) {
    if (r.failed) {
      std::cerr << "failed: " << r.method << " seed " << r.seed << ": " << r.failure << '\n';
    }
  }
  const bool any_failed = std::any_of(rows.begin(), rows.end(), [](const auto& r) { return r.failed; });
  return any_failed ? kExitFailedRow : kExitOk;
}

// --- theory-check ----------------------------------------------------------------

struct TheoryArgs {
  std::string check = "marginal";
  std::uint64_t seed = 0;
  std::size_t reps = 0;
  double alpha = 0.1;
  std::size_t n = 0;
  std::string family = "additive";
  std::string estimator = "local_kernel";
  double omega = 0.0;
};

int run_theory(const TheoryArgs& a) {
  rcp::Rng rng(a.seed);
  if (a.check == "marginal") {
    rcp::MarginalCheckSpec spec;
    spec.alpha = a.alpha;
    if (a.reps) spec.reps = a.reps;
    if (a.n) spec.n_proper = a.n;
    spec.family = rcp::parse_adjustment_kind(a.family);
    if (a.estimator == "scp") {
      spec.rectified = false;
    } else if (a.estimator == "oracle") {
      spec.estimator.kind = rcp::EstimatorKind::external;
      spec.omega = a.omega;
    } else {
      spec.estimator.kind = rcp::parse_estimator_kind(a.estimator);
      spec.estimator.net = rcp::reduced_quantile_net();
    }
    const auto r = rcp::check_marginal_bounds(spec, rng);
    std::cout << std::fixed << std::setprecision(5) << "mean coverage " << r.mean << " (stderr " << r.stderr_mc
              << "), band [" << r.lower << ", " << r.upper << "], " << r.reps << " reps, "
              << r.calibration_rows << " calibration rows each: " << (r.pass ? "PASS" : "FAIL") << '\n';
    return r.pass ? kExitOk : kExitFailedRow;
  }
  if (a.check == "table1") {
    rcp::Table1Spec spec;
    spec.alpha = a.alpha;
    if (a.reps) spec.reps = a.reps;
    if (a.n) spec.n = a.n;
    const auto rows = rcp::check_table1(spec, rng);
    std::cout << "omega,lower_decile_coverage_pct,sd_pct,stderr_pct\n" << std::fixed << std::setprecision(3);
    for (const auto& r : rows) std::cout << r.omega << ',' << r.mean << ',' << r.sd << ',' << r.stderr_mc << '\n';
    return kExitOk;
  }
  if (a.check == "epsilon") {
    const auto r = rcp::check_epsilon_bound(rcp::epsilon_sweep(a.alpha), a.alpha);
    std::cout << "x,tau,epsilon,gap,bound,scaled_bound\n" << std::setprecision(8);
    for (const auto& p : r.points) {
      std::cout << p.x << ',' << p.tau << ',' << p.epsilon << ',' << p.gap << ',' << p.bound << ','
                << p.scaled_bound << '\n';
    }
    std::cout << "violations " << r.violations << ", density-scaled violations " << r.scaled_violations << '\n';
    return r.violations == 0 ? kExitOk : kExitFailedRow;
  }
  throw UsageError("unknown check '" + a.check + "' (marginal, table1, epsilon)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Rectified conformal prediction"};
  app.require_subcommand(1);

  GenArgs gen;
  auto* gen_cmd = app.add_subcommand("gen-data", "Sample a synthetic dataset as CSV");
  gen_cmd->add_option("--generator", gen.generator, "toy or two_moons");
  gen_cmd->add_option("--n", gen.n, "Number of rows");
  gen_cmd->add_option("--seed", gen.seed, "Random seed")->required();
  gen_cmd->add_option("--out", gen.out, "Output path (stdout if omitted)");

  SplitArgs split;
  auto* split_cmd = app.add_subcommand("split", "Partition a CSV into train, calibration and test files");
  split_cmd->add_option("--data", split.data, "Input CSV")->required();
  split_cmd->add_option("--p", split.p, "Covariate columns");
  split_cmd->add_option("--d", split.d, "Response columns");
  split_cmd->add_option("--calibration", split.calibration, "Calibration rows");
  split_cmd->add_option("--train-fraction", split.train_fraction, "Train share of the remaining rows");
  split_cmd->add_option("--seed", split.seed, "Random seed")->required();
  split_cmd->add_option("--out-dir", split.out_dir, "Output directory");

  CalibrateArgs cal;
  auto* cal_cmd = app.add_subcommand("calibrate", "Train the base predictor and calibrate a conformal model");
  cal_cmd->add_option("--train", cal.train, "Training CSV (net predictor)");
  cal_cmd->add_option("--cal", cal.cal, "Calibration CSV")->required();
  cal_cmd->add_option("--p", cal.p, "Covariate columns");
  cal_cmd->add_option("--d", cal.d, "Response columns");
  cal_cmd->add_option("--method", cal.method, "scp:<score> or rcp:<score>:<family>:<estimator>");
  cal_cmd->add_option("--predictor", cal.predictor, "net or oracle (toy law)");
  cal_cmd->add_option("--alpha", cal.alpha, "Miscoverage level");
  cal_cmd->add_option("--tau-fraction", cal.tau_fraction, "Calibration share used to fit tau");
  cal_cmd->add_option("--seed", cal.seed, "Random seed")->required();
  cal_cmd->add_flag("--auto-shift", cal.auto_shift, "Apply the recommended score shift");
  cal_cmd->add_flag("--allow-structural", cal.allow_structural, "Accept structurally incompatible pairs");
  cal_cmd->add_flag("--raw-space", cal.raw_space, "Fit the quantile on raw scores");
  cal_cmd->add_option("--components", cal.components, "Mixture components");
  cal_cmd->add_option("--samples", cal.samples, "Samples for the sample-distance score");
  cal_cmd->add_option("--hidden", cal.hidden, "Hidden widths of the base network")->delimiter(',');
  cal_cmd->add_option("--qhidden", cal.qhidden, "Hidden widths of the quantile network")->delimiter(',');
  cal_cmd->add_option("--epochs", cal.epochs, "Maximum training epochs");
  cal_cmd->add_option("--batch", cal.batch, "Minibatch size");
  cal_cmd->add_option("--bandwidth", cal.bandwidth, "Fixed kernel bandwidth (grid search if omitted)");
  cal_cmd->add_option("--out", cal.out, "Model output path");

  PredictArgs pred;
  auto* pred_cmd = app.add_subcommand("predict", "Prediction sets for the rows of a CSV");
  pred_cmd->add_option("--model", pred.model, "Model file")->required();
  pred_cmd->add_option("--data", pred.data, "Input CSV")->required();
  pred_cmd->add_option("--p", pred.p, "Covariate columns");
  pred_cmd->add_option("--d", pred.d, "Response columns");
  pred_cmd->add_option("--out", pred.out, "Output CSV (stdout if omitted)");

  EvaluateArgs eval;
  auto* eval_cmd = app.add_subcommand("evaluate", "Coverage, WSC, CCE and volume on a labelled CSV");
  eval_cmd->add_option("--model", eval.model, "Model file")->required();
  eval_cmd->add_option("--data", eval.data, "Labelled CSV")->required();
  eval_cmd->add_option("--p", eval.p, "Covariate columns");
  eval_cmd->add_option("--d", eval.d, "Response columns");
  eval_cmd->add_option("--seed", eval.seed, "Random seed")->required();
  eval_cmd->add_option("--volume-draws", eval.draws, "Monte-Carlo draws per set");
  eval_cmd->add_flag("!--no-volume", eval.volume, "Skip set volumes");

  BenchArgs bench;
  auto* bench_cmd = app.add_subcommand("bench", "Run an experiment config and write a CSV report");
  bench_cmd->add_option("--config", bench.config, "Config file")->required();
  bench_cmd->add_option("--seed", bench.seed, "Base seed")->required();
  bench_cmd->add_option("--out", bench.out, "Report CSV");
  bench_cmd->add_flag("--timing", bench.timing, "Write wall-clock runtimes");

  TheoryArgs theory;
  auto* theory_cmd = app.add_subcommand("theory-check", "Monte-Carlo and quadrature checks on the toy model");
  theory_cmd->add_option("--check", theory.check, "marginal, table1 or epsilon");
  theory_cmd->add_option("--seed", theory.seed, "Random seed")->required();
  theory_cmd->add_option("--reps", theory.reps, "Replications");
  theory_cmd->add_option("--alpha", theory.alpha, "Miscoverage level");
  theory_cmd->add_option("--n", theory.n, "Calibration size");
  theory_cmd->add_option("--family", theory.family, "Adjustment family");
  theory_cmd->add_option("--estimator", theory.estimator, "local_kernel, pinball_net, constant, oracle or scp");
  theory_cmd->add_option("--omega", theory.omega, "Contamination for the oracle estimator");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*gen_cmd) return run_gen(gen);
    if (*split_cmd) return run_split(split);
    if (*cal_cmd) return run_calibrate(cal);
    if (*pred_cmd) return run_predict(pred);
    if (*eval_cmd) return run_evaluate(eval);
    if (*bench_cmd) return run_bench(bench);
    if (*theory_cmd) return run_theory(theory);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const rcp::ArgumentError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  }
  return kExitUsage;
}
