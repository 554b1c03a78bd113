#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "rcp/adjustments.hpp"
#include "rcp/core.hpp"
#include "rcp/metrics.hpp"
#include "rcp/nnet.hpp"
#include "rcp/quantile.hpp"
#include "rcp/scores.hpp"

namespace rcp {

/// One benchmark method: "scp:<score>" or "rcp:<score>:<family>:<estimator>".
struct MethodSpec {
  bool rectified = false;
  ScoreKind score = ScoreKind::abs_residual;
  AdjustmentKind family = AdjustmentKind::additive;
  EstimatorKind estimator = EstimatorKind::local_kernel;

  std::string id() const;
};

MethodSpec parse_method(const std::string& text);

/// Flat key=value experiment description. See README for the schema.
struct ExperimentConfig {
  // Data: either a CSV file or a generator ("toy", "two_moons").
  std::string csv_path;
  Index covariates = 1;
  Index responses = 1;
  std::string generator = "toy";
  std::size_t generator_n = 10000;

  double alpha = 0.1;
  std::vector<MethodSpec> methods;
  SplitSpec split;
  double tau_fraction = 0.5;
  bool standardize = true;

  // Base predictors: "net" (trained) or "oracle" (toy law only).
  std::string predictor = "net";
  std::size_t mixture_components = 3;
  std::size_t pcp_samples = 50;
  NetConfig base_net;
  NetConfig quantile_net;
  KernelSpec kernel;

  WscSpec wsc;
  PartitionSpec cce;
  VolumeSpec volume;
  bool compute_volume = true;

  std::uint64_t seed = 0;
  bool seed_given = false;
  std::size_t replications = 1;
  bool auto_shift = true;
  /// Accept family/score pairs that fail the structural domain check.
  bool allow_structural = false;
  bool timing = false;
};

ExperimentConfig parse_config(std::istream& in, const std::string& source = "<config>");
ExperimentConfig load_config(const std::string& path);

/// Rejects method tuples whose family cannot rectify the score kind.
void validate_config(const ExperimentConfig& config);

struct ReportRow {
  std::string method;
  std::uint64_t seed = 0;
  double coverage = 0.0;
  double wsc = 0.0;
  double cce = 0.0;
  double median_logvol_d = 0.0;
  double mean_logvol_d = 0.0;
  double runtime_s = 0.0;
  bool failed = false;
  std::string failure;
  /// Rows used for uncertainty estimation (tau fitting plus calibration).
  std::size_t calibration_points = 0;
  std::size_t empty_sets = 0;
};

/// Runs every method for every replication seed (seed, seed + 1, ...).
/// Rows are ordered by method, then seed. Stage failures mark the row.
std::vector<ReportRow> run_experiment(const ExperimentConfig& config);

/// Loads or generates the dataset described by the config.
LabeledDataset experiment_data(const ExperimentConfig& config, std::uint64_t seed);

/// CSV: method,seed,coverage,wsc,cce,med_logvol_d,mean_logvol_d,runtime_s,failure.
/// runtime_s is NA unless `timing`, keeping reports byte-identical across runs.
void write_report(std::ostream& out, const std::vector<ReportRow>& rows, bool timing = false);
void emit_report(const std::vector<ReportRow>& rows, const std::string& path, bool timing = false);

/// Fixed-width plain-text table with per-method means.
std::string summary_table(const std::vector<ReportRow>& rows);

}  // namespace rcp
