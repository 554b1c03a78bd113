#pragma once

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <string>
#include <vector>

#include "rcp/core.hpp"
#include "rcp/scores.hpp"

namespace rcp {

/// Outcome for one test point.
struct CoverageRecord {
  Vector x;
  bool covered = false;
  /// log volume divided by the response dimension; -inf for empty sets,
  /// +inf for unbounded ones, NaN when not computed.
  double log_volume_per_dim = std::numeric_limits<double>::quiet_NaN();
};

double marginal_coverage(const std::vector<CoverageRecord>& records);

struct WscSpec {
  double delta = 0.2;
  std::size_t directions = 1000;
  std::uint64_t seed = 0;
};

/// Minimum coverage over slabs {a <= u'x <= b} holding at least a delta share
/// of the points, over `directions` random unit vectors u (a single direction
/// when x is scalar).
double worst_slab_coverage(const std::vector<CoverageRecord>& records, const WscSpec& spec);

/// Minimum average over contiguous windows of length >= min_len.
/// Returns the average and writes the window bounds when requested.
double min_window_average(const std::vector<double>& values, std::size_t min_len, std::size_t* begin = nullptr,
                          std::size_t* end = nullptr);

struct PartitionSpec {
  std::size_t cells = 20;
  std::size_t min_cell = 10;
  std::uint64_t seed = 0;
  bool use_max = false;
  /// Optional explicit cell labels (one per record); k-means is skipped.
  std::vector<std::size_t> labels;
};

struct CceResult {
  double value = std::numeric_limits<double>::quiet_NaN();
  bool defined = false;
  std::size_t viable_cells = 0;
  std::size_t merged_cells = 0;
};

/// Mean (or max) over partition cells of |cell coverage - (1 - alpha)|.
CceResult conditional_coverage_error(const std::vector<CoverageRecord>& records, double alpha,
                                     const PartitionSpec& spec);

/// Lloyd's k-means with k-means++ seeding; returns the label of each row.
std::vector<std::size_t> kmeans(const Matrix& x, std::size_t k, Rng& rng, std::size_t max_iter = 100,
                                Matrix* centroids = nullptr);

struct VolumeSpec {
  std::size_t draws = 20000;
  std::uint64_t seed = 0;
};

struct VolumeEstimate {
  double log_volume = 0.0;          // natural log of the volume
  double log_volume_per_dim = 0.0;  // log_volume / d
  double volume = 0.0;
  double stderr_volume = 0.0;       // 0 for closed forms
  double relative_stderr = 0.0;
  bool exact = true;
  bool empty = false;
  bool infinite = false;
};

/// Log volume of the d-dimensional unit ball.
double log_unit_ball_volume(Index d);

VolumeEstimate set_volume(const SetGeometry& geometry, const VolumeSpec& spec = {});

struct MetricRow {
  std::string metric;
  double value = 0.0;
  double stderr_value = std::numeric_limits<double>::quiet_NaN();
  std::size_t n = 0;
};

/// CSV with header metric,value,stderr,n; NaN printed as NA.
void write_metric_rows(std::ostream& out, const std::vector<MetricRow>& rows);

/// Median and mean of finite log volumes; counts empty and infinite sets.
struct VolumeSummary {
  double median = std::numeric_limits<double>::quiet_NaN();
  double mean = std::numeric_limits<double>::quiet_NaN();
  std::size_t empty = 0;
  std::size_t infinite = 0;
  std::size_t used = 0;
};

VolumeSummary summarize_volumes(const std::vector<CoverageRecord>& records);

}  // namespace rcp
