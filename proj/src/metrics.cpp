#include "rcp/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

namespace rcp {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

Matrix stack_covariates(const std::vector<CoverageRecord>& records) {
  const Index p = records.front().x.size();
  Matrix x(static_cast<Index>(records.size()), p);
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (records[i].x.size() != p) throw ShapeError("coverage records have inconsistent covariate dimensions");
    x.row(static_cast<Index>(i)) = records[i].x.transpose();
  }
  return x;
}

/// True when some window of length >= min_len has sum(v - lambda) <= 0.
bool window_below(const std::vector<double>& v, std::size_t min_len, double lambda, std::size_t* b,
                  std::size_t* e) {
  const std::size_t n = v.size();
  std::vector<double> prefix(n + 1, 0.0);
  for (std::size_t i = 0; i < n; ++i) prefix[i + 1] = prefix[i] + (v[i] - lambda);
  double best = -kInf;
  std::size_t best_i = 0;
  for (std::size_t j = min_len; j <= n; ++j) {
    if (prefix[j - min_len] > best) {
      best = prefix[j - min_len];
      best_i = j - min_len;
    }
    if (prefix[j] - best <= 0.0) {
      *b = best_i;
      *e = j;
      return true;
    }
  }
  return false;
}

double window_mean(const std::vector<double>& v, std::size_t b, std::size_t e) {
  double s = 0.0;
  for (std::size_t i = b; i < e; ++i) s += v[i];
  return s / static_cast<double>(e - b);
}

}  // namespace

double marginal_coverage(const std::vector<CoverageRecord>& records) {
  if (records.empty()) throw SizeError("marginal_coverage: no records");
  std::size_t hit = 0;
  for (const auto& r : records) hit += r.covered ? 1 : 0;
  return static_cast<double>(hit) / static_cast<double>(records.size());
}

double min_window_average(const std::vector<double>& values, std::size_t min_len, std::size_t* begin,
                          std::size_t* end) {
  if (min_len == 0 || min_len > values.size()) throw ArgumentError("min_window_average: invalid window length");
  double lo = *std::min_element(values.begin(), values.end());
  double hi = *std::max_element(values.begin(), values.end());
  std::size_t b = 0;
  std::size_t e = values.size();
  if (!window_below(values, min_len, lo, &b, &e)) {
    window_below(values, min_len, hi, &b, &e);
    // Invariant: a window with mean <= hi exists, none with mean < lo.
    for (int it = 0; it < 200 && hi - lo > 1e-13 * std::max(1.0, std::abs(hi)); ++it) {
      const double mid = 0.5 * (lo + hi);
      std::size_t mb = 0;
      std::size_t me = 0;
      if (window_below(values, min_len, mid, &mb, &me)) {
        hi = mid;
        b = mb;
        e = me;
      } else {
        lo = mid;
      }
    }
  }
  if (begin) *begin = b;
  if (end) *end = e;
  return window_mean(values, b, e);
}

double worst_slab_coverage(const std::vector<CoverageRecord>& records, const WscSpec& spec) {
  if (!(spec.delta > 0.0 && spec.delta < 1.0)) throw ArgumentError("WSC: delta must lie in (0, 1)");
  if (records.empty()) throw SizeError("WSC: no records");
  const std::size_t n = records.size();
  const auto min_len = static_cast<std::size_t>(std::ceil(spec.delta * static_cast<double>(n) - 1e-9));
  if (min_len < 2) throw SizeError("WSC: need ceil(delta * n) >= 2 points");
  const Matrix x = stack_covariates(records);
  const Index p = x.cols();
  const std::size_t directions = p == 1 ? 1 : std::max<std::size_t>(spec.directions, 1);
  Rng rng(spec.seed);

  std::vector<std::size_t> order(n);
  std::vector<double> flags(n);
  double worst = kInf;
  for (std::size_t dir = 0; dir < directions; ++dir) {
    Vector u = Vector::Ones(1);
    if (p > 1) {
      u.resize(p);
      do {
        for (Index j = 0; j < p; ++j) u(j) = rng.normal();
      } while (u.norm() < 1e-12);
      u.normalize();
    }
    const Vector proj = x * u;
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return proj(static_cast<Index>(a)) < proj(static_cast<Index>(b)) ||
             (proj(static_cast<Index>(a)) == proj(static_cast<Index>(b)) && a < b);
    });
    for (std::size_t i = 0; i < n; ++i) flags[i] = records[order[i]].covered ? 1.0 : 0.0;
    worst = std::min(worst, min_window_average(flags, min_len));
    if (worst == 0.0) break;
  }
  return worst;
}

std::vector<std::size_t> kmeans(const Matrix& x, std::size_t k, Rng& rng, std::size_t max_iter, Matrix* centroids) {
  const auto n = static_cast<std::size_t>(x.rows());
  if (n == 0) throw SizeError("kmeans: no points");
  k = std::clamp<std::size_t>(k, 1, n);
  Matrix c(static_cast<Index>(k), x.cols());
  c.row(0) = x.row(static_cast<Index>(rng.uniform_index(n)));
  Vector d2(static_cast<Index>(n));
  for (Index i = 0; i < static_cast<Index>(n); ++i) d2(i) = (x.row(i) - c.row(0)).squaredNorm();
  for (std::size_t j = 1; j < k; ++j) {
    const double total = d2.sum();
    std::size_t pick = rng.uniform_index(n);
    if (total > 0.0) {
      const double target = rng.uniform() * total;
      double cum = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        cum += d2(static_cast<Index>(i));
        if (cum >= target && d2(static_cast<Index>(i)) > 0.0) {
          pick = i;
          break;
        }
      }
    }
    c.row(static_cast<Index>(j)) = x.row(static_cast<Index>(pick));
    for (Index i = 0; i < static_cast<Index>(n); ++i) {
      d2(i) = std::min(d2(i), (x.row(i) - c.row(static_cast<Index>(j))).squaredNorm());
    }
  }

  std::vector<std::size_t> labels(n, 0);
  for (std::size_t iter = 0; iter < max_iter; ++iter) {
    bool changed = iter == 0;
    for (std::size_t i = 0; i < n; ++i) {
      Index best = 0;
      (c.rowwise() - x.row(static_cast<Index>(i))).rowwise().squaredNorm().minCoeff(&best);
      if (labels[i] != static_cast<std::size_t>(best)) {
        labels[i] = static_cast<std::size_t>(best);
        changed = true;
      }
    }
    if (!changed) break;
    Matrix sum = Matrix::Zero(c.rows(), c.cols());
    std::vector<std::size_t> count(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      sum.row(static_cast<Index>(labels[i])) += x.row(static_cast<Index>(i));
      ++count[labels[i]];
    }
    for (std::size_t j = 0; j < k; ++j) {
      if (count[j] > 0) c.row(static_cast<Index>(j)) = sum.row(static_cast<Index>(j)) / static_cast<double>(count[j]);
    }
  }
  if (centroids) *centroids = c;
  return labels;
}

CceResult conditional_coverage_error(const std::vector<CoverageRecord>& records, double alpha,
                                     const PartitionSpec& spec) {
  if (records.empty()) throw SizeError("CCE: no records");
  if (!(alpha > 0.0 && alpha < 1.0)) throw ArgumentError("CCE: alpha must lie in (0, 1)");
  const double target = 1.0 - alpha;
  CceResult result;
  if (spec.labels.empty() && spec.cells <= 1) {
    result.value = std::abs(marginal_coverage(records) - target);
    result.defined = true;
    result.viable_cells = 1;
    return result;
  }

  const Matrix z = Standardizer::fit(stack_covariates(records)).transform(stack_covariates(records));
  const std::size_t n = records.size();
  std::vector<std::size_t> labels;
  std::size_t cells = 0;
  if (!spec.labels.empty()) {
    if (spec.labels.size() != n) throw ShapeError("CCE: one label per record required");
    labels = spec.labels;
    cells = *std::max_element(labels.begin(), labels.end()) + 1;
  } else {
    Rng rng(spec.seed);
    labels = kmeans(z, spec.cells, rng);
    cells = std::min(spec.cells, n);
  }

  Matrix centroid = Matrix::Zero(static_cast<Index>(cells), z.cols());
  std::vector<std::size_t> count(cells, 0);
  for (std::size_t i = 0; i < n; ++i) {
    centroid.row(static_cast<Index>(labels[i])) += z.row(static_cast<Index>(i));
    ++count[labels[i]];
  }
  std::vector<std::size_t> viable;
  for (std::size_t j = 0; j < cells; ++j) {
    if (count[j] > 0) centroid.row(static_cast<Index>(j)) /= static_cast<double>(count[j]);
    if (count[j] >= spec.min_cell) viable.push_back(j);
  }
  result.viable_cells = viable.size();
  if (viable.size() < 2) return result;

  // Small cells join the viable cell with the nearest centroid.
  std::vector<std::size_t> target_cell(cells);
  for (std::size_t j = 0; j < cells; ++j) {
    target_cell[j] = j;
    if (count[j] >= spec.min_cell || count[j] == 0) continue;
    double best = kInf;
    for (std::size_t v : viable) {
      const double d = (centroid.row(static_cast<Index>(j)) - centroid.row(static_cast<Index>(v))).squaredNorm();
      if (d < best) {
        best = d;
        target_cell[j] = v;
      }
    }
    ++result.merged_cells;
  }
  std::vector<std::size_t> hits(cells, 0);
  std::vector<std::size_t> totals(cells, 0);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t c = target_cell[labels[i]];
    ++totals[c];
    hits[c] += records[i].covered ? 1 : 0;
  }
  double agg = 0.0;
  for (std::size_t v : viable) {
    const double dev = std::abs(static_cast<double>(hits[v]) / static_cast<double>(totals[v]) - target);
    agg = spec.use_max ? std::max(agg, dev) : agg + dev;
  }
  result.value = spec.use_max ? agg : agg / static_cast<double>(viable.size());
  result.defined = true;
  return result;
}

// ---------------------------------------------------------------------------

double log_unit_ball_volume(Index d) {
  const double h = 0.5 * static_cast<double>(d);
  return h * std::log(M_PI) - std::lgamma(h + 1.0);
}

namespace {

VolumeEstimate from_log(double log_v, Index d) {
  VolumeEstimate est;
  est.log_volume = log_v;
  est.log_volume_per_dim = log_v / static_cast<double>(d);
  est.volume = std::exp(log_v);
  return est;
}

VolumeEstimate from_mc(double mean, double sd, std::size_t draws, Index d) {
  VolumeEstimate est;
  est.exact = false;
  est.volume = mean;
  est.stderr_volume = sd / std::sqrt(static_cast<double>(draws));
  if (!(mean > 0.0)) {
    est.empty = true;
    est.log_volume = -kInf;
    est.log_volume_per_dim = -kInf;
    est.relative_stderr = kNaN;
    return est;
  }
  est.relative_stderr = est.stderr_volume / mean;
  est.log_volume = std::log(mean);
  est.log_volume_per_dim = est.log_volume / static_cast<double>(d);
  return est;
}

void mean_sd(const std::vector<double>& w, double* mean, double* sd) {
  const double m = std::accumulate(w.begin(), w.end(), 0.0) / static_cast<double>(w.size());
  double ss = 0.0;
  for (double v : w) ss += (v - m) * (v - m);
  *mean = m;
  *sd = w.size() > 1 ? std::sqrt(ss / static_cast<double>(w.size() - 1)) : 0.0;
}

}  // namespace

VolumeEstimate set_volume(const SetGeometry& g, const VolumeSpec& spec) {
  const Index d = g.dim();
  if (g.unbounded()) {
    VolumeEstimate est;
    est.infinite = true;
    est.log_volume = kInf;
    est.log_volume_per_dim = kInf;
    est.volume = kInf;
    return est;
  }
  const double r = g.radius();
  const bool radial = g.kind != GeometryKind::density_superlevel;
  if (radial && r <= 0.0) {
    // A negative radius is the empty set; radius 0 is a null set.
    VolumeEstimate est;
    est.empty = true;
    est.log_volume = -kInf;
    est.log_volume_per_dim = -kInf;
    return est;
  }
  switch (g.kind) {
    case GeometryKind::interval: return from_log(std::log(2.0 * r), 1);
    case GeometryKind::hypercube: return from_log(static_cast<double>(d) * std::log(2.0 * r), d);
    case GeometryKind::ellipsoid: {
      const double log_det = g.chol.diagonal().array().abs().log().sum();
      return from_log(log_unit_ball_volume(d) + static_cast<double>(d) * std::log(r) + log_det, d);
    }
    case GeometryKind::density_superlevel: {
      if (spec.draws < 2) throw ArgumentError("set_volume: need at least 2 draws");
      Rng rng(spec.seed);
      std::vector<double> w(spec.draws);
      for (auto& v : w) {
        const Vector y = g.mixture.sample(rng);
        const double lp = g.mixture.log_density(y);
        v = g.contains(y) ? std::exp(-lp) : 0.0;
      }
      double mean = 0.0;
      double sd = 0.0;
      mean_sd(w, &mean, &sd);
      return from_mc(mean, sd, spec.draws, d);
    }
    case GeometryKind::ball_union: {
      if (g.centers.empty()) throw ArgumentError("set_volume: ball union without centers");
      if (spec.draws < 2) throw ArgumentError("set_volume: need at least 2 draws");
      Rng rng(spec.seed);
      const auto k = g.centers.size();
      const double ball = std::exp(log_unit_ball_volume(d) + static_cast<double>(d) * std::log(r));
      std::vector<double> w(spec.draws);
      Vector dir(d);
      for (auto& v : w) {
        const Vector& c = g.centers[rng.uniform_index(k)];
        do {
          for (Index j = 0; j < d; ++j) dir(j) = rng.normal();
        } while (dir.norm() < 1e-300);
        const double rad = r * std::pow(rng.uniform(), 1.0 / static_cast<double>(d));
        const Vector y = c + dir.normalized() * rad;
        std::size_t m = 0;
        for (const auto& other : g.centers) m += (y - other).norm() <= r ? 1 : 0;
        v = static_cast<double>(k) * ball / static_cast<double>(std::max<std::size_t>(m, 1));
      }
      double mean = 0.0;
      double sd = 0.0;
      mean_sd(w, &mean, &sd);
      return from_mc(mean, sd, spec.draws, d);
    }
  }
  return {};
}

void write_metric_rows(std::ostream& out, const std::vector<MetricRow>& rows) {
  out << "metric,value,stderr,n\n";
  auto num = [&out](double v) {
    if (std::isnan(v)) {
      out << "NA";
    } else {
      out << v;
    }
  };
  const auto old = out.precision(10);
  for (const auto& r : rows) {
    out << r.metric << ',';
    num(r.value);
    out << ',';
    num(r.stderr_value);
    out << ',' << r.n << '\n';
  }
  out.precision(old);
}

VolumeSummary summarize_volumes(const std::vector<CoverageRecord>& records) {
  VolumeSummary s;
  std::vector<double> finite;
  for (const auto& r : records) {
    const double v = r.log_volume_per_dim;
    if (std::isnan(v)) continue;
    if (v == -kInf) {
      ++s.empty;
    } else if (v == kInf) {
      ++s.infinite;
    } else {
      finite.push_back(v);
    }
  }
  s.used = finite.size();
  if (finite.empty()) return s;
  s.mean = std::accumulate(finite.begin(), finite.end(), 0.0) / static_cast<double>(finite.size());
  std::sort(finite.begin(), finite.end());
  const std::size_t m = finite.size();
  s.median = m % 2 == 1 ? finite[m / 2] : 0.5 * (finite[m / 2 - 1] + finite[m / 2]);
  return s;
}

}  // namespace rcp
