#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>
#include <vector>

#include "rcp/metrics.hpp"

using namespace rcp;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::vector<CoverageRecord> records_1d(const std::vector<double>& x, const std::vector<bool>& covered) {
  std::vector<CoverageRecord> r;
  for (std::size_t i = 0; i < x.size(); ++i) r.push_back({Vector::Constant(1, x[i]), covered[i]});
  return r;
}

// Exhaustive slab search in one dimension.
double wsc_oracle_1d(std::vector<CoverageRecord> r, double delta) {
  std::sort(r.begin(), r.end(), [](const auto& a, const auto& b) { return a.x(0) < b.x(0); });
  const std::size_t n = r.size();
  const auto min_len = static_cast<std::size_t>(std::ceil(delta * static_cast<double>(n) - 1e-12));
  double best = kInf;
  for (std::size_t i = 0; i < n; ++i) {
    double hit = 0.0;
    for (std::size_t j = i; j < n; ++j) {
      hit += r[j].covered;
      if (j - i + 1 >= min_len) best = std::min(best, hit / static_cast<double>(j - i + 1));
    }
  }
  return best;
}

SetGeometry ball_union(std::vector<Vector> centers, double radius) {
  SetGeometry g;
  g.kind = GeometryKind::ball_union;
  g.level = radius;
  g.centers = std::move(centers);
  return g;
}

Vector v2(double a, double b) {
  Vector v(2);
  v << a, b;
  return v;
}

}  // namespace

TEST_CASE("marginal coverage examples") {
  const std::vector<double> x(10, 0.0);
  CHECK(marginal_coverage(records_1d(x, std::vector<bool>(10, true))) == 1.0);
  CHECK(marginal_coverage(records_1d(x, std::vector<bool>(10, false))) == 0.0);
  std::vector<bool> nine(10, true);
  nine[4] = false;
  CHECK(marginal_coverage(records_1d(x, nine)) == doctest::Approx(0.9));
  CHECK_THROWS_AS(marginal_coverage({}), SizeError);
}

TEST_CASE("worst slab examples") {
  std::vector<double> x;
  std::vector<bool> c;
  for (int i = 1; i <= 10; ++i) {
    x.push_back(i);
    c.push_back(i <= 8);
  }
  CHECK(worst_slab_coverage(records_1d(x, c), {0.2, 10, 1}) == 0.0);
  CHECK(worst_slab_coverage(records_1d(x, std::vector<bool>(10, true)), {0.2, 10, 1}) == 1.0);
  CHECK_THROWS_AS(worst_slab_coverage(records_1d({1, 2, 3}, {true, true, true}), {0.2, 10, 1}), SizeError);
}

TEST_CASE("worst slab agrees with exhaustive enumeration in 1D") {
  Rng rng(1);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 10 + rng.uniform_index(40);
    std::vector<double> x(n);
    std::vector<bool> c(n);
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = rng.normal();
      c[i] = rng.bernoulli(0.8);
    }
    const double delta = rng.uniform(0.1, 0.5);
    const auto r = records_1d(x, c);
    CHECK(worst_slab_coverage(r, {delta, 5, 2}) == doctest::Approx(wsc_oracle_1d(r, delta)).epsilon(1e-12));
  }
}

TEST_CASE("min window average matches brute force") {
  Rng rng(2);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> v(5 + rng.uniform_index(30));
    for (auto& a : v) a = rng.uniform();
    const std::size_t len = 1 + rng.uniform_index(v.size());
    double best = kInf;
    for (std::size_t i = 0; i < v.size(); ++i) {
      double s = 0.0;
      for (std::size_t j = i; j < v.size(); ++j) {
        s += v[j];
        if (j - i + 1 >= len) best = std::min(best, s / static_cast<double>(j - i + 1));
      }
    }
    std::size_t b = 0, e = 0;
    const double got = min_window_average(v, len, &b, &e);
    CHECK(got == doctest::Approx(best).epsilon(1e-12));
    CHECK(e - b >= len);
  }
}

TEST_CASE("worst slab is at most marginal, and near nominal under independent coverage") {
  Rng rng(3);
  const std::size_t n = 5000;
  std::vector<CoverageRecord> r;
  for (std::size_t i = 0; i < n; ++i) {
    Vector x(3);
    for (Index j = 0; j < 3; ++j) x(j) = rng.normal();
    r.push_back({x, rng.bernoulli(0.9)});
  }
  const double wsc = worst_slab_coverage(r, {0.2, 200, 4});
  CHECK(wsc <= marginal_coverage(r));
  // Binomial slack at window size delta n, widened for the search over slabs.
  const double se = std::sqrt(0.09 / (0.2 * n));
  CHECK(wsc >= 0.9 - 6.0 * se);
}

TEST_CASE("conditional coverage error examples") {
  std::vector<CoverageRecord> r;
  PartitionSpec spec;
  for (int i = 0; i < 20; ++i) {
    r.push_back({Vector::Constant(1, i < 10 ? 0.0 : 1.0), i < 10 ? i < 8 : true});
    spec.labels.push_back(i < 10 ? 0 : 1);
  }
  const CceResult two = conditional_coverage_error(r, 0.1, spec);
  CHECK(two.defined);
  CHECK(two.viable_cells == 2);
  CHECK(two.value == doctest::Approx(0.1));
  spec.use_max = true;
  CHECK(conditional_coverage_error(r, 0.1, spec).value == doctest::Approx(0.1));

  PartitionSpec single;
  single.cells = 1;
  CHECK(conditional_coverage_error(r, 0.1, single).value == doctest::Approx(std::abs(0.9 - 0.9)));
  CHECK(conditional_coverage_error(r, 0.3, single).value == doctest::Approx(0.2));

  std::vector<CoverageRecord> exact;
  PartitionSpec exact_spec;
  for (int cell = 0; cell < 3; ++cell) {
    for (int i = 0; i < 10; ++i) {
      exact.push_back({Vector::Constant(1, cell), i < 9});
      exact_spec.labels.push_back(static_cast<std::size_t>(cell));
    }
  }
  CHECK(conditional_coverage_error(exact, 0.1, exact_spec).value == doctest::Approx(0.0));
}

TEST_CASE("conditional coverage error merges small cells and flags undefined results") {
  std::vector<CoverageRecord> r;
  PartitionSpec spec;
  for (int i = 0; i < 25; ++i) {
    r.push_back({Vector::Constant(1, i < 12 ? 0.0 : (i < 24 ? 5.0 : 4.9)), true});
    spec.labels.push_back(i < 12 ? 0 : (i < 24 ? 1 : 2));
  }
  const CceResult res = conditional_coverage_error(r, 0.1, spec);
  CHECK(res.defined);
  CHECK(res.viable_cells == 2);
  CHECK(res.merged_cells == 1);

  std::vector<CoverageRecord> few(15, {Vector::Constant(1, 0.0), true});
  PartitionSpec tiny;
  tiny.cells = 20;
  const CceResult undef = conditional_coverage_error(few, 0.1, tiny);
  CHECK(!undef.defined);
}

TEST_CASE("conditional coverage error of independent Bernoulli coverage is small") {
  Rng rng(4);
  std::vector<CoverageRecord> r;
  for (int i = 0; i < 4000; ++i) {
    Vector x(2);
    x << rng.normal(), rng.uniform();
    r.push_back({x, rng.bernoulli(0.9)});
  }
  PartitionSpec spec;
  spec.seed = 5;
  const CceResult res = conditional_coverage_error(r, 0.1, spec);
  REQUIRE(res.defined);
  // Each of 20 cells has about 200 points.
  CHECK(res.value <= 3.0 * std::sqrt(0.09 / 200.0));
}

TEST_CASE("k-means separates well-separated clusters and is seed-deterministic") {
  Rng rng(6);
  Matrix x(90, 2);
  for (Index i = 0; i < 90; ++i) {
    const double cx = static_cast<double>(i % 3) * 10.0;
    x(i, 0) = cx + rng.normal(0.0, 0.3);
    x(i, 1) = rng.normal(0.0, 0.3);
  }
  Rng a(7), b(7);
  const auto la = kmeans(x, 3, a);
  CHECK(la == kmeans(x, 3, b));
  for (Index i = 3; i < 90; ++i) CHECK(la[static_cast<std::size_t>(i)] == la[static_cast<std::size_t>(i % 3)]);
}

TEST_CASE("closed-form volumes") {
  SetGeometry cube;
  cube.kind = GeometryKind::hypercube;
  cube.center = Vector::Zero(2);
  cube.level = 1.5;
  const VolumeEstimate c = set_volume(cube);
  CHECK(c.exact);
  CHECK(c.log_volume_per_dim == doctest::Approx(std::log(9.0) / 2.0));

  SetGeometry interval;
  interval.kind = GeometryKind::interval;
  interval.center = Vector::Constant(1, 3.0);
  interval.level = 2.5;
  interval.shift = 0.5;
  CHECK(set_volume(interval).volume == doctest::Approx(4.0));

  SetGeometry ell;
  ell.kind = GeometryKind::ellipsoid;
  ell.center = Vector::Zero(2);
  ell.chol = Matrix::Identity(2, 2) * 2.0;
  ell.chol(1, 0) = 0.7;
  ell.level = 1.5;
  // pi r^2 det(L) with det(L) = 4.
  CHECK(set_volume(ell).volume == doctest::Approx(std::numbers::pi * 2.25 * 4.0));
  CHECK(std::exp(log_unit_ball_volume(3)) == doctest::Approx(4.0 / 3.0 * std::numbers::pi));

  SetGeometry empty = cube;
  empty.level = -0.1;
  const VolumeEstimate e = set_volume(empty);
  CHECK(e.empty);
  CHECK(e.log_volume == -kInf);

  SetGeometry open = cube;
  open.level = kInf;
  CHECK(set_volume(open).infinite);
}

TEST_CASE("ball-union volumes") {
  const VolumeEstimate disjoint = set_volume(ball_union({v2(0, 0), v2(5, 0)}, 1.0), {20000, 1});
  CHECK(disjoint.volume == doctest::Approx(2.0 * std::numbers::pi).epsilon(0.02));
  CHECK(std::abs(disjoint.volume - 2.0 * std::numbers::pi) <= 3.0 * disjoint.stderr_volume + 1e-9);
  const VolumeEstimate same = set_volume(ball_union({v2(1, 1), v2(1, 1)}, 1.0), {2000, 2});
  CHECK(same.volume == doctest::Approx(std::numbers::pi).epsilon(1e-12));

  // Two unit disks at distance 1: union area 2 pi - lens area.
  const double d = 1.0;
  const double lens = 2.0 * std::acos(d / 2.0) - 0.5 * d * std::sqrt(4.0 - d * d);
  const VolumeEstimate overlap = set_volume(ball_union({v2(0, 0), v2(1, 0)}, 1.0), {40000, 3});
  CHECK(std::abs(overlap.volume - (2.0 * std::numbers::pi - lens)) <= 3.0 * overlap.stderr_volume);
  CHECK(!overlap.exact);
}

TEST_CASE("density superlevel volumes by importance sampling") {
  // N(0, 1): {-log p <= c} is |y| <= sqrt(2 (c - log sqrt(2 pi))).
  Matrix one(1, 1);
  one << 1.0;
  SetGeometry g;
  g.kind = GeometryKind::density_superlevel;
  g.mixture = GaussianMixture::single(Vector::Zero(1), one);
  g.level = 2.0;
  const double half = std::sqrt(2.0 * (2.0 - 0.5 * std::log(2.0 * std::numbers::pi)));
  const VolumeEstimate v = set_volume(g, {20000, 4});
  CHECK(std::abs(v.volume - 2.0 * half) <= 3.0 * v.stderr_volume);
  CHECK(v.relative_stderr < 0.05);

  // Two-dimensional isotropic Gaussian with sd 0.5: disk of radius r.
  SetGeometry g2;
  g2.kind = GeometryKind::density_superlevel;
  g2.mixture = GaussianMixture::single(Vector::Zero(2), Matrix::Identity(2, 2) * 0.25);
  g2.level = 1.0;
  const double log_norm = std::log(2.0 * std::numbers::pi * 0.25);
  const double r2 = 2.0 * 0.25 * (1.0 - log_norm);
  const VolumeEstimate w = set_volume(g2, {20000, 5});
  CHECK(std::abs(w.volume - std::numbers::pi * r2) <= 3.0 * w.stderr_volume);
}

TEST_CASE("metric rows and volume summaries") {
  std::ostringstream out;
  write_metric_rows(out, {{"coverage", 0.9, std::numeric_limits<double>::quiet_NaN(), 10}, {"wsc", 0.8, 0.01, 10}});
  const std::string s = out.str();
  CHECK(s.find("metric,value,stderr,n") == 0);
  CHECK(s.find("coverage,0.9,NA,10") != std::string::npos);

  std::vector<CoverageRecord> r(5);
  r[0].log_volume_per_dim = 1.0;
  r[1].log_volume_per_dim = 3.0;
  r[2].log_volume_per_dim = 2.0;
  r[3].log_volume_per_dim = -kInf;
  r[4].log_volume_per_dim = kInf;
  const VolumeSummary v = summarize_volumes(r);
  CHECK(v.median == 2.0);
  CHECK(v.empty == 1);
  CHECK(v.infinite == 1);
  CHECK(v.used == 3);
}
