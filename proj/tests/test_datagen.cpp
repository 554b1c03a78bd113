#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include <boost/math/distributions/normal.hpp>

#include "rcp/datagen.hpp"

using namespace rcp;

namespace {

double boost_normal_quantile(double p) { return boost::math::quantile(boost::math::normal(), p); }

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double a : v) s += a;
  return s / static_cast<double>(v.size());
}

double sd_of(const std::vector<double>& v) {
  const double m = mean_of(v);
  double s = 0.0;
  for (double a : v) s += (a - m) * (a - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

// Distance from p to the arc {c + (cos t, sin t) * sgn : t in [0, pi]}.
double arc_distance(const Vector& p, double cx, double cy, double sgn) {
  const double dx = p(0) - cx;
  const double dy = (p(1) - cy) * sgn;
  if (dy >= 0.0) return std::abs(std::hypot(dx, dy) - 1.0);
  return std::min(std::hypot(dx - 1.0, dy), std::hypot(dx + 1.0, dy));
}

}  // namespace

TEST_CASE("inverse normal CDF against an independent implementation") {
  for (double p : {1e-12, 1e-8, 1e-4, 0.01, 0.025, 0.05, 0.2, 0.5, 0.7, 0.95, 0.975, 0.999, 1 - 1e-8}) {
    CHECK(std::abs(inverse_normal_cdf(p) - boost_normal_quantile(p)) < 1e-9);
  }
  Rng rng(1);
  for (int i = 0; i < 2000; ++i) {
    const double p = rng.uniform(1e-6, 1 - 1e-6);
    CHECK(std::abs(inverse_normal_cdf(p) - boost_normal_quantile(p)) < 1e-9);
    CHECK(normal_cdf(inverse_normal_cdf(p)) == doctest::Approx(p).epsilon(1e-10));
  }
  CHECK_THROWS_AS(inverse_normal_cdf(0.0), ArgumentError);
  CHECK_THROWS_AS(inverse_normal_cdf(1.0), ArgumentError);
}

TEST_CASE("oracle toy quantile examples") {
  CHECK(oracle_toy_quantile(1.0, 0.1) == doctest::Approx(1.6448536269514722).epsilon(1e-12));
  CHECK(oracle_toy_quantile(0.5, 0.1) == doctest::Approx(0.25 * 1.6448536269514722).epsilon(1e-12));
  CHECK(oracle_toy_quantile(1.0, 0.999999) < 1e-5);
}

TEST_CASE("oracle toy quantile against an empirical quantile") {
  Rng rng(2);
  const std::size_t n = 1000000;
  const double alpha = 0.1;
  std::vector<double> z(n);
  for (auto& a : z) a = std::abs(rng.normal());
  std::sort(z.begin(), z.end());
  const auto k = static_cast<std::size_t>(std::ceil((1 - alpha) * static_cast<double>(n)));
  for (double x : {0.25, 0.5, 1.0}) {
    const double emp = x * x * z[k - 1];
    // Standard error of the sample quantile: sqrt(p(1-p)/n) / f(q), f the half-normal density.
    const double q = oracle_toy_quantile(x, alpha);
    const double dens = 2.0 * std::exp(-0.5 * (q / (x * x)) * (q / (x * x))) / std::sqrt(2.0 * std::numbers::pi) /
                        (x * x);
    const double se = std::sqrt(alpha * (1 - alpha) / static_cast<double>(n)) / dens;
    CHECK(std::abs(emp - q) <= 3.0 * se);
  }
}

TEST_CASE("toy sampler moments and determinism") {
  const auto a = sample_toy({100000, 3});
  const auto b = sample_toy({100000, 3});
  CHECK((a.x() - b.x()).norm() == 0.0);
  CHECK((a.y() - b.y()).norm() == 0.0);
  std::vector<double> xs(a.x().data(), a.x().data() + a.size());
  const double se = sd_of(xs) / std::sqrt(static_cast<double>(xs.size()));
  CHECK(std::abs(mean_of(xs) - 0.6) <= 3.0 * se);
  CHECK(a.x().minCoeff() > 0.0);
  CHECK(a.x().maxCoeff() < 1.0);
}

TEST_CASE("toy residuals are standard normal (Kolmogorov-Smirnov)") {
  const auto d = sample_toy({20000, 4});
  std::vector<double> z(static_cast<std::size_t>(d.size()));
  for (Index i = 0; i < d.size(); ++i) {
    const double x = d.x()(i, 0);
    z[static_cast<std::size_t>(i)] = (d.y()(i, 0) - x * std::sin(x)) / (x * x);
  }
  std::sort(z.begin(), z.end());
  const double n = static_cast<double>(z.size());
  double ks = 0.0;
  const boost::math::normal std_normal;
  for (std::size_t i = 0; i < z.size(); ++i) {
    const double f = boost::math::cdf(std_normal, z[i]);
    ks = std::max({ks, f - static_cast<double>(i) / n, static_cast<double>(i + 1) / n - f});
  }
  // 99% critical value of the one-sample KS statistic.
  CHECK(ks < 1.628 / std::sqrt(n));
}

TEST_CASE("oracle coverage is nominal marginally and within x bins") {
  const auto d = sample_toy({50000, 5});
  const double alpha = 0.1;
  std::vector<double> hit(4, 0.0), cnt(4, 0.0);
  for (Index i = 0; i < d.size(); ++i) {
    const double x = d.x()(i, 0);
    const bool in = std::abs(d.y()(i, 0) - toy_mean(x)) <= oracle_toy_quantile(x, alpha);
    const auto b = std::min<std::size_t>(3, static_cast<std::size_t>(x * 4));
    hit[b] += in;
    cnt[b] += 1;
  }
  double total_hit = 0.0;
  for (std::size_t b = 0; b < 4; ++b) {
    total_hit += hit[b];
    CHECK(std::abs(hit[b] / cnt[b] - 0.9) <= 3.0 * std::sqrt(0.09 / cnt[b]));
  }
  CHECK(std::abs(total_hit / d.size() - 0.9) <= 3.0 * std::sqrt(0.09 / d.size()));
}

TEST_CASE("contamination") {
  ContaminationSpec zero{0.0, 1};
  CHECK(contaminated_tau(0.7, 0.1, zero) == oracle_toy_quantile(0.7, 0.1));
  Rng rng(6);
  std::vector<double> full, half;
  const double x = 0.8;
  for (int i = 0; i < 20000; ++i) {
    full.push_back(contaminated_tau(x, 0.1, 1.0, rng));
    half.push_back(contaminated_tau(x, 0.1, 0.5, rng));
  }
  const double n = 20000.0;
  // Sample s.d. of N(0, x^4) has standard error about sd / sqrt(2n).
  CHECK(std::abs(sd_of(full) - x * x) <= 3.0 * x * x / std::sqrt(2.0 * n));
  CHECK(std::abs(mean_of(half) - 0.5 * oracle_toy_quantile(x, 0.1)) <= 3.0 * sd_of(half) / std::sqrt(n));
  // The seeded form is a function of x.
  ContaminationSpec s{0.5, 9};
  CHECK(contaminated_tau(0.3, 0.1, s) == contaminated_tau(0.3, 0.1, s));
  CHECK(contaminated_tau(0.3, 0.1, s) != contaminated_tau(0.31, 0.1, s));
  CHECK_THROWS_AS(contaminated_tau(0.3, 0.1, ContaminationSpec{1.5, 0}), ArgumentError);

  const ToyQuantileEstimator est(0.1, ContaminationSpec{});
  CHECK(est.predict(Vector::Constant(1, 0.4)) == oracle_toy_quantile(0.4, 0.1));
}

TEST_CASE("toy oracle predictors") {
  const ToyMeanPredictor mean;
  CHECK(mean.predict(Vector::Constant(1, 0.5))(0) == doctest::Approx(0.5 * std::sin(0.5)));
  const ToyMixturePredictor mix;
  const GaussianMixture g = mix.predict(Vector::Constant(1, 0.5));
  CHECK(g.covariance(0)(0, 0) == doctest::Approx(0.0625));
  CHECK(g.mean(0)(0) == doctest::Approx(0.5 * std::sin(0.5)));
}

TEST_CASE("two moons") {
  std::vector<int> arms;
  const auto clean = sample_two_moons(2000, [](double) { return 0.0; }, 7, &arms);
  REQUIRE(arms.size() == 2000);
  for (Index i = 0; i < clean.size(); ++i) {
    const Vector p = clean.y_row(i);
    const double d = arms[static_cast<std::size_t>(i)] == 0 ? arc_distance(p, 0.0, 0.0, 1.0)
                                                            : arc_distance(p, 1.0, 0.5, -1.0);
    CHECK(d < 1e-12);
  }

  const auto big = sample_two_moons(100000, default_moons_noise, 8, &arms);
  double ones = 0.0;
  for (int a : arms) ones += a;
  CHECK(std::abs(ones / 100000.0 - 0.5) <= 3.0 * 0.5 / std::sqrt(100000.0));
  const auto again = sample_two_moons(100000, default_moons_noise, 8);
  CHECK((big.y() - again.y()).norm() == 0.0);
  CHECK(big.response_dim() == 2);
  CHECK(default_moons_noise(1.0) == doctest::Approx(0.2));
}
