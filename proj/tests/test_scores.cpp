#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>

#include "rcp/rng.hpp"
#include "rcp/scores.hpp"

using namespace rcp;

namespace {

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Index>(v.size()));
  Index i = 0;
  for (double a : v) out(i++) = a;
  return out;
}

std::shared_ptr<const PointPredictor> linear_point(Index d) {
  return std::make_shared<FunctionPointPredictor>(
      [d](const Vector& x) { return Vector::Constant(d, 0.5 * x(0)); }, d);
}

// Two-component predictor whose means and scales move with x.
class WigglyMixture final : public MixturePredictor {
 public:
  explicit WigglyMixture(Index d) : d_(d) {}
  GaussianMixture predict(const Vector& x) const override {
    Vector w(2);
    w << 0.3, 0.7;
    std::vector<Vector> means = {Vector::Constant(d_, x(0)), Vector::Constant(d_, -x(0) + 1.0)};
    Matrix l0 = Matrix::Identity(d_, d_) * (0.5 + std::abs(x(0)));
    Matrix l1 = Matrix::Identity(d_, d_) * 0.8;
    if (d_ > 1) l1(1, 0) = 0.3;
    return GaussianMixture(w, means, {l0, l1});
  }
  Index response_dim() const override { return d_; }

 private:
  Index d_;
};

class MovingGaussian final : public MixturePredictor {
 public:
  GaussianMixture predict(const Vector& x) const override {
    Matrix cov(1, 1);
    cov << 0.2 + x(0) * x(0);
    return GaussianMixture::single(Vector::Constant(1, std::sin(x(0))), cov);
  }
  Index response_dim() const override { return 1; }
};

}  // namespace

TEST_CASE("abs_residual examples") {
  CHECK(abs_residual(0.5, 0.5) == 0.0);
  CHECK(abs_residual(1.0, -1.0) == 2.0);
  CHECK(abs_residual(0.3, 0.7, 1.0) == doctest::Approx(1.4).epsilon(1e-15));
  CHECK_THROWS_AS(abs_residual(std::nan(""), 1.0), NumericError);
}

TEST_CASE("linf_residual examples") {
  CHECK(linf_residual(vec({0, 0}), vec({1, -2})) == 2.0);
  CHECK(linf_residual(vec({1, 2}), vec({1, 2})) == 0.0);
  CHECK(linf_residual(vec({1, 1, 1}), vec({1.5, 0.2, 1.0})) == doctest::Approx(0.8));
  CHECK_THROWS_AS(linf_residual(vec({0, 0}), vec({1})), ShapeError);
}

TEST_CASE("mahalanobis examples") {
  const Vector mu = vec({1, -1});
  const Vector y = vec({4, 3});
  CHECK(mahalanobis(mu, Matrix::Identity(2, 2), y) == doctest::Approx(5.0));
  CHECK(mahalanobis(mu, Matrix::Identity(2, 2), mu) == 0.0);
  Matrix c(1, 1);
  c << 4.0;
  CHECK(mahalanobis(vec({0}), c, vec({2})) == doctest::Approx(1.0));
  Matrix bad(2, 2);
  bad << 1, 2, 2, 1;
  CHECK_THROWS_AS(mahalanobis(mu, bad, y), DecompositionError);
}

TEST_CASE("mahalanobis agrees with an explicit inverse") {
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    Matrix a(3, 3);
    for (Index i = 0; i < 9; ++i) a(i) = rng.normal();
    const Matrix cov = a * a.transpose() + Matrix::Identity(3, 3);
    Vector mu(3), y(3);
    for (Index i = 0; i < 3; ++i) {
      mu(i) = rng.normal();
      y(i) = rng.normal();
    }
    const double direct = std::sqrt((y - mu).dot(cov.inverse() * (y - mu)));
    CHECK(mahalanobis(mu, cov, y) == doctest::Approx(direct).epsilon(1e-10));
  }
}

TEST_CASE("mixture_nll examples") {
  Matrix one(1, 1);
  one << 1.0;
  const GaussianMixture g = GaussianMixture::single(vec({0.3}), one);
  CHECK(mixture_nll(g, vec({0.3})).value == doctest::Approx(0.5 * std::log(2.0 * std::numbers::pi)).epsilon(1e-14));

  Matrix l(1, 1);
  l << 0.7;
  const GaussianMixture twin(vec({0.5, 0.5}), {vec({1.0}), vec({1.0})}, {l, l});
  const GaussianMixture solo(vec({1.0}), {vec({1.0})}, {l});
  CHECK(mixture_nll(twin, vec({0.2})).value == doctest::Approx(mixture_nll(solo, vec({0.2})).value));

  const GaussianMixture masked(vec({1.0, 0.0}), {vec({1.0}), vec({-5.0})}, {l, l});
  CHECK(mixture_nll(masked, vec({-5.0})).value == doctest::Approx(mixture_nll(solo, vec({-5.0})).value));

  const NllValue far = mixture_nll(solo, vec({1e200}));
  CHECK(far.saturated);
  CHECK(far.value == kNllSaturation);
}

TEST_CASE("sample_distance examples") {
  CHECK(sample_distance({vec({0, 0}), vec({3, 4})}, vec({3, 3})) == doctest::Approx(1.0));
  CHECK(sample_distance({vec({0, 0}), vec({3, 4})}, vec({3, 4})) == 0.0);
  CHECK(sample_distance({vec({0, 0})}, vec({3, 4})) == doctest::Approx(5.0));
  CHECK_THROWS_AS(sample_distance({}, vec({1, 1})), ArgumentError);
}

TEST_CASE("score kind names round trip") {
  for (auto k : {ScoreKind::abs_residual, ScoreKind::linf_residual, ScoreKind::mahalanobis, ScoreKind::mixture_nll,
                 ScoreKind::sample_distance}) {
    CHECK(parse_score_kind(to_string(k)) == k);
  }
  CHECK(parse_score_kind("pcp") == ScoreKind::sample_distance);
  CHECK_THROWS_AS(parse_score_kind("nope"), ArgumentError);
}

TEST_CASE("sublevel geometry examples") {
  const auto linf = ScoreFunction::linf_residual(std::make_shared<FunctionPointPredictor>(
      [](const Vector&) { return Vector::Zero(2); }, 2));
  const SetGeometry cube = linf.sublevel(vec({0.0}), 2.0);
  CHECK(cube.kind == GeometryKind::hypercube);
  CHECK(cube.radius() == 2.0);

  const auto nll = ScoreFunction::mixture_nll(std::make_shared<WigglyMixture>(2));
  const SetGeometry dens = nll.sublevel(vec({0.2}), 1.5);
  CHECK(dens.kind == GeometryKind::density_superlevel);
  const Vector probe = vec({0.1, 0.3});
  CHECK(dens.contains(probe) == (dens.mixture.density(probe) >= std::exp(-1.5)));
}

TEST_CASE("geometry membership agrees with the score for every kind") {
  Rng rng(11);
  const auto point1 = linear_point(1);
  const auto point3 = linear_point(3);
  const auto mix1 = std::make_shared<WigglyMixture>(1);
  const auto mix2 = std::make_shared<WigglyMixture>(2);
  std::vector<ScoreFunction> scores = {
      ScoreFunction::abs_residual(point1, 0.25),       ScoreFunction::linf_residual(point3),
      ScoreFunction::mahalanobis(std::make_shared<MovingGaussian>()),
      ScoreFunction::mixture_nll(mix2, -0.5),          ScoreFunction::sample_distance(mix2, 20, 5),
      ScoreFunction::mixture_nll(mix1)};
  for (const auto& s : scores) {
    for (int i = 0; i < 1000; ++i) {
      const Vector x = vec({rng.uniform(-1, 1)});
      Vector y(s.response_dim());
      for (Index j = 0; j < y.size(); ++j) y(j) = rng.normal(0.0, 1.5);
      const double level = s(x, y) + rng.normal(0.0, 0.3);
      const SetGeometry g = s.sublevel(x, level);
      REQUIRE(g.contains(y) == (s(x, y) <= level));
    }
  }
}

TEST_CASE("mahalanobis score requires one component") {
  CHECK_THROWS(ScoreFunction::mahalanobis(std::make_shared<WigglyMixture>(2))(vec({0.1}), vec({0, 0})));
}

TEST_CASE("score shift is additive and preserves sublevel sets") {
  Rng rng(2);
  const auto base = ScoreFunction::linf_residual(linear_point(2));
  const auto shifted = base.shifted(1.25);
  CHECK(shifted.shift() == 1.25);
  for (int i = 0; i < 200; ++i) {
    const Vector x = vec({rng.normal()});
    const Vector y = vec({rng.normal(), rng.normal()});
    CHECK(shifted(x, y) == doctest::Approx(base(x, y) + 1.25).epsilon(1e-15));
    const double c = rng.uniform(0.0, 2.0);
    CHECK(shifted.sublevel(x, c + 1.25).contains(y) == base.sublevel(x, c).contains(y));
  }
}

TEST_CASE("translation consistency") {
  Rng rng(4);
  for (int i = 0; i < 100; ++i) {
    const Vector mu = vec({rng.normal(), rng.normal()});
    const Vector r = vec({rng.normal(), rng.normal()});
    const Vector shift = vec({rng.normal(), rng.normal()});
    CHECK(linf_residual(mu, mu + r) == doctest::Approx(linf_residual(mu + shift, mu + shift + r)));
    CHECK(mahalanobis(mu, Matrix::Identity(2, 2) * 2.0, mu + r) ==
          doctest::Approx(mahalanobis(mu + shift, Matrix::Identity(2, 2) * 2.0, mu + shift + r)));
  }
}

TEST_CASE("sample draws depend only on x and the seed") {
  const auto s = ScoreFunction::sample_distance(std::make_shared<WigglyMixture>(2), 10, 99);
  const auto a = s.draw_samples(vec({0.4}));
  const auto b = s.draw_samples(vec({0.4}));
  REQUIRE(a.size() == 10);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK((a[i] - b[i]).norm() == 0.0);
  CHECK((s.draw_samples(vec({0.5}))[0] - a[0]).norm() > 0.0);
}
