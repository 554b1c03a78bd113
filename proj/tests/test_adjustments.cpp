#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "rcp/adjustments.hpp"
#include "rcp/rng.hpp"

using namespace rcp;

namespace {

const AdjustmentFamily kAdd(AdjustmentKind::additive);
const AdjustmentFamily kMul(AdjustmentKind::multiplicative);
const AdjustmentFamily kExpAdd(AdjustmentKind::exp_additive);
const AdjustmentFamily kExpMul(AdjustmentKind::exp_multiplicative);

const AdjustmentFamily kAll[] = {kAdd, kMul, kExpAdd, kExpMul};

// Draw from the interior of an interval, keeping magnitudes moderate so exp() stays finite.
double draw_in(const Interval& dom, Rng& rng) {
  if (dom.bounded_below()) return dom.lower + std::exp(rng.uniform(-3.0, 1.5));
  return rng.uniform(-4.0, 4.0);
}

}  // namespace

TEST_CASE("forward examples") {
  CHECK(kAdd.forward(1.5, 2.0) == 3.5);
  CHECK(kMul.forward(2.0, 3.0) == 6.0);
  CHECK(kExpAdd.forward(0.0, std::numbers::ln2) == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(kExpMul.forward(2.0, 1.5) == doctest::Approx(std::exp(3.0)));
}

TEST_CASE("forward rejects t outside the parameter domain") {
  CHECK_THROWS_AS(kMul.forward(0.0, 1.0), DomainError);
  CHECK_THROWS_AS(kMul.forward(-1.0, 1.0), DomainError);
  CHECK_THROWS_AS(kExpMul.forward(-0.5, 2.0), DomainError);
  CHECK_NOTHROW(kAdd.forward(-5.0, 1.0));
}

TEST_CASE("invert_in_v examples") {
  CHECK(kAdd.invert_in_v(1.5, 3.5) == 2.0);
  CHECK(kMul.invert_in_v(4.0, 2.0) == 0.5);
  CHECK(kExpMul.invert_in_v(2.0, std::exp(4.0)) == doctest::Approx(2.0).epsilon(1e-15));
  CHECK_THROWS_AS(kExpAdd.invert_in_v(0.0, -1.0), DomainError);
}

TEST_CASE("invert_in_t examples") {
  CHECK(kAdd.invert_in_t(3.5) == 3.5);
  CHECK(kMul.invert_in_t(3.5) == 3.5);
  CHECK(kExpAdd.invert_in_t(std::numbers::e) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK_THROWS_AS(kExpMul.invert_in_t(1.0), DomainError);
  CHECK_THROWS_AS(kMul.invert_in_t(0.0), DomainError);
  try {
    kExpAdd.invert_in_t(0.5);
    FAIL("expected DomainError");
  } catch (const DomainError& e) {
    CHECK(e.recommended_shift() == doctest::Approx(0.6));
    CHECK(std::string(e.what()).find("shift") != std::string::npos);
  }
}

TEST_CASE("anchors and domains") {
  CHECK(kAdd.anchor() == 0.0);
  CHECK(kMul.anchor() == 1.0);
  CHECK(kExpAdd.anchor() == 0.0);
  CHECK(kExpMul.anchor() == 1.0);
  CHECK(!kAdd.t_domain().bounded_below());
  CHECK(kMul.t_domain().lower == 0.0);
  CHECK(kExpAdd.v_domain().lower == 1.0);
  CHECK(kExpMul.v_domain().lower == 1.0);
  for (const auto& f : kAll) CHECK(parse_adjustment_kind(f.name()) == f.kind());
  CHECK_THROWS_AS(parse_adjustment_kind("affine"), ArgumentError);
}

TEST_CASE("validate_domain examples") {
  const std::vector<double> a = {-0.2, 3.0};
  const DomainCheck m = validate_domain(kMul, a);
  CHECK(m.status == DomainCheck::Status::shift_required);
  CHECK(m.shift == doctest::Approx(0.3).epsilon(1e-12));

  const std::vector<double> b = {0.5, 2.0};
  const DomainCheck e = validate_domain(kExpAdd, b);
  CHECK(e.status == DomainCheck::Status::shift_required);
  CHECK(e.shift == doctest::Approx(0.6).epsilon(1e-12));

  const std::vector<double> c = {-1e6, 0.0, 1e6};
  CHECK(validate_domain(kAdd, c).ok());

  const std::vector<double> d = {1.01, 7.0};
  CHECK(validate_domain(kExpMul, d).ok());

  // A score exactly on the bound is outside the open domain.
  const std::vector<double> edge = {1.0};
  CHECK(validate_domain(kExpMul, edge).shift == doctest::Approx(0.1));

  CHECK_THROWS_AS(validate_domain(kAdd, std::vector<double>{}), ArgumentError);
}

TEST_CASE("recommended shift puts every score inside the domain with margin") {
  Rng rng(8);
  for (const auto& f : {kMul, kExpAdd, kExpMul}) {
    for (int trial = 0; trial < 500; ++trial) {
      std::vector<double> s(5);
      for (auto& v : s) v = rng.uniform(-3.0, 3.0);
      const DomainCheck c = validate_domain(f, s);
      const double lo = *std::min_element(s.begin(), s.end());
      if (c.ok()) {
        CHECK(lo > f.v_domain().lower);
        continue;
      }
      REQUIRE(c.status == DomainCheck::Status::shift_required);
      CHECK(lo + c.shift >= f.v_domain().lower + 0.1 - 1e-12);
      // Minimal at one decimal.
      CHECK(lo + c.shift - 0.1 < f.v_domain().lower + 0.1);
      CHECK(std::abs(c.shift * 10.0 - std::round(c.shift * 10.0)) < 1e-9);
    }
  }
}

TEST_CASE("validate_structure rejects unbounded-below scores for bounded families") {
  CHECK(validate_structure(kAdd, ScoreKind::mixture_nll).ok());
  CHECK(validate_structure(kMul, ScoreKind::mixture_nll).status == DomainCheck::Status::structural);
  CHECK(validate_structure(kExpAdd, ScoreKind::mixture_nll).status == DomainCheck::Status::structural);
  CHECK(validate_structure(kMul, ScoreKind::abs_residual).ok());
  CHECK(validate_structure(kExpMul, ScoreKind::sample_distance).ok());
}

TEST_CASE("monotone in v and in t") {
  Rng rng(21);
  for (const auto& f : kAll) {
    for (int i = 0; i < 1000; ++i) {
      const double t = draw_in(f.t_domain(), rng);
      double v1 = draw_in(f.v_domain(), rng);
      double v2 = draw_in(f.v_domain(), rng);
      if (v1 == v2) continue;
      if (v1 > v2) std::swap(v1, v2);
      CHECK(f.forward(t, v1) < f.forward(t, v2));

      double t1 = draw_in(f.t_domain(), rng);
      double t2 = draw_in(f.t_domain(), rng);
      if (t1 == t2) continue;
      if (t1 > t2) std::swap(t1, t2);
      CHECK(f.forward(t1, f.anchor()) < f.forward(t2, f.anchor()));
    }
  }
}

TEST_CASE("round trips") {
  Rng rng(22);
  for (const auto& f : kAll) {
    for (int i = 0; i < 1000; ++i) {
      const double t = draw_in(f.t_domain(), rng);
      const double v = draw_in(f.v_domain(), rng);
      CHECK(f.invert_in_v(t, f.forward(t, v)) == doctest::Approx(v).epsilon(1e-12));
      // exp_additive maps t <= 0 to f_t(0) <= 1, below its score domain.
      const double s = f.forward(t, f.anchor());
      if (!f.v_domain().contains(s)) continue;
      CHECK(f.invert_in_t(s) == doctest::Approx(t).epsilon(1e-12));
    }
  }
}

TEST_CASE("additive rectification is V - tau and multiplicative is V / tau") {
  Rng rng(23);
  for (int i = 0; i < 500; ++i) {
    const double v = rng.uniform(0.01, 5.0);
    const double tau = rng.uniform(0.01, 5.0);
    CHECK(kAdd.invert_in_v(tau, v) == v - tau);
    CHECK(kMul.invert_in_v(tau, v) == v / tau);
    // The rectified set {V <= f_tau(q)} equals {V~ <= q}.
    const double q = rng.uniform(0.01, 3.0);
    CHECK((v <= kMul.forward(tau, q)) == (kMul.invert_in_v(tau, v) <= q * (1 + 1e-15)));
  }
}
