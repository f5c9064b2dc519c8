#include <cmath>
#include <random>

#include "adh/errors.hpp"
#include "adh/rates.hpp"
#include "doctest.h"

using namespace adh;

TEST_CASE("hard refractory rate is silent inside the window") {
  auto r = RateSpec::hard_refractory(ScalarMap{ScalarMap::Constant{2.0}}, 0.5, 2.0);
  CHECK(r(3.0, 0.0) == 0.0);
  CHECK(r(3.0, 0.4999) == 0.0);
  CHECK(r(3.0, 0.5) == 2.0);
  CHECK(r.postjump_bound_K() == 0.0);
  CHECK(r.postjump_window() == 0.5);
  CHECK(r.silent_age() == 0.5);
  CHECK_THROWS_AS(r(0.0, -1.0), std::domain_error);
}

TEST_CASE("scalar maps") {
  ScalarMap logistic{ScalarMap::Logistic{3.0, 2.0, 1.0, 0.5}};
  CHECK(logistic(1.0) == doctest::Approx(0.5 + 1.5));
  CHECK(logistic(100.0) == doctest::Approx(3.5));
  CHECK(*logistic.upper_bound() == doctest::Approx(3.5));
  CHECK(logistic.strictly_increasing());
  ScalarMap aff{ScalarMap::AffineClamped{1.0, -2.0, 0.0, 4.0}};
  CHECK(aff(-10.0) == 4.0);
  CHECK(aff(0.25) == doctest::Approx(0.5));
  CHECK(aff(10.0) == 0.0);
  CHECK(aff.sup_on_ball(1.0) == doctest::Approx(3.0));
  ScalarMap ex{ScalarMap::Exponential{1.0, 0.5}};
  CHECK_FALSE(ex.upper_bound().has_value());
  CHECK(ex.sup_on_ball(2.0) == doctest::Approx(std::exp(1.0)));
}

TEST_CASE("age maps") {
  AgeMap step{AgeMap::Step{1.0, 0.2, 1.0}};
  CHECK(step(0.99) == 0.2);
  CHECK(step(1.0) == 1.0);
  CHECK(step.breakpoints() == std::vector<double>{1.0});
  AgeMap rec{AgeMap::Recovery{2.0}};
  CHECK(rec(2.0) == doctest::Approx(1.0 - std::exp(-1.0)));
}

TEST_CASE("window majorant dominates psi on the ball") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<RateSpec> rates{
      RateSpec::hard_refractory(ScalarMap{ScalarMap::Logistic{4.0, 1.5, 0.2, 0.1}}, 0.3, 6.0),
      RateSpec::product(ScalarMap{ScalarMap::AffineClamped{1.0, 1.0, 0.0, 5.0}}, AgeMap{AgeMap::Recovery{0.5}}, 1.0),
      RateSpec::product(ScalarMap{ScalarMap::Exponential{0.5, 0.3}}, AgeMap{AgeMap::Step{1.0, 0.0, 2.0}}, 1.0),
  };
  for (const auto& r : rates) {
    for (int i = 0; i < 2000; ++i) {
      double xa = 5.0 * std::abs(u(rng));
      double x = xa * u(rng);
      double a = 3.0 * std::abs(u(rng));
      CHECK(r(x, a) <= r.window_majorant(xa) * (1.0 + 1e-12));
    }
  }
}

TEST_CASE("validate accepts consistent constants and reports violations") {
  auto good = RateSpec::hard_refractory(ScalarMap{ScalarMap::Logistic{2.0, 1.0, 0.0, 0.0}}, 0.5, 2.0);
  good.set_doeblin({1e-3, 0.5, 1.0});
  auto rep = validate(good, 5000);
  CHECK(rep.pass());
  CHECK(rep.postjump_bound.worst_margin <= 0.0);

  auto bad = RateSpec::product(ScalarMap{ScalarMap::Exponential{1.0, 1.0}}, AgeMap{}, 1.0);
  auto rep2 = validate(bad, 5000);
  CHECK_FALSE(rep2.sublinear.pass);
  CHECK_FALSE(rep2.lipschitz.pass);
  CHECK(rep2.sublinear.worst_margin > 0.0);

  auto neg = RateSpec::custom([](double x, double) { return x; }, 1.0);
  CHECK_FALSE(validate(neg, 1000).nonnegative.pass);
  CHECK_THROWS_AS(neg(-1.0, 0.0), ModelError);
}

TEST_CASE("constructor checks") {
  CHECK_THROWS_AS(RateSpec::hard_refractory(ScalarMap{}, 1.0, 0.5), ConfigError);
  CHECK_THROWS_AS(RateSpec::hard_refractory(ScalarMap{}, -1.0, 1.0), ConfigError);
  auto r = RateSpec::hard_refractory(ScalarMap{}, 1.0, 1.0);
  CHECK(r.with_delta(2.0).postjump_window() == 2.0);
  CHECK(r.with_delta(2.0)(0.0, 1.5) == 0.0);
  auto p = RateSpec::product(ScalarMap{}, AgeMap{}, 1.0);
  CHECK_THROWS_AS(p.with_delta(1.0), UnsupportedError);
}
