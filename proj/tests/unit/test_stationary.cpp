#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>

#include "adh/errors.hpp"
#include "adh/stationary.hpp"
#include "doctest.h"

using namespace adh;

TEST_CASE("mean interjump time of a hard-refractory rate") {
  auto r = RateSpec::hard_refractory(ScalarMap{ScalarMap::Constant{2.0}}, 0.3, 2.0);
  CHECK(mean_interjump_time(r, 0.0) == doctest::Approx(0.8));
  auto zero = RateSpec::hard_refractory(ScalarMap{ScalarMap::Constant{0.0}}, 0.3, 1.0);
  CHECK(std::isinf(mean_interjump_time(zero, 0.0)));
}

TEST_CASE("tabulated mean interjump time matches a step hazard") {
  // psi = 3 after age 0.4, 0.5 before: E = (1 - e^{-0.2})/0.5 + e^{-0.2}/3
  auto r = RateSpec::product(ScalarMap{ScalarMap::Constant{1.0}}, AgeMap{AgeMap::Step{0.4, 0.5, 3.0}}, 3.0);
  const double oracle = (1.0 - std::exp(-0.2)) / 0.5 + std::exp(-0.2) / 3.0;
  CHECK(mean_interjump_time(r, 0.0) == doctest::Approx(oracle).epsilon(1e-9));
}

TEST_CASE("fixed point for an inhibitory hard-refractory rate") {
  const ScalarMap f{ScalarMap::Logistic{2.0, 1.0, 0.0, 0.2}};
  auto r = RateSpec::hard_refractory(f, 1.0, 2.0);
  auto rep = solve_fixed_point(r, -1.0);
  REQUIRE(rep.unique());
  const double lam = rep.roots[0].lambda_bar;
  CHECK(1.0 / lam == doctest::Approx(1.0 + 1.0 / f(-lam)).epsilon(1e-10));
  CHECK(rep.roots[0].kappa == doctest::Approx(lam).epsilon(1e-10));
}

TEST_CASE("age density integrates to one and matches kappa") {
  using GK = boost::math::quadrature::gauss_kronrod<double, 31>;
  auto r = RateSpec::hard_refractory(ScalarMap{ScalarMap::Constant{1.5}}, 0.5, 1.5);
  auto g = stationary_age_density(r, 0.0);
  CHECK(g.kappa() == doctest::Approx(1.0 / (0.5 + 1.0 / 1.5)));
  const double mass = GK::integrate([&](double a) { return g(a); }, 0.0, 0.5, 0, 1e-12) +
                      GK::integrate([&](double a) { return g(a); }, 0.5, 60.0, 15, 1e-12);
  CHECK(mass == doctest::Approx(1.0).epsilon(1e-9));

  auto smooth = RateSpec::product(ScalarMap{ScalarMap::Constant{1.0}}, AgeMap{AgeMap::Recovery{0.5}}, 1.0);
  auto gs = stationary_age_density(smooth, 0.0);
  const double m2 = GK::integrate([&](double a) { return gs(a); }, 0.0, 80.0, 15, 1e-10);
  CHECK(m2 == doctest::Approx(1.0).epsilon(2e-3));
}

TEST_CASE("age density diverges when the rate vanishes") {
  auto r = RateSpec::hard_refractory(ScalarMap{ScalarMap::Constant{0.0}}, 0.5, 1.0);
  CHECK_THROWS_AS(stationary_age_density(r, 0.0), ModelError);
}

TEST_CASE("delta sweep orders roots") {
  auto r = RateSpec::hard_refractory(ScalarMap{ScalarMap::Logistic{2.0, 1.0, 0.0, 0.2}}, 1.0, 2.0);
  auto inhib = delta_sweep(r, -1.0, {0.5, 1.0, 1.5, 2.0});
  CHECK(inhib.all_unique);
  CHECK(inhib.strictly_decreasing);
  CHECK_FALSE(inhib.strictly_increasing);
  CHECK_THROWS_AS(delta_sweep(RateSpec::product(ScalarMap{}, AgeMap{}, 1.0), 1.0, {1.0}), UnsupportedError);
}
