#include <cmath>
#include <random>

#include "adh/errors.hpp"
#include "adh/experiments.hpp"
#include "doctest.h"

using namespace adh;

namespace {
NetworkConfig two_units(AgeLaw a, AgeLaw b, double T) {
  NetworkConfig c;
  for (auto* law : {&a, &b}) {
    Population p;
    p.size = 1;
    p.rate = RateSpec::hard_refractory(ScalarMap{ScalarMap::Logistic{2.0, 1.0, 0.0, 0.2}}, 0.5, 2.0);
    p.initial_age = *law;
    c.populations.push_back(std::move(p));
  }
  c.kernels.entries = {{KernelSpec::zero(), KernelSpec::erlang(-1.0, 1.0, 1)},
                       {KernelSpec::erlang(-1.0, 1.0, 1), KernelSpec::zero()}};
  c.horizon = T;
  finalize(c);
  return c;
}

EventLog log_of(std::vector<Event> ev) {
  EventLog l;
  l.events = std::move(ev);
  return l;
}
}  // namespace

TEST_CASE("agreement start finds the last mismatch") {
  auto a = log_of({{0.5, 0, 0}, {1.0, 0, 0}, {2.0, 1, 0}});
  auto b = log_of({{0.7, 0, 0}, {1.0, 0, 0}, {2.0, 1, 0}});
  CHECK(agreement_start(a, b) == 0.7);
  CHECK(agreement_start(a, a) == 0.0);
  auto c = log_of({{2.0, 1, 0}});
  CHECK(agreement_start(a, c) == 1.0);
}

TEST_CASE("noncommon events counts the symmetric difference") {
  CHECK(noncommon_events({1, 2, 3}, {2, 3, 4, 5}) == 3);
  CHECK(noncommon_events({}, {}) == 0);
}

TEST_CASE("split sizes keeps proportions and total") {
  auto cfg = two_units(AgeLaw{}, AgeLaw{}, 1.0);
  auto s = split_sizes(cfg, 101);
  CHECK(s[0] + s[1] == 101);
  CHECK(s[0] == 51);
  CHECK_THROWS_AS(split_sizes(cfg, 1), ConfigError);
}

TEST_CASE("coupling of two units with different initial ages") {
  CouplingSetup setup{two_units(AgeLaw{AgeLaw::PointMass{0.0}}, AgeLaw{AgeLaw::PointMass{3.0}}, 60.0),
                      two_units(AgeLaw{AgeLaw::PointMass{3.0}}, AgeLaw{AgeLaw::PointMass{0.0}}, 60.0)};
  auto rep = coupling_experiment(setup, 7, 10);
  REQUIRE(rep.rows.size() == 10);
  CHECK(rep.fraction_coupled > 0.5);
  auto again = coupling_experiment(setup, 7, 10, 2);
  for (std::size_t i = 0; i < 10; ++i) {
    CHECK(rep.rows[i].coupled == again.rows[i].coupled);
    CHECK(rep.rows[i].coupling_time == again.rows[i].coupling_time);
  }
}

TEST_CASE("kernel l1 gap of a truncation equals the tail integral") {
  KernelMatrix a;
  a.entries = {{KernelSpec::erlang(-2.0, 1.5, 0)}};
  KernelMatrix b;
  b.entries = {{KernelSpec::erlang(-2.0, 1.5, 0).truncated(1.0)}};
  // 2 \int_1^4 e^{-1.5 t} dt
  CHECK(kernel_l1_gap(a, b, 4.0) == doctest::Approx(2.0 / 1.5 * (std::exp(-1.5) - std::exp(-6.0))).epsilon(1e-10));
  CHECK(kernel_l1_gap(a, a, 4.0) == 0.0);
}

TEST_CASE("ks against exponential samples") {
  std::mt19937_64 g(3);
  std::exponential_distribution<double> e(1.0);
  std::vector<double> gaps(2000);
  for (auto& x : gaps) x = e(g);
  CHECK(ks_exponential(gaps).p_value > 0.01);
  for (auto& x : gaps) x *= 1.3;
  CHECK(ks_exponential(gaps).p_value < 1e-6);
  CHECK_THROWS_AS(ks_exponential(std::vector<double>(50, 1.0)), UnsupportedError);
}

TEST_CASE("kolmogorov tail at known quantiles") {
  CHECK(kolmogorov_tail(1.3580986) == doctest::Approx(0.05).epsilon(1e-4));
  CHECK(kolmogorov_tail(1.6276236) == doctest::Approx(0.01).epsilon(1e-4));
  CHECK(kolmogorov_tail(0.0) == 1.0);
}

TEST_CASE("rescaled gaps of a simulated unit look exponential") {
  auto cfg = two_units(AgeLaw{AgeLaw::PointMass{1.0}}, AgeLaw{AgeLaw::PointMass{1.0}}, 800.0);
  StreamSet s(11, cfg);
  auto log = simulate(cfg, s);
  auto r = rescaling_test(cfg, log, 0, 0);
  CHECK(r.n > 100);
  CHECK(r.p_value > 0.001);
}
