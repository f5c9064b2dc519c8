#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "adh/errors.hpp"
#include "adh/network.hpp"
#include "doctest.h"

using namespace adh;

namespace {
Population pop(int size, RateSpec rate, AgeLaw age = {AgeLaw::PointMass{5.0}}) {
  Population p;
  p.size = size;
  p.rate = std::move(rate);
  p.initial_age = std::move(age);
  return p;
}

NetworkConfig single_population(int size, RateSpec rate, KernelSpec self, double T,
                                InteractionMode mode = InteractionMode::finite_network) {
  NetworkConfig c;
  c.populations.push_back(pop(size, std::move(rate)));
  c.kernels.entries = {{std::move(self)}};
  c.horizon = T;
  c.mode = mode;
  finalize(c);
  return c;
}

RateSpec constant_rate(double c) { return RateSpec::product(ScalarMap{ScalarMap::Constant{c}}, AgeMap{}, std::max(1.0, c)); }

RateSpec refractory(ScalarMap f, double delta, double L = 4.0) { return RateSpec::hard_refractory(std::move(f), delta, L); }

NetworkConfig two_population_erlang(double T) {
  NetworkConfig c;
  c.populations.push_back(pop(3, refractory(ScalarMap{ScalarMap::Logistic{3.0, 1.0, 0.0, 0.2}}, 0.2)));
  c.populations.push_back(pop(2, refractory(ScalarMap{ScalarMap::Logistic{2.0, 1.5, 0.5, 0.1}}, 0.3),
                              AgeLaw{AgeLaw::Exponential{1.0}}));
  c.kernels.entries = {{KernelSpec::erlang(0.8, 1.5, 1), KernelSpec::erlang(-1.2, 1.0, 2)},
                       {KernelSpec::erlang(0.5, 2.0, 0), KernelSpec::piecewise({0.0, 0.5, 1.5}, {0.4, -0.3})}};
  c.populations[0].initial_signal.kind = InitialSignal::Exponential{0.5, 0.7};
  c.populations[1].initial_signal.kind = InitialSignal::Inherited{{{0, -0.4}, {1, -0.2}, {0, -2.0}}};
  c.horizon = T;
  finalize(c);
  return c;
}
}  // namespace

TEST_CASE("zero rate gives an empty log") {
  auto cfg = single_population(4, constant_rate(0.0), KernelSpec::zero(), 50.0);
  StreamSet s(1, cfg);
  auto log = simulate(cfg, s);
  CHECK(log.events.empty());
}

TEST_CASE("constant rate is a Poisson process") {
  const double c = 2.0, T = 40.0;
  auto cfg = single_population(1, constant_rate(c), KernelSpec::zero(), T);
  double total = 0.0;
  const int reps = 200;
  for (int r = 0; r < reps; ++r) {
    StreamSet s(1000 + r, cfg);
    total += static_cast<double>(simulate(cfg, s).events.size());
  }
  const double mean = total / reps;
  CHECK(std::abs(mean - c * T) < 5.0 * std::sqrt(c * T / reps));
}

TEST_CASE("hard refractory renewal rate") {
  // inter-event time delta + Exp(f): rate 1/(delta + 1/f) = 0.5
  const double T = 4000.0;
  auto cfg = single_population(1, refractory(ScalarMap{ScalarMap::Constant{1.0}}, 1.0, 1.0), KernelSpec::zero(), T);
  StreamSet s(77, cfg);
  auto log = simulate(cfg, s);
  const double n = static_cast<double>(log.events.size());
  // renewal CLT: var N_T ~ T var/mean^3 = T/8
  CHECK(std::abs(n - 0.5 * T) < 5.0 * std::sqrt(T / 8.0));
  for (std::size_t i = 1; i < log.events.size(); ++i) CHECK(log.events[i].time - log.events[i - 1].time >= 1.0);
}

TEST_CASE("single-term convolution after one jump") {
  NetworkConfig c;
  c.populations.push_back(pop(1, constant_rate(0.0)));
  // fires once almost immediately, then stays refractory past the horizon
  c.populations.push_back(pop(1, refractory(ScalarMap{ScalarMap::Constant{50.0}}, 1e6, 50.0), AgeLaw{AgeLaw::PointMass{1e6}}));
  c.kernels.entries = {{KernelSpec::zero(), KernelSpec::erlang(5.0, 1.0, 0)}, {KernelSpec::zero(), KernelSpec::zero()}};
  c.horizon = 10.0;
  finalize(c);
  StreamSet s(3, c);
  auto log = simulate(c, s);
  REQUIRE(log.events.size() == 1);
  const double tau = log.events[0].time;
  CHECK(log.events[0].population == 1);
  for (double t : {tau + 0.1, tau + 1.0, 9.0}) CHECK(memory_bruteforce(c, log, 0, t) == doctest::Approx(5.0 * std::exp(-(t - tau))));
  CHECK(memory_bruteforce(c, log, 0, tau) == 0.0);
  CHECK(log.final_state.memory[0] == doctest::Approx(5.0 * std::exp(-(10.0 - tau))).epsilon(1e-12));
}

TEST_CASE("incremental memory matches brute force at random times") {
  auto cfg = two_population_erlang(40.0);
  StreamSet s(2024, cfg);
  auto log = simulate(cfg, s);
  REQUIRE(log.events.size() > 20);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, cfg.horizon);
  std::vector<double> probes(100);
  for (auto& p : probes) p = u(rng);
  std::sort(probes.begin(), probes.end());
  NetworkMemory mem(cfg);
  std::size_t e = 0;
  for (double p : probes) {
    while (e < log.events.size() && log.events[e].time < p) {
      mem.on_event(log.events[e].population, log.events[e].time);
      ++e;
    }
    for (int k = 0; k < 2; ++k)
      CHECK(mem.value(k, p) == doctest::Approx(memory_bruteforce(cfg, log, k, p)).epsilon(1e-9).scale(1.0));
  }
}

TEST_CASE("simulator intensities agree with the recomputed trace") {
  auto cfg = two_population_erlang(30.0);
  StreamSet s(8, cfg);
  std::vector<CandidateRecord> audit;
  SimulationHooks hooks;
  hooks.audit = &audit;
  auto log = simulate(cfg, s, hooks);
  REQUIRE(!audit.empty());
  std::size_t checked = 0;
  for (const auto& c : audit) {
    if (checked > 300) break;
    std::vector<double> grid{c.time};
    auto rows = intensity_trace(cfg, log, grid);
    for (const auto& r : rows)
      if (r.population == c.population && r.unit == c.unit) {
        CHECK(r.intensity == doctest::Approx(c.intensity).epsilon(1e-9).scale(1.0));
        ++checked;
      }
    CHECK(c.intensity <= c.majorant * (1.0 + 1e-9));
  }
  CHECK(checked > 0);
}

TEST_CASE("refractory separation and zero intensity inside the window") {
  auto cfg = two_population_erlang(60.0);
  StreamSet s(19, cfg);
  auto log = simulate(cfg, s);
  for (int k = 0; k < 2; ++k) {
    const double delta = cfg.populations[k].rate.postjump_window();
    for (int j = 0; j < cfg.populations[k].size; ++j) {
      auto ts = log.unit_times(k, j);
      for (std::size_t i = 1; i < ts.size(); ++i) CHECK(ts[i] - ts[i - 1] >= delta);
      // pathwise non-explosion bound on any interval of length T
      CHECK(ts.size() <= static_cast<std::size_t>(std::ceil(cfg.horizon / delta)) + 1);
      for (double t : ts) {
        if (t + 0.5 * delta > cfg.horizon) continue;
        std::vector<double> grid{t + 0.5 * delta};
        for (const auto& r : intensity_trace(cfg, log, grid))
          if (r.population == k && r.unit == j) CHECK(r.intensity == 0.0);
      }
    }
  }
  CHECK(std::all_of(log.events.begin(), log.events.end(), [](const Event& e) { return e.time > 0.0; }));
}

TEST_CASE("final ages follow the last events") {
  auto cfg = two_population_erlang(25.0);
  StreamSet s(4, cfg);
  auto log = simulate(cfg, s);
  for (int k = 0; k < 2; ++k)
    for (int j = 0; j < cfg.populations[k].size; ++j) {
      auto ts = log.unit_times(k, j);
      double expected = ts.empty() ? log.initial_ages[k][j] + cfg.horizon : cfg.horizon - ts.back();
      CHECK(log.final_state.age[k][j] == doctest::Approx(expected));
    }
}

TEST_CASE("unit order in the engine does not change the log") {
  auto cfg = two_population_erlang(30.0);
  StreamSet s1(55, cfg), s2(55, cfg);
  auto ages = sample_initial_ages(cfg, 55);
  auto build = [&](StreamSet& s, bool reverse) {
    std::vector<ThinningUnit> units;
    for (int k = 0; k < 2; ++k)
      for (int j = 0; j < cfg.populations[k].size; ++j)
        units.push_back({k, j, ages[k][j], &cfg.populations[k].rate, &s.at(k, j)});
    if (reverse) std::reverse(units.begin(), units.end());
    NetworkMemory mem(cfg);
    return run_thinning(units, mem, 2, cfg.horizon, cfg.thinning_window(), 1000000);
  };
  auto a = build(s1, false);
  auto b = build(s2, true);
  CHECK(a.events == b.events);
}

TEST_CASE("window width does not change the sample") {
  auto cfg = two_population_erlang(30.0);
  auto other = cfg;
  other.sim.window = 0.37;
  StreamSet s1(90, cfg), s2(90, other);
  CHECK(simulate(cfg, s1).events == simulate(other, s2).events);
}

TEST_CASE("explosion guard") {
  auto cfg = single_population(1, constant_rate(5.0), KernelSpec::zero(), 100.0);
  cfg.sim.max_events = 10;
  StreamSet s(1, cfg);
  CHECK_THROWS_AS(simulate(cfg, s), ModelError);
}

TEST_CASE("sublinearity violations are counted") {
  auto rate = RateSpec::product(ScalarMap{ScalarMap::Constant{3.0}}, AgeMap{}, 1.0);
  auto cfg = single_population(1, rate, KernelSpec::zero(), 20.0);
  StreamSet s(2, cfg);
  auto log = simulate(cfg, s);
  CHECK(log.stats.sublinear_violations > 0);
  CHECK(log.stats.sublinear_violations == log.stats.candidates);
}

TEST_CASE("dominating process covers every network event") {
  NetworkConfig c;
  c.populations.push_back(pop(3, refractory(ScalarMap{ScalarMap::Logistic{2.0, 1.0, 0.0, 0.1}}, 0.5, 2.0)));
  c.populations.push_back(pop(2, refractory(ScalarMap{ScalarMap::AffineClamped{0.5, 1.0, 0.0, 3.0}}, 0.4, 3.0)));
  c.kernels.entries = {{KernelSpec::erlang(0.3, 1.0, 1), KernelSpec::erlang(-0.5, 2.0, 0)},
                       {KernelSpec::erlang(0.4, 1.5, 0), KernelSpec::zero()}};
  c.horizon = 30.0;
  finalize(c);
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    StreamSet s(seed, c);
    auto ages = sample_initial_ages(c, seed);
    auto log = simulate(c, s, ages);
    auto dom = simulate_dominating(c, s, ages);
    CHECK(dom.C >= 1.0 + dom.lattice_sum);
    for (const auto& e : log.events)
      CHECK(std::find(dom.events.begin(), dom.events.end(), e) != dom.events.end());
    CHECK(dom.events.size() >= log.events.size());
  }
}

TEST_CASE("dominating process without interaction is Poisson(L C)") {
  auto cfg = single_population(2, refractory(ScalarMap{ScalarMap::Constant{1.0}}, 0.5, 1.0), KernelSpec::zero(), 2000.0);
  StreamSet s(6, cfg);
  auto dom = simulate_dominating(cfg, s, sample_initial_ages(cfg, 6));
  CHECK(dom.C == 1.0);
  // thinning at L C against the superposition of two unit streams
  const double expected = 2.0 * 1.0 * 2000.0;
  CHECK(std::abs(static_cast<double>(dom.events.size()) - expected) < 5.0 * std::sqrt(expected));
}

TEST_CASE("intensity history bound holds along simulated paths") {
  auto cfg = two_population_erlang(40.0);
  StreamSet s(31, cfg);
  auto log = simulate(cfg, s);
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.0, cfg.horizon);
  int checks = 0;
  for (int rep = 0; rep < 400; ++rep) {
    double t1 = u(rng), t2 = u(rng);
    if (t1 > t2) std::swap(t1, t2);
    UnitKey i{static_cast<int>(rng() % 2), 0};
    UnitKey j{static_cast<int>(rng() % 2), 0};
    auto r = domination_bound_check(cfg, log, s, i, j, t1, t2);
    CHECK(r.pass);
    ++checks;
  }
  CHECK(checks == 400);
  // no events before t1 gives lhs 0
  auto r0 = domination_bound_check(cfg, log, s, {0, 0}, {1, 1}, 0.0, 1.0);
  CHECK(r0.lhs == 0.0);
}

TEST_CASE("time averages") {
  const double c = 3.0;
  auto cfg = single_population(1, constant_rate(c), KernelSpec::zero(), 3000.0);
  StreamSet s(12, cfg);
  auto log = simulate(cfg, s);
  CHECK(time_average(log, [](std::span<const Event>) { return 1.0; }, 5.0) == doctest::Approx(1.0));
  double avg = time_average(log, count_functional(), 5.0);
  CHECK(std::abs(avg - c * 5.0) < 0.5);
  CHECK_THROWS_AS(time_average(log, count_functional(), 4000.0), ConfigError);

  auto rcfg = single_population(1, refractory(ScalarMap{ScalarMap::Constant{1.0}}, 1.0, 1.0), KernelSpec::zero(), 4000.0);
  StreamSet rs(13, rcfg);
  auto rlog = simulate(rcfg, rs);
  CHECK(std::abs(time_average(rlog, count_functional(UnitKey{0, 0}), 10.0) - 5.0) < 0.4);
}

TEST_CASE("compensator increments have unit mean") {
  auto cfg = single_population(1, refractory(ScalarMap{ScalarMap::Logistic{3.0, 1.0, 0.5, 0.2}}, 0.2, 3.0),
                               KernelSpec::erlang(0.6, 1.0, 1), 600.0);
  StreamSet s(21, cfg);
  SimulationHooks hooks;
  hooks.record_compensator = true;
  auto log = simulate(cfg, s, hooks);
  const auto& lam = log.compensator[0][0];
  REQUIRE(lam.size() > 100);
  std::vector<double> gaps;
  for (std::size_t i = 0; i + 1 < lam.size() - 1; ++i) gaps.push_back(lam[i + 1] - lam[i]);
  const double mean = std::accumulate(gaps.begin(), gaps.end(), 0.0) / static_cast<double>(gaps.size());
  CHECK(std::abs(mean - 1.0) < 5.0 / std::sqrt(static_cast<double>(gaps.size())));
}

TEST_CASE("configuration errors") {
  NetworkConfig c;
  CHECK_THROWS_AS(finalize(c), ConfigError);
  c.populations.push_back(pop(0, constant_rate(1.0)));
  c.kernels.entries = {{KernelSpec::zero()}};
  c.horizon = -1.0;
  try {
    finalize(c);
    FAIL("expected a ConfigError");
  } catch (const ConfigError& e) {
    CHECK(e.problems().size() == 2);
  }
}

TEST_CASE("initial age laws") {
  SplitMix64 g(1);
  AgeLaw u{AgeLaw::Uniform{2.0}};
  for (int i = 0; i < 1000; ++i) {
    double a = u.sample(g);
    CHECK((a >= 0.0 && a < 2.0));
  }
  AgeLaw e{AgeLaw::Exponential{2.0}};
  CHECK(e.survival(1.0) == doctest::Approx(std::exp(-2.0)));
  CHECK(*e.density(0.0) == doctest::Approx(2.0));
  AgeLaw emp{AgeLaw::Empirical{{0.5, 1.5, 3.0}}};
  CHECK(emp.survival(1.0) == doctest::Approx(2.0 / 3.0));
  CHECK(emp.atoms().size() == 3);
}
