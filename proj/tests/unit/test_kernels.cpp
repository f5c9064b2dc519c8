#include <cmath>
#include <limits>

#include "adh/errors.hpp"
#include "adh/kernels.hpp"
#include "doctest.h"

using namespace adh;

namespace {
// composite Simpson on [a, b] with m (even) panels; independent of the library quadrature
template <class F>
double simpson(F f, double a, double b, int m) {
  const double h = (b - a) / m;
  double s = f(a) + f(b);
  for (int i = 1; i < m; ++i) s += f(a + i * h) * (i % 2 ? 4.0 : 2.0);
  return s * h / 3.0;
}

double grid_sup(const KernelSpec& k, double t, double t_max, int m) {
  double best = 0.0;
  for (int i = 0; i <= m; ++i) best = std::max(best, std::abs(k.eval(t + (t_max - t) * i / m)));
  return best;
}
}  // namespace

TEST_CASE("erlang values match the closed form") {
  auto k = KernelSpec::erlang(1.0, 1.0, 1);
  CHECK(k.eval(1.0) == doctest::Approx(std::exp(-1.0)).epsilon(1e-14));
  CHECK(k.eval(0.0) == 0.0);
  auto k0 = KernelSpec::erlang(5.0, 1.0, 0);
  CHECK(k0.eval(0.0) == doctest::Approx(5.0));
  CHECK(k0.eval(2.0) == doctest::Approx(5.0 * std::exp(-2.0)).epsilon(1e-14));
  CHECK_THROWS_AS(k.eval(-1e-3), std::domain_error);
}

TEST_CASE("erlang envelope equals the sup of |h| over [t, inf)") {
  auto k = KernelSpec::erlang(1.0, 1.0, 1);
  CHECK(k.envelope(0.0) == doctest::Approx(std::exp(-1.0)).epsilon(1e-12));
  for (double t : {0.0, 0.3, 1.0, 2.5, 7.0}) {
    CHECK(k.envelope(t) == doctest::Approx(grid_sup(k, t, 60.0, 600000)).epsilon(1e-7));
  }
  auto inhib = KernelSpec::erlang(-2.0, 0.7, 3);
  for (double t : {0.0, 1.0, 4.0, 9.0}) {
    CHECK(inhib.envelope(t) == doctest::Approx(grid_sup(inhib, t, 100.0, 600000)).epsilon(1e-7));
    CHECK(inhib.envelope(t) >= std::abs(inhib.eval(t)));
  }
}

TEST_CASE("erlang integrals match Simpson quadrature") {
  auto k = KernelSpec::erlang(2.0, 0.5, 2);
  CHECK(k.total_integral() == doctest::Approx(16.0).epsilon(1e-12));
  double oracle = simpson([&](double t) { return k.eval(t); }, 0.4, 3.7, 20000);
  CHECK(k.integral(0.4, 3.7) == doctest::Approx(oracle).epsilon(1e-10));
  double tail = simpson([&](double t) { return k.eval(t); }, 5.0, 200.0, 200000);
  CHECK(k.integral(5.0, std::numeric_limits<double>::infinity()) == doctest::Approx(tail).epsilon(1e-9));
}

TEST_CASE("lattice sum of the envelope") {
  // n = 0: geometric series e^{-nu d} / (1 - e^{-nu d})
  auto k0 = KernelSpec::erlang(1.0, 1.0, 0);
  const double q = std::exp(-0.5);
  CHECK(k0.envelope_lattice_sum(0.5) == doctest::Approx(q / (1.0 - q)).epsilon(1e-12));
  // n = 2: brute sum over many lattice points
  auto k2 = KernelSpec::erlang(3.0, 1.2, 2);
  double brute = 0.0;
  for (int j = 1; j < 200000; ++j) brute += k2.envelope(j * 0.01);
  double s = k2.envelope_lattice_sum(0.01);
  CHECK(s >= brute * (1.0 - 1e-12));
  CHECK(s == doctest::Approx(brute).epsilon(1e-3));
  // offset and first index
  double brute_off = 0.0;
  for (int j = 0; j < 20000; ++j) brute_off += k2.envelope(0.7 + j * 0.1);
  CHECK(k2.envelope_lattice_sum(0.1, 0.7, 0) == doctest::Approx(brute_off).epsilon(1e-3));
  CHECK_THROWS_AS(k2.envelope_lattice_sum(0.0), UnsupportedError);
}

TEST_CASE("truncation zeroes the kernel beyond the horizon") {
  auto k = KernelSpec::erlang(1.0, 1.0, 1).truncated(2.0);
  CHECK(k.truncation_active());
  CHECK(k.eval(1.5) == doctest::Approx(1.5 * std::exp(-1.5)));
  CHECK(k.eval(2.5) == 0.0);
  CHECK(k.envelope(2.5) == 0.0);
  double oracle = simpson([](double t) { return t * std::exp(-t); }, 0.0, 2.0, 4000);
  CHECK(k.total_integral() == doctest::Approx(oracle).epsilon(1e-10));
  auto untouched = KernelSpec::erlang(1.0, 1.0, 1);
  CHECK_FALSE(untouched.truncation_active());
}

TEST_CASE("piecewise-constant kernels are right-continuous") {
  auto k = KernelSpec::piecewise({0.0, 1.0, 2.0, 4.0}, {3.0, -1.0, 0.5});
  CHECK(k.eval(0.0) == 3.0);
  CHECK(k.eval(0.999) == 3.0);
  CHECK(k.eval(1.0) == -1.0);
  CHECK(k.eval(3.9) == 0.5);
  CHECK(k.eval(4.0) == 0.0);
  CHECK(k.integral(0.0, 4.0) == doctest::Approx(3.0 - 1.0 + 1.0));
  CHECK(k.envelope(0.5) == doctest::Approx(3.0));
  CHECK(k.envelope(1.5) == doctest::Approx(1.0));
  CHECK(k.envelope(2.5) == doctest::Approx(0.5));
  CHECK(k.truncation_horizon() == 4.0);
}

TEST_CASE("invalid kernels are rejected") {
  CHECK_THROWS_AS(KernelSpec::erlang(1.0, 0.0, 1), ConfigError);
  CHECK_THROWS_AS(KernelSpec::erlang(1.0, 1.0, -1), ConfigError);
  CHECK_THROWS_AS(KernelSpec::piecewise({0.0, 1.0}, {1.0, 2.0}), ConfigError);
  CHECK_THROWS_AS(KernelSpec::piecewise({1.0, 0.5}, {1.0}), ConfigError);
}

TEST_CASE("integrability report") {
  auto k = KernelSpec::erlang(1.0, 2.0, 2);
  auto r = integrability_check(k);
  CHECK(r.pass);
  CHECK(r.l1_envelope >= k.total_integral() - 1e-12);
  CHECK(std::isfinite(r.t_weighted_l1));
}

TEST_CASE("kernel matrix helpers") {
  KernelMatrix m;
  m.entries = {{KernelSpec::zero(), KernelSpec::zero()}, {KernelSpec::zero(), KernelSpec::erlang(0.0, 1.0, 1)}};
  CHECK(m.all_zero());
  m.entries[0][1] = KernelSpec::erlang(1.0, 1.0, 0);
  CHECK_FALSE(m.all_zero());
  CHECK(m.at(0, 1).as_erlang() != nullptr);
}
