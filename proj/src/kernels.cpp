#include "adh/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include "adh/errors.hpp"

namespace adh {

namespace {

constexpr double kHorizonRelTol = 1e-12;

double erlang_value(const Erlang& e, double t) {
  if (e.b == 0.0) return 0.0;
  if (e.n == 0) return e.b * std::exp(-e.nu * t);
  if (t == 0.0) return 0.0;
  // log-space keeps large n finite
  double log_mag = e.n * std::log(t) - std::lgamma(e.n + 1.0) - e.nu * t;
  return e.b * std::exp(log_mag);
}

double erlang_mode(const Erlang& e) { return e.n / e.nu; }

// \int_0^x t^n/n! e^{-nu t} dt
double erlang_cumulative(const Erlang& e, double x) {
  if (x <= 0.0) return 0.0;
  double scale = std::pow(e.nu, -(e.n + 1));
  if (std::isinf(x)) return scale;
  return scale * boost::math::gamma_p(e.n + 1.0, e.nu * x);
}

double erlang_default_horizon(const Erlang& e) {
  double cap = 50.0 / e.nu;
  if (e.b == 0.0) return 0.0;
  double peak = std::abs(erlang_value(e, erlang_mode(e)));
  double target = kHorizonRelTol * peak;
  double lo = erlang_mode(e);
  if (std::abs(erlang_value(e, cap)) > target) return cap;
  double hi = cap;
  for (int it = 0; it < 200 && hi - lo > 1e-12 * cap; ++it) {
    double mid = 0.5 * (lo + hi);
    if (std::abs(erlang_value(e, mid)) > target) lo = mid; else hi = mid;
  }
  return hi;
}

template <class F>
double integrate(F f, double a, double b) {
  if (!(b > a)) return 0.0;
  double err = 0.0;
  return boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, a, b, 15, 1e-13, &err);
}

}  // namespace

KernelSpec::KernelSpec(Kind kind) : kind_(std::move(kind)) {
  std::visit(
      [this](const auto& k) {
        using T = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<T, ZeroKernel>) {
          horizon_ = 0.0;
        } else if constexpr (std::is_same_v<T, Erlang>) {
          if (!(k.nu > 0.0)) throw ConfigError("erlang kernel: nu must be positive");
          if (k.n < 0 || k.n > 64) throw ConfigError("erlang kernel: order n must lie in [0, 64]");
          if (!std::isfinite(k.b)) throw ConfigError("erlang kernel: amplitude must be finite");
          horizon_ = erlang_default_horizon(k);
        } else {
          if (k.grid.size() != k.values.size() + 1)
            throw ConfigError("piecewise kernel: grid must have one more point than values");
          if (k.grid.empty() || k.grid.front() < 0.0)
            throw ConfigError("piecewise kernel: grid must start at a nonnegative time");
          if (!std::is_sorted(k.grid.begin(), k.grid.end()) ||
              std::adjacent_find(k.grid.begin(), k.grid.end()) != k.grid.end())
            throw ConfigError("piecewise kernel: grid must be strictly increasing");
          horizon_ = k.grid.back();
        }
      },
      kind_);
}

KernelSpec KernelSpec::erlang(double b, double nu, int n) { return KernelSpec(Erlang{b, nu, n}); }

KernelSpec KernelSpec::piecewise(std::vector<double> grid, std::vector<double> values) {
  return KernelSpec(PiecewiseConstant{std::move(grid), std::move(values)});
}

KernelSpec KernelSpec::truncated(double horizon) const {
  if (!(horizon >= 0.0)) throw ConfigError("truncation horizon must be nonnegative");
  KernelSpec out = *this;
  out.horizon_ = horizon;
  out.truncating_ = true;
  return out;
}

bool KernelSpec::is_zero() const {
  if (std::holds_alternative<ZeroKernel>(kind_)) return true;
  if (auto e = as_erlang()) return e->b == 0.0;
  auto p = as_piecewise();
  return std::all_of(p->values.begin(), p->values.end(), [](double v) { return v == 0.0; });
}

double KernelSpec::raw_eval(double t) const {
  if (auto e = as_erlang()) return erlang_value(*e, t);
  if (auto p = as_piecewise()) {
    if (t < p->grid.front() || t >= p->grid.back()) return 0.0;
    auto it = std::upper_bound(p->grid.begin(), p->grid.end(), t);
    return p->values[static_cast<std::size_t>(it - p->grid.begin()) - 1];
  }
  return 0.0;
}

double KernelSpec::eval(double t) const {
  if (t < 0.0) throw std::domain_error("kernel evaluated at negative time");
  if (truncating_ && t > horizon_) return 0.0;
  return raw_eval(t);
}

double KernelSpec::raw_envelope(double t) const {
  if (auto e = as_erlang()) {
    double mode = erlang_mode(*e);
    if (truncating_ && horizon_ < mode) {
      // |h| increases up to the cut, so the sup is at the cut
      return std::abs(erlang_value(*e, horizon_));
    }
    return std::abs(erlang_value(*e, std::max(t, mode)));
  }
  if (auto p = as_piecewise()) {
    double best = 0.0;
    for (std::size_t i = p->values.size(); i-- > 0;) {
      if (p->grid[i + 1] <= t) break;
      if (truncating_ && p->grid[i] > horizon_) continue;
      best = std::max(best, std::abs(p->values[i]));
    }
    return best;
  }
  return 0.0;
}

double KernelSpec::envelope(double t) const {
  if (t < 0.0) throw std::domain_error("kernel envelope at negative time");
  if (truncating_ && t > horizon_) return 0.0;
  return raw_envelope(t);
}

double KernelSpec::integral(double a, double b) const {
  if (a < 0.0 || b < a) throw std::domain_error("kernel integral needs 0 <= a <= b");
  if (truncating_) {
    b = std::min(b, horizon_);
    if (b <= a) return 0.0;
  }
  if (auto e = as_erlang()) {
    if (e->b == 0.0) return 0.0;
    if (std::isinf(b)) {
      double tail = e->n == 0 ? std::exp(-e->nu * a) * std::pow(e->nu, -1)
                              : std::pow(e->nu, -(e->n + 1)) * boost::math::gamma_q(e->n + 1.0, e->nu * a);
      return e->b * tail;
    }
    return e->b * (erlang_cumulative(*e, b) - erlang_cumulative(*e, a));
  }
  if (auto p = as_piecewise()) {
    double sum = 0.0;
    for (std::size_t i = 0; i < p->values.size(); ++i) {
      double lo = std::max(a, p->grid[i]);
      double hi = std::min(b, p->grid[i + 1]);
      if (hi > lo) sum += p->values[i] * (hi - lo);
    }
    return sum;
  }
  return 0.0;
}

double KernelSpec::envelope_lattice_sum(double delta, double offset, int first_index) const {
  if (is_zero()) return 0.0;
  if (!(delta > 0.0)) throw UnsupportedError("envelope lattice sum diverges for delta = 0");
  const Erlang* e = as_erlang();
  double start = offset + first_index * delta;
  if (e && e->n == 0 && !truncating_) {
    // geometric series
    double q = std::exp(-e->nu * delta);
    return std::abs(e->b) * std::exp(-e->nu * start) / (1.0 - q);
  }
  if ((horizon_ - start) / delta > 1e8) throw UnsupportedError("envelope lattice sum: delta too small");
  double sum = 0.0;
  long k = 0;
  double t = start;
  for (; t <= horizon_; t = start + static_cast<double>(++k) * delta) sum += envelope(t);
  if (e && !truncating_) {
    // past the horizon |h| is decreasing, so the tail is bounded by one term
    // plus the integral of |h| over the remaining lattice span
    sum += envelope(t) + std::abs(integral(t, std::numeric_limits<double>::infinity())) / delta;
  }
  return sum;
}

std::vector<double> KernelSpec::breakpoints() const {
  std::vector<double> out;
  if (auto p = as_piecewise()) out = p->grid;
  if (truncating_) out.push_back(horizon_);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

IntegrabilityReport integrability_check(const KernelSpec& k) {
  IntegrabilityReport r;
  if (k.is_zero()) {
    r.pass = true;
    return r;
  }
  std::vector<double> cuts{0.0};
  for (double b : k.breakpoints())
    if (b > 0.0 && b < k.truncation_horizon()) cuts.push_back(b);
  if (auto e = k.as_erlang()) {
    double mode = static_cast<double>(e->n) / e->nu;
    if (mode > 0.0 && mode < k.truncation_horizon()) cuts.push_back(mode);
  }
  cuts.push_back(k.truncation_horizon());
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    double a = cuts[i], b = cuts[i + 1];
    r.l1_envelope += integrate([&](double t) { return k.envelope(t); }, a, b);
    r.l2_envelope += integrate([&](double t) { double v = k.envelope(t); return v * v; }, a, b);
    r.t_weighted_l1 += integrate([&](double t) { return t * std::abs(k.eval(t)); }, a, b);
  }
  r.pass = std::isfinite(r.l1_envelope) && std::isfinite(r.l2_envelope) &&
           std::isfinite(r.t_weighted_l1);
  return r;
}

bool KernelMatrix::all_zero() const {
  for (const auto& row : entries)
    for (const auto& k : row)
      if (!k.is_zero()) return false;
  return true;
}

}  // namespace adh
