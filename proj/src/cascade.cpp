#include "adh/cascade.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "adh/errors.hpp"

namespace adh {

CascadeState::CascadeState(int n, double nu_, double b_) : coords(static_cast<std::size_t>(n) + 1, 0.0), nu(nu_), b(b_) {
  if (n < 0 || n > 64) throw ConfigError("cascade order must lie in [0, 64]");
  if (!(nu > 0.0)) throw ConfigError("cascade decay rate must be positive");
}

void advance_in_place(CascadeState& s, double dt) {
  if (dt < 0.0) throw std::domain_error("cascade advance needs dt >= 0");
  s.last_update += dt;
  if (dt == 0.0) return;
  const std::size_t n = s.coords.size() - 1;
  const double decay = std::exp(-s.nu * dt);
  // X^(k)(t+dt) = e^{-nu dt} sum_m dt^m/m! X^(k+m)(t); k ascending reads only
  // indices >= k, so updating in place from the front is safe
  for (std::size_t k = 0; k <= n; ++k) {
    double acc = 0.0;
    double term = 1.0;  // dt^m / m!
    for (std::size_t m = 0; k + m <= n; ++m) {
      acc += term * s.coords[k + m];
      term *= dt / static_cast<double>(m + 1);
    }
    s.coords[k] = decay * acc;
  }
}

CascadeState advance(const CascadeState& s, double dt) {
  CascadeState out = s;
  advance_in_place(out, dt);
  return out;
}

CascadeState on_event(const CascadeState& s) {
  CascadeState out = s;
  out.coords.back() += out.b;
  return out;
}

CascadeState init_from_point_measure(std::span<const double> times, int n, double nu, double b) {
  CascadeState s(n, nu, b);
  for (double tau : times) {
    if (tau > 0.0) throw std::domain_error("initial point measure must live on (-inf, 0]");
    const double lag = -tau;
    const double decay = std::exp(-nu * lag);
    for (int k = 0; k <= n; ++k) {
      const int m = n - k;
      s.coords[static_cast<std::size_t>(k)] += b * std::pow(lag, m) / std::tgamma(m + 1.0) * decay;
    }
  }
  return s;
}

double cascade_abs_bound(const CascadeState& s, double horizon) {
  // |X^(0)(t+u)| <= sum_m sup_{u<=H} u^m e^{-nu u}/m! |X^(m)(t)|, sup at u = min(m/nu, H)
  double bound = 0.0;
  for (std::size_t m = 0; m < s.coords.size(); ++m) {
    if (s.coords[m] == 0.0) continue;
    double u = std::min(static_cast<double>(m) / s.nu, horizon);
    double w = m == 0 ? 1.0 : std::exp(m * std::log(u) - std::lgamma(m + 1.0) - s.nu * u);
    if (u == 0.0 && m > 0) w = 0.0;
    bound += w * std::abs(s.coords[m]);
  }
  return bound;
}

}  // namespace adh
