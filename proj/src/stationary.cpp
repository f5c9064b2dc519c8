#include "adh/stationary.hpp"

#include <algorithm>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/tools/roots.hpp>
#include <cmath>
#include <limits>

#include "adh/errors.hpp"
#include "adh/parallel.hpp"

namespace adh {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kHazardCutoff = 45.0;
constexpr double kAgeCap = 1e4;

struct HazardTable {
  std::vector<double> ages{0.0};
  std::vector<double> hazard{0.0};
  double mean = 0.0;
  double tail_rate = 0.0;
  bool finite = true;
};

// Marches in age with segments that keep the hazard increment near 1/4,
// splitting at the declared age breakpoints of psi.
HazardTable tabulate(const RateSpec& rate, double x) {
  using GK = boost::math::quadrature::gauss_kronrod<double, 15>;
  HazardTable t;
  auto bps = rate.age_breakpoints();
  std::sort(bps.begin(), bps.end());
  double a = 0.0, psi_cum = 0.0;
  while (psi_cum < kHazardCutoff) {
    if (a > kAgeCap) {
      t.finite = false;
      return t;
    }
    const double here = rate(x, a);
    double h = here > 0.0 ? std::clamp(0.25 / here, 1e-4, 1.0) : 1.0;
    double b = a + h;
    for (double bp : bps)
      if (bp > a && bp < b) {
        b = bp;
        break;
      }
    auto psi = [&](double z) { return rate(x, z); };
    auto inner = [&](double u) { return u > a ? GK::integrate(psi, a, u, 0, 0.0) : 0.0; };
    const double base = psi_cum;
    t.mean += GK::integrate([&](double u) { return std::exp(-(base + inner(u))); }, a, b, 0, 0.0);
    psi_cum += inner(b);
    a = b;
    t.ages.push_back(a);
    t.hazard.push_back(psi_cum);
  }
  t.tail_rate = rate(x, a);
  if (t.tail_rate > 0.0) t.mean += std::exp(-psi_cum) / t.tail_rate;
  return t;
}
}  // namespace

double mean_interjump_time(const RateSpec& rate, double x) {
  if (auto hr = rate.as_hard_refractory()) {
    const double f = hr->f(x);
    if (!(f >= 0.0)) throw ModelError("rate function returned a negative or NaN value");
    return f > 0.0 ? hr->delta + 1.0 / f : kInf;
  }
  auto t = tabulate(rate, x);
  return t.finite ? t.mean : kInf;
}

FixedPointReport solve_fixed_point(const RateSpec& rate, double h_integral, const FixedPointOptions& opts) {
  if (!(opts.epsilon > 0.0) || opts.scan_points < 2) throw ConfigError("fixed point: bad scan options");
  auto F = [&](double lam) { return 1.0 / lam - mean_interjump_time(rate, lam * h_integral); };

  double lmax = opts.lambda_max;
  if (!(lmax > 0.0)) {
    const auto* hr = rate.as_hard_refractory();
    if (hr && hr->delta > 0.0) {
      lmax = 1.0 / hr->delta;
    } else if (auto ub = rate.upper_bound()) {
      lmax = 10.0 * std::max(*ub, opts.epsilon);
    } else {
      lmax = 10.0 * rate.lipschitz_L();
      while (F(lmax) > 0.0 && lmax < 1e12) lmax *= 2.0;
    }
  }
  FixedPointReport rep;
  rep.scan_lo = opts.epsilon;
  rep.scan_hi = lmax;
  if (!(lmax > opts.epsilon)) {
    rep.note = "empty search interval";
    return rep;
  }

  std::vector<double> grid(opts.scan_points), vals(opts.scan_points);
  const double ratio = std::log(lmax / opts.epsilon) / static_cast<double>(opts.scan_points - 1);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    grid[i] = i + 1 == grid.size() ? lmax : opts.epsilon * std::exp(ratio * static_cast<double>(i));
    vals[i] = F(grid[i]);
  }

  auto finish = [&](double lam, double lo, double hi) {
    StationaryResult r;
    r.lambda_bar = lam;
    r.x_star = lam * h_integral;
    const double rhs = mean_interjump_time(rate, r.x_star);
    r.kappa = 1.0 / rhs;
    r.residual = std::abs(rhs - 1.0 / lam);
    r.bracket_lo = lo;
    r.bracket_hi = hi;
    rep.roots.push_back(r);
  };

  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (vals[i] == 0.0) {
      finish(grid[i], grid[i], grid[i]);
      continue;
    }
    if (i + 1 == grid.size() || vals[i + 1] == 0.0) continue;
    if ((vals[i] > 0.0) == (vals[i + 1] > 0.0)) continue;
    double lo = grid[i], hi = grid[i + 1];
    double root;
    if (std::isfinite(vals[i]) && std::isfinite(vals[i + 1])) {
      std::uintmax_t iters = 200;
      auto tol = [&](double a, double b) { return std::abs(b - a) <= opts.tol * std::max(1.0, std::abs(a)); };
      auto r = boost::math::tools::toms748_solve(F, lo, hi, vals[i], vals[i + 1], tol, iters);
      root = 0.5 * (r.first + r.second);
    } else {
      double flo = vals[i];
      for (int it = 0; it < 200 && hi - lo > opts.tol * std::max(1.0, lo); ++it) {
        const double mid = 0.5 * (lo + hi);
        const double fm = F(mid);
        if ((fm > 0.0) == (flo > 0.0)) {
          lo = mid;
          flo = fm;
        } else {
          hi = mid;
        }
      }
      root = 0.5 * (lo + hi);
    }
    finish(root, grid[i], grid[i + 1]);
  }
  if (rep.roots.empty())
    rep.note = "no sign change of 1/lambda - RHS(lambda) on the scanned interval";
  else if (rep.roots.size() > 1)
    rep.note = std::to_string(rep.roots.size()) + " fixed points found";
  return rep;
}

AgeDensity::AgeDensity(const RateSpec& rate, double x_star) : rate_(&rate), x_(x_star) {
  if (auto hr = rate.as_hard_refractory()) {
    closed_form_ = true;
    delta_ = hr->delta;
    f_ = hr->f(x_star);
    if (!(f_ > 0.0)) throw ModelError("stationary age density: normalizer diverges (rate vanishes)");
    kappa_ = 1.0 / (delta_ + 1.0 / f_);
    return;
  }
  auto t = tabulate(rate, x_star);
  if (!t.finite) throw ModelError("stationary age density: normalizer diverges (survival does not decay)");
  kappa_ = 1.0 / t.mean;
  ages_ = std::move(t.ages);
  hazard_ = std::move(t.hazard);
  tail_rate_ = t.tail_rate;
}

double AgeDensity::cumulative_hazard(double a) const {
  if (a < 0.0) throw std::domain_error("age density at negative age");
  if (closed_form_) return f_ * std::max(a - delta_, 0.0);
  if (a >= ages_.back()) return hazard_.back() + tail_rate_ * (a - ages_.back());
  auto it = std::upper_bound(ages_.begin(), ages_.end(), a);
  const auto i = static_cast<std::size_t>(it - ages_.begin()) - 1;
  using GK = boost::math::quadrature::gauss_kronrod<double, 15>;
  const double x = x_;
  const RateSpec& rate = *rate_;
  return hazard_[i] + GK::integrate([&](double z) { return rate(x, z); }, ages_[i], a, 0, 0.0);
}

double AgeDensity::operator()(double a) const { return kappa_ * std::exp(-cumulative_hazard(a)); }

AgeDensity stationary_age_density(const RateSpec& rate, double x_star) { return AgeDensity(rate, x_star); }

DeltaSweep delta_sweep(const RateSpec& rate, double h_integral, const std::vector<double>& deltas,
                       const FixedPointOptions& opts, int threads) {
  if (!rate.as_hard_refractory()) throw UnsupportedError("delta sweep needs a hard-refractory rate");
  DeltaSweep out;
  out.rows.resize(deltas.size());
  parallel_for(deltas.size(), threads, [&](std::size_t i) {
    const RateSpec r = rate.with_delta(deltas[i]);
    auto rep = solve_fixed_point(r, h_integral, opts);
    out.rows[i].delta = deltas[i];
    out.rows[i].roots = rep.roots.size();
    if (rep.unique()) out.rows[i].lambda_bar = rep.roots.front().lambda_bar;
  });
  out.all_unique = std::all_of(out.rows.begin(), out.rows.end(), [](const SweepRow& r) { return r.roots == 1; });
  if (out.all_unique && out.rows.size() > 1) {
    out.strictly_decreasing = true;
    out.strictly_increasing = true;
    for (std::size_t i = 1; i < out.rows.size(); ++i) {
      const bool up = out.rows[i].delta > out.rows[i - 1].delta;
      const double d = *out.rows[i].lambda_bar - *out.rows[i - 1].lambda_bar;
      if (!(up ? d < 0.0 : d > 0.0)) out.strictly_decreasing = false;
      if (!(up ? d > 0.0 : d < 0.0)) out.strictly_increasing = false;
    }
  }
  return out;
}

}  // namespace adh
