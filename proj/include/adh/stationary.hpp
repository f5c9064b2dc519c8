#pragma once

#include <optional>
#include <string>
#include <vector>

#include "adh/rates.hpp"

namespace adh {

struct FixedPointOptions {
  double epsilon = 1e-12;
  /// 0 picks 1/delta for hard-refractory rates, else 10 sup f, else grows from 10 L
  double lambda_max = 0.0;
  std::size_t scan_points = 2000;
  double tol = 1e-12;
};

struct StationaryResult {
  double lambda_bar = 0.0;
  double x_star = 0.0;
  double kappa = 0.0;
  double bracket_lo = 0.0;
  double bracket_hi = 0.0;
  /// |RHS(lambda_bar) - 1/lambda_bar|
  double residual = 0.0;
};

struct FixedPointReport {
  std::vector<StationaryResult> roots;
  double scan_lo = 0.0;
  double scan_hi = 0.0;
  bool unique() const { return roots.size() == 1; }
  bool found() const { return !roots.empty(); }
  /// human-readable note when no root or several roots were found
  std::string note;
};

/// Mean time between jumps of a unit with frozen memory x:
/// \int_0^inf exp(-\int_0^a psi(x, z) dz) da. Infinite when the survival does
/// not decay (psi eventually zero).
double mean_interjump_time(const RateSpec& rate, double x);

/// Solves 1/lambda = mean_interjump_time(rate, lambda * h_integral).
FixedPointReport solve_fixed_point(const RateSpec& rate, double h_integral, const FixedPointOptions& opts = {});

class AgeDensity {
 public:
  AgeDensity(const RateSpec& rate, double x_star);
  double kappa() const { return kappa_; }
  double operator()(double a) const;
  /// \int_0^a psi(x*, z) dz
  double cumulative_hazard(double a) const;
  /// ages where the density was tabulated (empty in closed form)
  const std::vector<double>& nodes() const { return ages_; }

 private:
  const RateSpec* rate_;
  double x_;
  double kappa_ = 0.0;
  bool closed_form_ = false;
  double delta_ = 0.0;
  double f_ = 0.0;
  std::vector<double> ages_;
  std::vector<double> hazard_;
  double tail_rate_ = 0.0;
};

/// kappa and g(a) = kappa exp(-\int_0^a psi(x*, z) dz). The rate object must
/// outlive the returned density.
AgeDensity stationary_age_density(const RateSpec& rate, double x_star);

struct SweepRow {
  double delta = 0.0;
  std::optional<double> lambda_bar;
  std::size_t roots = 0;
};

struct DeltaSweep {
  std::vector<SweepRow> rows;
  bool all_unique = false;
  bool strictly_decreasing = false;
  bool strictly_increasing = false;
};

/// lambda_bar(delta) for a hard-refractory family with fixed f.
DeltaSweep delta_sweep(const RateSpec& rate, double h_integral, const std::vector<double>& deltas,
                       const FixedPointOptions& opts = {}, int threads = 1);

}  // namespace adh
