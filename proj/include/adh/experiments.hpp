#pragma once

#include <cstdint>
#include <vector>

#include "adh/meanfield.hpp"
#include "adh/network.hpp"

namespace adh {

// ---------------------------------------------------------------- coupling

struct CouplingSetup {
  /// The two runs; they must agree on population sizes, rates, kernels and
  /// horizon and may differ in initial signals and initial age laws.
  NetworkConfig first;
  NetworkConfig second;
  /// draw the second run's initial ages from an independent key
  bool independent_age_draws = true;
};

struct CouplingRow {
  std::uint64_t seed = 0;
  bool coupled = false;
  /// earliest t with identical logs on (t, horizon]; meaningful when coupled
  double coupling_time = 0.0;
  std::size_t events_first = 0;
  std::size_t events_second = 0;
};

struct CouplingReport {
  std::vector<CouplingRow> rows;
  double horizon = 0.0;
  double fraction_coupled = 0.0;
};

/// Earliest t such that both logs agree exactly on (t, horizon].
double agreement_start(const EventLog& a, const EventLog& b);

CouplingReport coupling_experiment(const CouplingSetup& setup, std::uint64_t seed, std::size_t replicates,
                                   int threads = 1);

// ---------------------------------------------------------------- chaos

struct ChaosOptions {
  std::vector<int> sizes{50, 100, 200, 400};
  std::size_t replicates = 20;
  /// tagged units per population compared with their limit twins
  int tagged = 1;
  MeanFieldOptions limit;
  int threads = 1;
  std::uint64_t seed = 1;
};

struct ChaosRow {
  int N = 0;
  double sup_distance = 0.0;
  double sup_distance_se = 0.0;
  double noncommon = 0.0;
  double noncommon_se = 0.0;
};

struct ChaosReport {
  std::vector<ChaosRow> rows;
  MeanFieldSolution limit;
  /// each step stays below the previous one plus two combined standard errors
  bool distance_trend = false;
  bool noncommon_trend = false;
};

/// Population sizes summing to N with proportions taken from cfg.
std::vector<int> split_sizes(const NetworkConfig& cfg, int N);

/// Number of event times present in exactly one of the two sorted lists.
std::size_t noncommon_events(const std::vector<double>& a, const std::vector<double>& b);

ChaosReport chaos_experiment(const NetworkConfig& cfg, const ChaosOptions& opts);

// ---------------------------------------------------------------- weights

struct WeightOptions {
  /// truncation horizons applied to every kernel entry
  std::vector<double> truncations;
  std::size_t replicates = 20;
  int threads = 1;
  std::uint64_t seed = 1;
};

struct WeightRow {
  double truncation = 0.0;
  double l1_gap = 0.0;
  double event_distance = 0.0;
  double event_distance_se = 0.0;
  double ratio = 0.0;
};

struct WeightReport {
  std::vector<WeightRow> rows;
  /// empirical constant: max distance / gap over the ladder
  double c_hat = 0.0;
  /// max ratio / min ratio over rows with a positive gap
  double stability = 0.0;
  bool distance_monotone = false;
};

/// sum over entries of \int_0^T |h - h~|.
double kernel_l1_gap(const KernelMatrix& a, const KernelMatrix& b, double T);

WeightReport weight_approx_experiment(const NetworkConfig& cfg, const WeightOptions& opts);

// ---------------------------------------------------------------- rescaling

struct RescalingResult {
  double ks_statistic = 0.0;
  /// asymptotic Kolmogorov tail probability with the small-sample correction
  double p_value = 0.0;
  std::size_t n = 0;
};

/// Kolmogorov distribution tail P(K > lambda).
double kolmogorov_tail(double lambda);

/// KS test of the gaps against Exp(1).
RescalingResult ks_exponential(std::vector<double> gaps);

/// Time-rescaled inter-event gaps of one unit tested against Exp(1).
RescalingResult rescaling_test(const NetworkConfig& cfg, const EventLog& log, int population, int unit);

/// Compensator increments between consecutive events of one unit, starting at 0.
std::vector<double> rescaled_gaps(const NetworkConfig& cfg, const EventLog& log, int population, int unit);

}  // namespace adh
