#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "adh/network.hpp"

namespace adh {

struct MeanFieldOptions {
  /// grid step; 0 picks delta/50 for hard-refractory rates, else 0.02 min(1, 1/nu)
  double step = 0.0;
  std::size_t particles = 10'000;
  double tol = 1e-3;
  int max_iter = 50;
  int threads = 1;
  std::uint64_t seed = 1;
};

struct PopulationPath {
  /// cumulative expected jump count
  std::vector<double> phi;
  std::vector<double> x;
  std::vector<double> lambda_bar;
  /// Monte-Carlo standard error of lambda_bar (zero for deterministic solvers)
  std::vector<double> lambda_se;
  /// P(A_t >= delta) for hard-refractory rates, NaN otherwise
  std::vector<double> p;
  std::vector<double> beta;
};

struct MeanFieldSolution {
  std::string method;
  double step = 0.0;
  std::vector<double> grid;
  std::vector<PopulationPath> populations;
  /// sup-grid |x^n - x^{n-1}| per Picard iteration
  std::vector<double> deviations;
  int iterations = 0;
  bool converged = false;
  std::size_t particles = 0;
};

double default_meanfield_step(const NetworkConfig& cfg);

/// x^k on the grid from piecewise-constant densities lambda^l (left endpoints):
/// x^k_j = beta^k_j + sum_l p_l sum_{i<j} lambda^l_i \int_{t_i}^{t_{i+1}} h_kl(t_j - s) ds.
std::vector<std::vector<double>> convolve_memory(const NetworkConfig& cfg, double step, std::size_t points,
                                                 const std::vector<std::vector<double>>& lambda);

/// Picard iteration over the memory trajectory with Monte-Carlo limit units.
/// Particle p of population k is driven by the stream keyed (k, p) and starts
/// from the initial age drawn for unit (k, p), so it is the limit twin of
/// network unit (k, p) under the same seed. Throws NonConvergenceError with
/// the deviation trace when max_iter is exhausted.
MeanFieldSolution solve_picard_mc(const NetworkConfig& cfg, const MeanFieldOptions& opts);

/// Deterministic closed loop for one hard-refractory class with an Erlang
/// (or zero) self kernel: exact cascade flow for x, split survival
/// representation for p. `step` must divide delta.
MeanFieldSolution solve_hard_refractory_dde(const NetworkConfig& cfg, double step = 0.0);

/// Limit units driven by frozen memory x^k; units[k] lists the unit indices of
/// population k to simulate.
EventLog simulate_limit_units(const NetworkConfig& cfg, const MeanFieldSolution& sol, StreamSet& streams,
                              const std::vector<std::vector<double>>& initial_ages,
                              const std::vector<std::vector<int>>& units);

struct DerivativeJump {
  double observed = 0.0;
  double predicted = 0.0;
  double error = 0.0;
  double step = 0.0;
  /// max(1, |f(x_0) p_0|, pi_0(0)); the error tolerance unit
  double scale = 1.0;
};

/// One-sided finite differences of p at t = delta against f(x_0) p_0 - pi_0(0).
DerivativeJump derivative_jump_at_delta(const NetworkConfig& cfg, const MeanFieldSolution& dde);

struct CrossValidation {
  double sup_lambda_diff = 0.0;
  double sup_x_diff = 0.0;
  /// simultaneous (Bonferroni) two-sided normal quantile used for the band
  double z = 0.0;
  /// max over grid of |diff| / se where se > 0
  double max_standardized = 0.0;
  /// largest band half-width z se on the grid
  double max_band = 0.0;
  bool within_band = false;
};

CrossValidation cross_validate(const MeanFieldSolution& mc, const MeanFieldSolution& dde, double alpha = 0.01);

}  // namespace adh
