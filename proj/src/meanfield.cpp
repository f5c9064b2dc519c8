#include "adh/meanfield.hpp"

#include <algorithm>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <cmath>
#include <sstream>

#include "adh/errors.hpp"
#include "adh/parallel.hpp"

namespace adh {

namespace {
constexpr std::size_t kParticleBlock = 256;

std::size_t grid_intervals(double T, double step) {
  return static_cast<std::size_t>(std::max(1.0, std::ceil(T / step - 1e-9)));
}

std::vector<double> explicit_beta(const NetworkConfig& cfg, std::size_t k, const std::vector<double>& grid) {
  // pre-zero jumps of finitely many units carry weight 1/N and vanish in the
  // limit; only the explicit signal survives
  std::vector<double> out(grid.size());
  for (std::size_t j = 0; j < grid.size(); ++j) out[j] = cfg.populations[k].initial_signal.explicit_value(grid[j]);
  return out;
}

struct BlockSums {
  std::vector<double> sum;
  std::vector<double> sumsq;
  std::vector<double> active;
};
}  // namespace

double default_meanfield_step(const NetworkConfig& cfg) {
  double delta = std::numeric_limits<double>::infinity();
  for (const auto& p : cfg.populations)
    if (auto h = p.rate.as_hard_refractory(); h && h->delta > 0.0) delta = std::min(delta, h->delta);
  if (std::isfinite(delta)) return delta / 50.0;
  double m = 1.0;
  for (const auto& row : cfg.kernels.entries)
    for (const auto& k : row)
      if (auto e = k.as_erlang(); e && e->b != 0.0) m = std::min(m, 1.0 / e->nu);
  return 0.02 * m;
}

std::vector<std::vector<double>> convolve_memory(const NetworkConfig& cfg, double step, std::size_t points,
                                                 const std::vector<std::vector<double>>& lambda) {
  const auto P = cfg.populations.size();
  std::vector<double> grid(points);
  for (std::size_t j = 0; j < points; ++j) grid[j] = static_cast<double>(j) * step;
  std::vector<std::vector<double>> x(P);
  for (std::size_t k = 0; k < P; ++k) {
    x[k] = explicit_beta(cfg, k, grid);
    for (std::size_t l = 0; l < P; ++l) {
      const KernelSpec& ker = cfg.kernels.at(k, l);
      if (ker.is_zero()) continue;
      const double pl = cfg.proportion(static_cast<int>(l));
      std::vector<double> w(points, 0.0);
      for (std::size_t d = 1; d < points; ++d)
        w[d] = ker.integral(static_cast<double>(d - 1) * step, static_cast<double>(d) * step);
      for (std::size_t j = 1; j < points; ++j) {
        double s = 0.0;
        for (std::size_t i = 0; i < j; ++i) s += lambda[l][i] * w[j - i];
        x[k][j] += pl * s;
      }
    }
  }
  return x;
}

MeanFieldSolution solve_picard_mc(const NetworkConfig& cfg, const MeanFieldOptions& opts) {
  if (opts.particles < 1) throw ConfigError("meanfield: particles must be >= 1");
  if (opts.max_iter < 1) throw ConfigError("meanfield: max_iter must be >= 1");
  const double step = opts.step > 0.0 ? opts.step : default_meanfield_step(cfg);
  const std::size_t J = grid_intervals(cfg.horizon, step);
  const std::size_t points = J + 1;
  const double T = static_cast<double>(J) * step;
  const auto P = cfg.populations.size();
  const std::size_t M = opts.particles;
  const PrmLayout layout = cfg.prm_layout();
  const double window = cfg.thinning_window();

  MeanFieldSolution sol;
  sol.method = "picard-mc";
  sol.step = step;
  sol.particles = M;
  sol.grid.resize(points);
  for (std::size_t j = 0; j < points; ++j) sol.grid[j] = static_cast<double>(j) * step;
  sol.populations.resize(P);
  for (std::size_t k = 0; k < P; ++k) sol.populations[k].beta = explicit_beta(cfg, k, sol.grid);

  std::vector<std::vector<double>> ages(P, std::vector<double>(M));
  for (std::size_t k = 0; k < P; ++k)
    for (std::size_t p = 0; p < M; ++p)
      ages[k][p] = sample_initial_age(cfg.populations[k].initial_age, opts.seed, static_cast<int>(k), static_cast<int>(p));

  const std::size_t blocks = (M + kParticleBlock - 1) / kParticleBlock;

  auto run_particles = [&](const std::vector<std::vector<double>>& x) {
    std::vector<BlockSums> partial(P * blocks);
    parallel_for(P * blocks, opts.threads, [&](std::size_t task) {
      const std::size_t k = task / blocks;
      const std::size_t b = task % blocks;
      const std::size_t lo = b * kParticleBlock, hi = std::min(M, lo + kParticleBlock);
      const RateSpec& rate = cfg.populations[k].rate;
      const double silent = rate.silent_age();
      std::vector<PrmStream> streams;
      streams.reserve(hi - lo);
      for (std::size_t p = lo; p < hi; ++p)
        streams.emplace_back(opts.seed, UnitKey{static_cast<int>(k), static_cast<int>(p)}, layout);
      std::vector<ThinningUnit> units;
      for (std::size_t p = lo; p < hi; ++p)
        units.push_back({static_cast<int>(k), static_cast<int>(p), ages[k][p], &rate, &streams[p - lo]});
      FrozenMemory memory(step, x);
      EventLog log = run_thinning(units, memory, static_cast<int>(P), T, window, cfg.sim.max_events);

      std::vector<std::vector<double>> times(hi - lo);
      for (const auto& e : log.events) times[static_cast<std::size_t>(e.unit) - lo].push_back(e.time);
      BlockSums s{std::vector<double>(points, 0.0), std::vector<double>(points, 0.0), std::vector<double>(points, 0.0)};
      for (std::size_t p = lo; p < hi; ++p) {
        const auto& ts = times[p - lo];
        std::size_t e = 0;
        for (std::size_t j = 0; j < points; ++j) {
          const double t = sol.grid[j];
          while (e < ts.size() && ts[e] < t) ++e;
          const double a = e == 0 ? ages[k][p] + t : t - ts[e - 1];
          const double v = rate(x[k][j], a);
          s.sum[j] += v;
          s.sumsq[j] += v * v;
          if (silent > 0.0 && a >= silent) s.active[j] += 1.0;
        }
      }
      partial[task] = std::move(s);
    });
    // fixed block order keeps the reduction independent of the thread count
    std::vector<std::vector<double>> lam(P, std::vector<double>(points, 0.0));
    for (std::size_t k = 0; k < P; ++k) {
      auto& path = sol.populations[k];
      path.lambda_se.assign(points, 0.0);
      path.p.assign(points, std::numeric_limits<double>::quiet_NaN());
      std::vector<double> sum(points, 0.0), sumsq(points, 0.0), active(points, 0.0);
      for (std::size_t b = 0; b < blocks; ++b) {
        const auto& s = partial[k * blocks + b];
        for (std::size_t j = 0; j < points; ++j) {
          sum[j] += s.sum[j];
          sumsq[j] += s.sumsq[j];
          active[j] += s.active[j];
        }
      }
      const double m = static_cast<double>(M);
      const bool refractory = cfg.populations[k].rate.silent_age() > 0.0;
      for (std::size_t j = 0; j < points; ++j) {
        lam[k][j] = sum[j] / m;
        const double var = M > 1 ? std::max(0.0, (sumsq[j] - m * lam[k][j] * lam[k][j]) / (m - 1.0)) : 0.0;
        path.lambda_se[j] = std::sqrt(var / m);
        if (refractory) path.p[j] = active[j] / m;
      }
    }
    return lam;
  };

  std::vector<std::vector<double>> x(P), x_prev, lam;
  for (std::size_t k = 0; k < P; ++k) x[k] = sol.populations[k].beta;
  for (int n = 1; n <= opts.max_iter; ++n) {
    if (n > 1) {
      x_prev = x;
      x = convolve_memory(cfg, step, points, lam);
      double dev = 0.0;
      for (std::size_t k = 0; k < P; ++k)
        for (std::size_t j = 0; j < points; ++j) dev = std::max(dev, std::abs(x[k][j] - x_prev[k][j]));
      sol.deviations.push_back(dev);
    }
    lam = run_particles(x);
    sol.iterations = n;
    if (n > 1 && sol.deviations.back() <= opts.tol) {
      sol.converged = true;
      break;
    }
  }
  for (std::size_t k = 0; k < P; ++k) {
    auto& path = sol.populations[k];
    path.x = x[k];
    path.lambda_bar = lam[k];
    path.phi.assign(points, 0.0);
    for (std::size_t j = 1; j < points; ++j) path.phi[j] = path.phi[j - 1] + lam[k][j - 1] * step;
  }
  if (!sol.converged) {
    std::ostringstream msg;
    msg << "picard iteration did not reach tol " << opts.tol << " in " << opts.max_iter << " iterations; deviations:";
    for (double d : sol.deviations) msg << ' ' << d;
    throw NonConvergenceError(msg.str());
  }
  return sol;
}

MeanFieldSolution solve_hard_refractory_dde(const NetworkConfig& cfg, double step) {
  if (cfg.populations.size() != 1) throw UnsupportedError("dde solver handles a single class");
  const Population& pop = cfg.populations[0];
  const HardRefractory* hr = pop.rate.as_hard_refractory();
  if (!hr) throw UnsupportedError("dde solver needs a hard-refractory rate");
  const double delta = hr->delta;
  if (!(delta > 0.0)) throw ConfigError("dde solver needs delta > 0");
  const KernelSpec& ker = cfg.kernels.at(0, 0);
  double b = 0.0, nu = 1.0;
  int n = 0;
  if (!ker.is_zero()) {
    const Erlang* e = ker.as_erlang();
    if (!e || ker.truncation_active()) throw UnsupportedError("dde solver needs an untruncated Erlang kernel");
    b = e->b;
    nu = e->nu;
    n = e->n;
  }
  if (!(step > 0.0)) step = delta / 50.0;
  const double ratio = delta / step;
  const auto m = static_cast<std::size_t>(std::llround(ratio));
  if (m < 1 || std::abs(ratio - static_cast<double>(m)) > 1e-9 * ratio)
    throw ConfigError("dde solver: step must divide delta");
  step = delta / static_cast<double>(m);

  const std::size_t J = grid_intervals(cfg.horizon, step);
  const std::size_t points = J + 1;
  const ScalarMap& f = hr->f;
  const AgeLaw& law = pop.initial_age;
  const bool smooth = law.density(0.0).has_value();
  const auto atoms = law.atoms();

  MeanFieldSolution sol;
  sol.method = "dde";
  sol.step = step;
  sol.grid.resize(points);
  for (std::size_t j = 0; j < points; ++j) sol.grid[j] = static_cast<double>(j) * step;
  sol.populations.resize(1);
  PopulationPath& path = sol.populations[0];
  path.beta = explicit_beta(cfg, 0, sol.grid);
  path.x.assign(points, 0.0);
  path.lambda_bar.assign(points, 0.0);
  path.lambda_se.assign(points, 0.0);
  path.p.assign(points, 0.0);
  path.phi.assign(points, 0.0);
  std::vector<double> F(points), S(points), I(points), Phi(points, 0.0);

  // G[q] = \int_0^step e^{-nu v} v^q / q! dv
  std::vector<double> G(static_cast<std::size_t>(n) + 2);
  for (std::size_t q = 0; q < G.size(); ++q)
    G[q] = boost::math::gamma_p(static_cast<double>(q) + 1.0, nu * step) / std::pow(nu, static_cast<double>(q) + 1.0);

  auto pi0 = [&](double a) { return *law.density(a); };
  auto atom_survival = [&](std::size_t j, double phi_end) {
    // units that never jumped: active from max(0, delta - a), survive exp(-\int f)
    double s = 0.0;
    const double t = sol.grid[j];
    for (const auto& [a, w] : atoms) {
      const double ta = std::max(0.0, delta - a);
      if (ta > t) continue;
      const auto i = std::min(static_cast<std::size_t>(ta / step), j);
      double phi_a = Phi[i];
      if (i < j) {
        const double frac = (ta - sol.grid[i]) / step;
        const double next = i + 1 == j ? phi_end : Phi[i + 1];
        phi_a += frac * (next - Phi[i]);
      }
      s += w * std::exp(-(phi_end - phi_a));
    }
    return s;
  };

  path.x[0] = path.beta[0];
  F[0] = f(path.x[0]);
  S[0] = law.survival(delta);
  I[0] = 0.0;
  path.p[0] = S[0];
  path.lambda_bar[0] = F[0] * path.p[0];

  std::vector<double> X(static_cast<std::size_t>(n) + 1, 0.0), Xf(X.size()), Xn(X.size());
  auto flow = [&](const std::vector<double>& in, std::vector<double>& out) {
    const double decay = std::exp(-nu * step);
    for (std::size_t k = 0; k < in.size(); ++k) {
      double acc = 0.0, term = 1.0;
      for (std::size_t q = 0; k + q < in.size(); ++q) {
        acc += term * in[k + q];
        term *= step / static_cast<double>(q + 1);
      }
      out[k] = decay * acc;
    }
  };

  for (std::size_t j = 0; j < J; ++j) {
    flow(X, Xf);
    const double lam_j = path.lambda_bar[j];
    auto close_step = [&](double x_next, double& F_next, double& S_next, double& I_next, double& Phi_next) {
      F_next = f(x_next);
      const double E = std::exp(-0.5 * step * (F[j] + F_next));
      Phi_next = Phi[j] + 0.5 * step * (F[j] + F_next);
      if (smooth) {
        S_next = E * S[j];
        if (j < m) S_next += 0.5 * step * (pi0(delta - sol.grid[j]) * E + pi0(delta - sol.grid[j + 1]));
      } else {
        Phi[j + 1] = Phi_next;
        S_next = atom_survival(j + 1, Phi_next);
      }
      I_next = j >= m ? E * I[j] + 0.5 * step * (path.lambda_bar[j - m] * E + path.lambda_bar[j + 1 - m]) : 0.0;
      return F_next * (S_next + I_next);
    };

    // predictor: source frozen at the left endpoint
    for (std::size_t k = 0; k < X.size(); ++k) Xn[k] = Xf[k] + b * lam_j * G[X.size() - 1 - k];
    double Fp, Sp, Ip, Phip;
    const double lam_p = close_step(Xn[0] + path.beta[j + 1], Fp, Sp, Ip, Phip);
    // corrector: source linear between the endpoints
    for (std::size_t k = 0; k < X.size(); ++k) {
      const std::size_t q = X.size() - 1 - k;
      Xn[k] = Xf[k] + b * (lam_p * G[q] - (lam_p - lam_j) / step * static_cast<double>(q + 1) * G[q + 1]);
    }
    path.x[j + 1] = Xn[0] + path.beta[j + 1];
    path.lambda_bar[j + 1] = close_step(path.x[j + 1], F[j + 1], S[j + 1], I[j + 1], Phi[j + 1]);
    path.p[j + 1] = S[j + 1] + I[j + 1];
    path.phi[j + 1] = path.phi[j] + 0.5 * step * (path.lambda_bar[j] + path.lambda_bar[j + 1]);
    X = Xn;
  }
  sol.iterations = 1;
  sol.converged = true;
  return sol;
}

EventLog simulate_limit_units(const NetworkConfig& cfg, const MeanFieldSolution& sol, StreamSet& streams,
                              const std::vector<std::vector<double>>& initial_ages,
                              const std::vector<std::vector<int>>& units) {
  const auto P = cfg.populations.size();
  if (sol.populations.size() != P || units.size() != P) throw ConfigError("limit units: population count mismatch");
  std::vector<std::vector<double>> x(P);
  for (std::size_t k = 0; k < P; ++k) x[k] = sol.populations[k].x;
  FrozenMemory memory(sol.step, std::move(x));
  std::vector<ThinningUnit> list;
  for (std::size_t k = 0; k < P; ++k)
    for (int j : units[k])
      list.push_back({static_cast<int>(k), j, initial_ages.at(k).at(static_cast<std::size_t>(j)), &cfg.populations[k].rate,
                      &streams.at(static_cast<int>(k), j)});
  const double T = std::min(cfg.horizon, sol.grid.back());
  return run_thinning(list, memory, static_cast<int>(P), T, cfg.thinning_window(), cfg.sim.max_events);
}

DerivativeJump derivative_jump_at_delta(const NetworkConfig& cfg, const MeanFieldSolution& dde) {
  const HardRefractory* hr = cfg.populations.at(0).rate.as_hard_refractory();
  if (!hr) throw UnsupportedError("derivative jump needs a hard-refractory rate");
  const auto dens0 = cfg.populations[0].initial_age.density(0.0);
  if (!dens0) throw UnsupportedError("derivative jump needs a smooth initial age law");
  const double h = dde.step;
  const auto m = static_cast<std::size_t>(std::llround(hr->delta / h));
  const auto& p = dde.populations.at(0).p;
  if (m < 2 || m + 2 >= p.size()) throw ConfigError("derivative jump: grid too short around delta");
  DerivativeJump out;
  out.step = h;
  const double fwd = (-3.0 * p[m] + 4.0 * p[m + 1] - p[m + 2]) / (2.0 * h);
  const double bwd = (3.0 * p[m] - 4.0 * p[m - 1] + p[m - 2]) / (2.0 * h);
  out.observed = fwd - bwd;
  const double f0p0 = hr->f(dde.populations[0].x[0]) * p[0];
  out.predicted = f0p0 - *dens0;
  out.error = std::abs(out.observed - out.predicted);
  out.scale = std::max({1.0, std::abs(f0p0), *dens0});
  return out;
}

CrossValidation cross_validate(const MeanFieldSolution& mc, const MeanFieldSolution& dde, double alpha) {
  if (mc.grid.size() != dde.grid.size() || mc.populations.size() != dde.populations.size())
    throw ConfigError("cross_validate: solutions live on different grids");
  CrossValidation cv;
  const double count = static_cast<double>(mc.grid.size() * mc.populations.size());
  boost::math::normal_distribution<double> nd;
  cv.z = boost::math::quantile(nd, 1.0 - alpha / (2.0 * count));
  cv.within_band = true;
  for (std::size_t k = 0; k < mc.populations.size(); ++k) {
    const auto& a = mc.populations[k];
    const auto& b = dde.populations[k];
    for (std::size_t j = 0; j < mc.grid.size(); ++j) {
      const double d = std::abs(a.lambda_bar[j] - b.lambda_bar[j]);
      const double se = std::hypot(a.lambda_se[j], b.lambda_se[j]);
      cv.sup_lambda_diff = std::max(cv.sup_lambda_diff, d);
      cv.sup_x_diff = std::max(cv.sup_x_diff, std::abs(a.x[j] - b.x[j]));
      cv.max_band = std::max(cv.max_band, cv.z * se);
      if (se > 0.0) cv.max_standardized = std::max(cv.max_standardized, d / se);
      if (d > cv.z * se + 1e-12) cv.within_band = false;
    }
  }
  return cv;
}

}  // namespace adh
