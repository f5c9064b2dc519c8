#include "adh/experiments.hpp"

#include <algorithm>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <numeric>

#include "adh/errors.hpp"
#include "adh/parallel.hpp"

namespace adh {

namespace {
struct MeanSe {
  double mean = 0.0;
  double se = 0.0;
};

MeanSe mean_se(const std::vector<double>& v) {
  MeanSe out;
  if (v.empty()) return out;
  const double n = static_cast<double>(v.size());
  out.mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
  if (v.size() > 1) {
    double ss = 0.0;
    for (double x : v) ss += (x - out.mean) * (x - out.mean);
    out.se = std::sqrt(ss / (n - 1.0) / n);
  }
  return out;
}

std::vector<std::vector<std::vector<double>>> times_by_unit(const NetworkConfig& cfg, const EventLog& log) {
  std::vector<std::vector<std::vector<double>>> out(cfg.populations.size());
  for (std::size_t k = 0; k < cfg.populations.size(); ++k) out[k].resize(static_cast<std::size_t>(cfg.populations[k].size));
  for (const auto& e : log.events) out[static_cast<std::size_t>(e.population)][static_cast<std::size_t>(e.unit)].push_back(e.time);
  return out;
}
}  // namespace

// ---------------------------------------------------------------- coupling

double agreement_start(const EventLog& a, const EventLog& b) {
  auto ia = a.events.rbegin();
  auto ib = b.events.rbegin();
  while (ia != a.events.rend() && ib != b.events.rend() && *ia == *ib) {
    ++ia;
    ++ib;
  }
  double t = 0.0;
  if (ia != a.events.rend()) t = std::max(t, ia->time);
  if (ib != b.events.rend()) t = std::max(t, ib->time);
  return t;
}

CouplingReport coupling_experiment(const CouplingSetup& setup, std::uint64_t seed, std::size_t replicates, int threads) {
  const auto& A = setup.first;
  const auto& B = setup.second;
  if (A.populations.size() != B.populations.size() || A.horizon != B.horizon)
    throw ConfigError("coupling: the two runs must share populations and horizon");
  for (std::size_t k = 0; k < A.populations.size(); ++k)
    if (A.populations[k].size != B.populations[k].size) throw ConfigError("coupling: population sizes differ");

  CouplingReport rep;
  rep.horizon = A.horizon;
  rep.rows.resize(replicates);
  parallel_for(replicates, threads, [&](std::size_t r) {
    const std::uint64_t s = derive_key(seed, {r});
    StreamSet sa(s, A), sb(s, B);
    auto ages_a = sample_initial_ages(A, s);
    auto ages_b = sample_initial_ages(B, setup.independent_age_draws ? derive_key(s, {0xC0u}) : s);
    EventLog la = simulate(A, sa, ages_a);
    EventLog lb = simulate(B, sb, ages_b);
    CouplingRow row;
    row.seed = s;
    row.events_first = la.events.size();
    row.events_second = lb.events.size();
    row.coupling_time = agreement_start(la, lb);
    row.coupled = la.final_state.age == lb.final_state.age;
    rep.rows[r] = row;
  });
  const auto coupled = std::count_if(rep.rows.begin(), rep.rows.end(), [](const CouplingRow& r) { return r.coupled; });
  rep.fraction_coupled = replicates ? static_cast<double>(coupled) / static_cast<double>(replicates) : 0.0;
  return rep;
}

// ---------------------------------------------------------------- chaos

std::vector<int> split_sizes(const NetworkConfig& cfg, int N) {
  const auto P = static_cast<int>(cfg.populations.size());
  if (N < P) throw ConfigError("chaos: N must be at least the number of populations");
  std::vector<int> sizes(static_cast<std::size_t>(P));
  int used = 0;
  for (int k = 0; k + 1 < P; ++k) {
    sizes[static_cast<std::size_t>(k)] = std::max(1, static_cast<int>(std::lround(cfg.proportion(k) * N)));
    used += sizes[static_cast<std::size_t>(k)];
  }
  sizes.back() = N - used;
  if (sizes.back() < 1) throw ConfigError("chaos: N too small for the population proportions");
  return sizes;
}

std::size_t noncommon_events(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> diff;
  std::set_symmetric_difference(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(diff));
  return diff.size();
}

ChaosReport chaos_experiment(const NetworkConfig& cfg, const ChaosOptions& opts) {
  if (opts.tagged < 1) throw ConfigError("chaos: at least one tagged unit is required");
  ChaosReport rep;
  rep.limit = solve_picard_mc(cfg, opts.limit);
  const auto& limit = rep.limit;
  const auto P = cfg.populations.size();

  const std::size_t R = opts.replicates;
  const std::size_t tasks = opts.sizes.size() * R;
  std::vector<double> dist(tasks), noncommon(tasks);
  parallel_for(tasks, opts.threads, [&](std::size_t task) {
    const std::size_t g = task / R, r = task % R;
    const int N = opts.sizes[g];
    NetworkConfig net = cfg;
    net.mode = InteractionMode::mean_field;
    auto sizes = split_sizes(cfg, N);
    for (std::size_t k = 0; k < P; ++k) net.populations[k].size = sizes[k];
    finalize(net);
    const std::uint64_t s = derive_key(opts.seed, {static_cast<std::uint64_t>(N), r});
    StreamSet streams(s, net);
    auto ages = sample_initial_ages(net, s);
    EventLog log = simulate(net, streams, ages);

    // network memory against the limit trajectory on the shared grid
    NetworkMemory mem(net);
    std::size_t e = 0;
    double sup = 0.0;
    for (std::size_t j = 0; j < limit.grid.size() && limit.grid[j] <= net.horizon; ++j) {
      const double t = limit.grid[j];
      while (e < log.events.size() && log.events[e].time < t) {
        mem.on_event(log.events[e].population, log.events[e].time);
        ++e;
      }
      for (std::size_t k = 0; k < P; ++k)
        sup = std::max(sup, std::abs(mem.value(static_cast<int>(k), t) - limit.populations[k].x[j]));
    }
    dist[task] = sup;

    std::vector<std::vector<int>> tagged(P);
    for (std::size_t k = 0; k < P; ++k)
      for (int j = 0; j < std::min(opts.tagged, sizes[k]); ++j) tagged[k].push_back(j);
    EventLog twins = simulate_limit_units(net, limit, streams, ages, tagged);
    auto net_times = times_by_unit(net, log);
    auto twin_times = times_by_unit(net, twins);
    double total = 0.0;
    std::size_t count = 0;
    const double T = std::min(net.horizon, limit.grid.back());
    for (std::size_t k = 0; k < P; ++k)
      for (int j : tagged[k]) {
        auto a = net_times[k][static_cast<std::size_t>(j)];
        a.erase(std::upper_bound(a.begin(), a.end(), T), a.end());
        total += static_cast<double>(noncommon_events(a, twin_times[k][static_cast<std::size_t>(j)]));
        ++count;
      }
    noncommon[task] = total / static_cast<double>(count);
  });

  for (std::size_t g = 0; g < opts.sizes.size(); ++g) {
    std::vector<double> d(dist.begin() + static_cast<std::ptrdiff_t>(g * R), dist.begin() + static_cast<std::ptrdiff_t>((g + 1) * R));
    std::vector<double> c(noncommon.begin() + static_cast<std::ptrdiff_t>(g * R),
                          noncommon.begin() + static_cast<std::ptrdiff_t>((g + 1) * R));
    auto md = mean_se(d), mc = mean_se(c);
    rep.rows.push_back({opts.sizes[g], md.mean, md.se, mc.mean, mc.se});
  }
  rep.distance_trend = true;
  rep.noncommon_trend = true;
  for (std::size_t i = 1; i < rep.rows.size(); ++i) {
    const auto& a = rep.rows[i - 1];
    const auto& b = rep.rows[i];
    if (b.sup_distance > a.sup_distance + 2.0 * std::hypot(a.sup_distance_se, b.sup_distance_se)) rep.distance_trend = false;
    if (b.noncommon > a.noncommon + 2.0 * std::hypot(a.noncommon_se, b.noncommon_se)) rep.noncommon_trend = false;
  }
  if (rep.rows.size() > 1 && !(rep.rows.back().noncommon < rep.rows.front().noncommon)) rep.noncommon_trend = false;
  return rep;
}

// ---------------------------------------------------------------- weights

double kernel_l1_gap(const KernelMatrix& a, const KernelMatrix& b, double T) {
  if (a.size() != b.size()) throw ConfigError("kernel gap: matrices differ in size");
  using GK = boost::math::quadrature::gauss_kronrod<double, 31>;
  double gap = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k)
    for (std::size_t l = 0; l < a.size(); ++l) {
      const auto& h = a.at(k, l);
      const auto& g = b.at(k, l);
      std::vector<double> cuts{0.0, T};
      for (double c : h.breakpoints()) cuts.push_back(c);
      for (double c : g.breakpoints()) cuts.push_back(c);
      if (auto e = h.as_erlang()) cuts.push_back(e->n / e->nu);
      std::sort(cuts.begin(), cuts.end());
      cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
      for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
        const double lo = cuts[i], hi = std::min(cuts[i + 1], T);
        if (lo >= T) break;
        if (!(hi > lo)) continue;
        gap += GK::integrate([&](double t) { return std::abs(h.eval(t) - g.eval(t)); }, lo, hi, 15, 1e-12);
      }
    }
  return gap;
}

WeightReport weight_approx_experiment(const NetworkConfig& cfg, const WeightOptions& opts) {
  if (opts.truncations.empty()) throw ConfigError("weights: empty truncation ladder");
  const auto P = cfg.populations.size();
  const std::size_t L = opts.truncations.size(), R = opts.replicates;
  std::vector<NetworkConfig> variants(L, cfg);
  WeightReport rep;
  rep.rows.resize(L);
  for (std::size_t i = 0; i < L; ++i) {
    for (auto& row : variants[i].kernels.entries)
      for (auto& k : row)
        if (!k.is_zero()) k = k.truncated(opts.truncations[i]);
    finalize(variants[i]);
    rep.rows[i].truncation = opts.truncations[i];
    rep.rows[i].l1_gap = kernel_l1_gap(cfg.kernels, variants[i].kernels, cfg.horizon);
  }
  const double units = static_cast<double>(cfg.total_units());
  std::vector<double> dist(L * R);
  parallel_for(R, opts.threads, [&](std::size_t r) {
    const std::uint64_t s = derive_key(opts.seed, {r});
    StreamSet base_streams(s, cfg);
    auto ages = sample_initial_ages(cfg, s);
    auto base = times_by_unit(cfg, simulate(cfg, base_streams, ages));
    for (std::size_t i = 0; i < L; ++i) {
      StreamSet streams(s, variants[i]);
      auto other = times_by_unit(variants[i], simulate(variants[i], streams, ages));
      double total = 0.0;
      for (std::size_t k = 0; k < P; ++k)
        for (std::size_t j = 0; j < base[k].size(); ++j) total += static_cast<double>(noncommon_events(base[k][j], other[k][j]));
      dist[i * R + r] = total / units;
    }
  });
  double rmin = std::numeric_limits<double>::infinity(), rmax = 0.0;
  for (std::size_t i = 0; i < L; ++i) {
    std::vector<double> d(dist.begin() + static_cast<std::ptrdiff_t>(i * R), dist.begin() + static_cast<std::ptrdiff_t>((i + 1) * R));
    auto ms = mean_se(d);
    auto& row = rep.rows[i];
    row.event_distance = ms.mean;
    row.event_distance_se = ms.se;
    if (row.l1_gap > 0.0) {
      row.ratio = row.event_distance / row.l1_gap;
      rmin = std::min(rmin, row.ratio);
      rmax = std::max(rmax, row.ratio);
    }
  }
  rep.c_hat = rmax;
  rep.stability = rmax > 0.0 ? rmax / rmin : std::numeric_limits<double>::infinity();
  // distance should grow with the gap, up to two combined standard errors
  std::vector<std::size_t> order(L);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return rep.rows[a].l1_gap < rep.rows[b].l1_gap; });
  rep.distance_monotone = true;
  for (std::size_t i = 1; i < L; ++i) {
    const auto& a = rep.rows[order[i - 1]];
    const auto& b = rep.rows[order[i]];
    if (b.event_distance + 2.0 * std::hypot(a.event_distance_se, b.event_distance_se) < a.event_distance)
      rep.distance_monotone = false;
  }
  return rep;
}

// ---------------------------------------------------------------- rescaling

double kolmogorov_tail(double lambda) {
  if (lambda <= 0.0) return 1.0;
  if (lambda < 0.2) return 1.0;
  double s = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    s += (k % 2 ? 1.0 : -1.0) * term;
    if (term < 1e-17) break;
  }
  return std::clamp(2.0 * s, 0.0, 1.0);
}

RescalingResult ks_exponential(std::vector<double> gaps) {
  if (gaps.size() < 100) throw UnsupportedError("rescaling test needs at least 100 events");
  std::sort(gaps.begin(), gaps.end());
  const double n = static_cast<double>(gaps.size());
  double d = 0.0;
  for (std::size_t i = 0; i < gaps.size(); ++i) {
    const double F = -std::expm1(-std::max(gaps[i], 0.0));
    d = std::max({d, static_cast<double>(i + 1) / n - F, F - static_cast<double>(i) / n});
  }
  RescalingResult r;
  r.ks_statistic = d;
  r.n = gaps.size();
  const double sn = std::sqrt(n);
  r.p_value = kolmogorov_tail((sn + 0.12 + 0.11 / sn) * d);
  return r;
}

std::vector<double> rescaled_gaps(const NetworkConfig& cfg, const EventLog& log, int population, int unit) {
  auto lam = compensator(cfg, log, population, unit);
  lam.pop_back();  // horizon entry
  std::vector<double> gaps;
  double prev = 0.0;
  for (double v : lam) {
    gaps.push_back(v - prev);
    prev = v;
  }
  return gaps;
}

RescalingResult rescaling_test(const NetworkConfig& cfg, const EventLog& log, int population, int unit) {
  return ks_exponential(rescaled_gaps(cfg, log, population, unit));
}

}  // namespace adh
