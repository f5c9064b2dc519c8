#include "adh/network.hpp"

#include <algorithm>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <queue>
#include <stdexcept>
#include <tuple>

#include "adh/errors.hpp"

namespace adh {

namespace {
template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::vector<double> inherited_times(const InitialSignal& sig, int source) {
  std::vector<double> out;
  if (auto inh = std::get_if<InitialSignal::Inherited>(&sig.kind))
    for (const auto& p : inh->points)
      if (p.population == source) out.push_back(p.time);
  return out;
}

double grid_value(const InitialSignal::Grid& g, double t) {
  if (g.times.empty() || t < g.times.front() || t > g.times.back()) return 0.0;
  auto it = std::upper_bound(g.times.begin(), g.times.end(), t);
  if (it == g.times.end()) return g.values.back();
  std::size_t i = static_cast<std::size_t>(it - g.times.begin());
  double t0 = g.times[i - 1], t1 = g.times[i];
  double w = (t - t0) / (t1 - t0);
  return g.values[i - 1] * (1.0 - w) + g.values[i] * w;
}
}  // namespace

// ---------------------------------------------------------------- signals

bool InitialSignal::is_zero() const {
  return std::visit(overloaded{
                        [](const Zero&) { return true; },
                        [](const Exponential& e) { return e.amplitude == 0.0; },
                        [](const Grid& g) {
                          return std::all_of(g.values.begin(), g.values.end(), [](double v) { return v == 0.0; });
                        },
                        [](const Inherited& i) { return i.points.empty(); },
                    },
                    kind);
}

double InitialSignal::explicit_value(double t) const {
  return std::visit(overloaded{
                        [](const Zero&) { return 0.0; },
                        [t](const Exponential& e) { return e.amplitude * std::exp(-e.rate * t); },
                        [t](const Grid& g) { return grid_value(g, t); },
                        [](const Inherited&) { return 0.0; },
                    },
                    kind);
}

double InitialSignal::explicit_abs_bound(double t0, double t1) const {
  return std::visit(overloaded{
                        [](const Zero&) { return 0.0; },
                        [&](const Exponential& e) {
                          return std::max(std::abs(e.amplitude * std::exp(-e.rate * t0)),
                                          std::abs(e.amplitude * std::exp(-e.rate * t1)));
                        },
                        [&](const Grid& g) {
                          double m = std::max(std::abs(grid_value(g, t0)), std::abs(grid_value(g, t1)));
                          for (std::size_t i = 0; i < g.times.size(); ++i)
                            if (g.times[i] >= t0 && g.times[i] <= t1) m = std::max(m, std::abs(g.values[i]));
                          return m;
                        },
                        [](const Inherited&) { return 0.0; },
                    },
                    kind);
}

double InitialSignal::explicit_l1(double T) const {
  return std::visit(overloaded{
                        [](const Zero&) { return 0.0; },
                        [T](const Exponential& e) {
                          if (e.rate == 0.0) return std::abs(e.amplitude) * T;
                          return std::abs(e.amplitude) * -std::expm1(-e.rate * T) / e.rate;
                        },
                        [T](const Grid& g) {
                          double s = 0.0;
                          for (std::size_t i = 0; i + 1 < g.times.size(); ++i) {
                            double a = g.times[i], b = std::min(g.times[i + 1], T);
                            if (b <= a) break;
                            double va = g.values[i], vb = grid_value(g, b);
                            if (va * vb >= 0.0) {
                              s += 0.5 * (std::abs(va) + std::abs(vb)) * (b - a);
                            } else {
                              double r = a + (b - a) * va / (va - vb);
                              s += 0.5 * (std::abs(va) * (r - a) + std::abs(vb) * (b - r));
                            }
                          }
                          return s;
                        },
                        [](const Inherited&) { return 0.0; },
                    },
                    kind);
}

// ---------------------------------------------------------------- age laws

double AgeLaw::sample(SplitMix64& g) const {
  return std::visit(overloaded{
                        [](const PointMass& p) { return p.age; },
                        [&g](const Exponential& e) { return -std::log(uniform_open0(g)) / e.rate; },
                        [&g](const Uniform& u) { return (1.0 - uniform_open0(g)) * u.max; },
                        [&g](const Empirical& e) {
                          auto n = e.ages.size();
                          auto i = static_cast<std::size_t>((1.0 - uniform_open0(g)) * static_cast<double>(n));
                          return e.ages[std::min(i, n - 1)];
                        },
                    },
                    kind);
}

std::optional<double> AgeLaw::density(double a) const {
  return std::visit(overloaded{
                        [](const PointMass&) -> std::optional<double> { return std::nullopt; },
                        [a](const Exponential& e) -> std::optional<double> {
                          return a < 0.0 ? 0.0 : e.rate * std::exp(-e.rate * a);
                        },
                        [a](const Uniform& u) -> std::optional<double> {
                          return (a >= 0.0 && a < u.max) ? 1.0 / u.max : 0.0;
                        },
                        [](const Empirical&) -> std::optional<double> { return std::nullopt; },
                    },
                    kind);
}

std::vector<std::pair<double, double>> AgeLaw::atoms() const {
  if (auto p = std::get_if<PointMass>(&kind)) return {{p->age, 1.0}};
  if (auto e = std::get_if<Empirical>(&kind)) {
    std::vector<std::pair<double, double>> out;
    const double w = 1.0 / static_cast<double>(e->ages.size());
    for (double a : e->ages) out.emplace_back(a, w);
    return out;
  }
  return {};
}

double AgeLaw::survival(double a) const {
  return std::visit(overloaded{
                        [a](const PointMass& p) { return p.age >= a ? 1.0 : 0.0; },
                        [a](const Exponential& e) { return a <= 0.0 ? 1.0 : std::exp(-e.rate * a); },
                        [a](const Uniform& u) { return std::clamp(1.0 - a / u.max, 0.0, 1.0); },
                        [a](const Empirical& e) {
                          auto c = std::count_if(e.ages.begin(), e.ages.end(), [a](double v) { return v >= a; });
                          return static_cast<double>(c) / static_cast<double>(e.ages.size());
                        },
                    },
                    kind);
}

// ---------------------------------------------------------------- config

int NetworkConfig::total_units() const {
  int n = 0;
  for (const auto& p : populations) n += p.size;
  return n;
}

double NetworkConfig::interaction_scale() const {
  return mode == InteractionMode::mean_field ? 1.0 / static_cast<double>(total_units()) : 1.0;
}

double NetworkConfig::proportion(int k) const {
  return static_cast<double>(populations.at(static_cast<std::size_t>(k)).size) / static_cast<double>(total_units());
}

double NetworkConfig::max_lipschitz() const {
  double L = 1.0;
  for (const auto& p : populations) L = std::max(L, p.rate.lipschitz_L());
  return L;
}

double NetworkConfig::thinning_window() const {
  if (sim.window > 0.0) return sim.window;
  double m = 1.0;
  for (const auto& row : kernels.entries)
    for (const auto& k : row)
      if (auto e = k.as_erlang(); e && e->b != 0.0) m = std::min(m, 1.0 / e->nu);
  for (const auto& p : populations)
    if (p.rate.silent_age() > 0.0) m = std::min(m, p.rate.silent_age());
  return 0.1 * m;
}

PrmLayout NetworkConfig::prm_layout() const {
  PrmLayout l;
  if (sim.strip_height > 0.0) l.strip_height = sim.strip_height;
  l.window_width = sim.prm_window;
  return l;
}

void finalize(NetworkConfig& cfg) {
  std::vector<std::string> problems;
  const auto P = cfg.populations.size();
  if (P == 0) problems.emplace_back("populations: at least one population is required");
  for (std::size_t k = 0; k < P; ++k) {
    const auto& pop = cfg.populations[k];
    const std::string where = "populations[" + std::to_string(k) + "]";
    if (pop.size < 1) problems.push_back(where + ".size: must be >= 1");
    if (auto inh = std::get_if<InitialSignal::Inherited>(&pop.initial_signal.kind)) {
      for (const auto& pt : inh->points) {
        if (pt.population < 0 || static_cast<std::size_t>(pt.population) >= P)
          problems.push_back(where + ".initial_signal: unknown source population");
        if (pt.time > 0.0) problems.push_back(where + ".initial_signal: inherited times must be <= 0");
      }
    }
    if (auto g = std::get_if<InitialSignal::Grid>(&pop.initial_signal.kind)) {
      if (g->times.size() != g->values.size() || g->times.size() < 2)
        problems.push_back(where + ".initial_signal: grid needs matching times/values with >= 2 points");
      else if (!std::is_sorted(g->times.begin(), g->times.end()) || g->times.front() < 0.0)
        problems.push_back(where + ".initial_signal: grid times must be sorted and >= 0");
    }
    std::visit(overloaded{
                   [&](const AgeLaw::PointMass& p) {
                     if (!(p.age >= 0.0) || !std::isfinite(p.age)) problems.push_back(where + ".initial_age: age must be >= 0");
                   },
                   [&](const AgeLaw::Exponential& e) {
                     if (!(e.rate > 0.0)) problems.push_back(where + ".initial_age: rate must be > 0");
                   },
                   [&](const AgeLaw::Uniform& u) {
                     if (!(u.max > 0.0)) problems.push_back(where + ".initial_age: max must be > 0");
                   },
                   [&](const AgeLaw::Empirical& e) {
                     if (e.ages.empty() || std::any_of(e.ages.begin(), e.ages.end(), [](double a) { return !(a >= 0.0); }))
                       problems.push_back(where + ".initial_age: empirical ages must be a nonempty list of values >= 0");
                   },
               },
               pop.initial_age.kind);
  }
  if (cfg.kernels.size() != P) {
    problems.emplace_back("kernels: matrix must be populations x populations");
  } else {
    for (std::size_t k = 0; k < P; ++k) {
      if (cfg.kernels.entries[k].size() != P) {
        problems.push_back("kernels[" + std::to_string(k) + "]: row has the wrong length");
        continue;
      }
      for (std::size_t l = 0; l < P; ++l)
        if (!cfg.kernels.entries[k][l].is_zero() && !integrability_check(cfg.kernels.entries[k][l]).pass)
          problems.push_back("kernels[" + std::to_string(k) + "][" + std::to_string(l) + "]: not integrable");
    }
  }
  if (!(cfg.horizon > 0.0) || !std::isfinite(cfg.horizon)) problems.emplace_back("horizon: must be finite and > 0");
  if (cfg.sim.window < 0.0) problems.emplace_back("simulation.window: must be >= 0");
  if (!(cfg.sim.prm_window > 0.0)) problems.emplace_back("simulation.prm_window: must be > 0");
  if (cfg.sim.max_events == 0) problems.emplace_back("simulation.max_events: must be > 0");
  if (!problems.empty()) throw ConfigError(problems);
  cfg.kernels.scale = cfg.interaction_scale();
}

// ---------------------------------------------------------------- log helpers

std::vector<double> EventLog::unit_times(int population, int unit) const {
  std::vector<double> out;
  for (const auto& e : events)
    if (e.population == population && e.unit == unit) out.push_back(e.time);
  return out;
}

std::size_t EventLog::count(int population, int unit) const {
  return static_cast<std::size_t>(std::count_if(events.begin(), events.end(), [&](const Event& e) {
    return e.population == population && e.unit == unit;
  }));
}

// ---------------------------------------------------------------- streams

StreamSet::StreamSet(std::uint64_t seed, const NetworkConfig& cfg) : seed_(seed), layout_(cfg.prm_layout()) {
  for (std::size_t k = 0; k < cfg.populations.size(); ++k) {
    streams_.emplace_back();
    for (int j = 0; j < cfg.populations[k].size; ++j)
      streams_.back().emplace_back(seed, UnitKey{static_cast<int>(k), j}, layout_);
  }
}

StreamSet::StreamSet(std::uint64_t seed, const std::vector<int>& sizes, PrmLayout layout)
    : seed_(seed), layout_(layout) {
  for (std::size_t k = 0; k < sizes.size(); ++k) {
    streams_.emplace_back();
    for (int j = 0; j < sizes[k]; ++j) streams_.back().emplace_back(seed, UnitKey{static_cast<int>(k), j}, layout_);
  }
}

double sample_initial_age(const AgeLaw& law, std::uint64_t seed, int population, int unit) {
  SplitMix64 g(derive_key(seed, {stream_tag::kInitialAge, static_cast<std::uint64_t>(population),
                                 static_cast<std::uint64_t>(unit)}));
  return law.sample(g);
}

std::vector<std::vector<double>> sample_initial_ages(const NetworkConfig& cfg, std::uint64_t seed) {
  std::vector<std::vector<double>> out(cfg.populations.size());
  for (std::size_t k = 0; k < cfg.populations.size(); ++k)
    for (int j = 0; j < cfg.populations[k].size; ++j)
      out[k].push_back(sample_initial_age(cfg.populations[k].initial_age, seed, static_cast<int>(k), j));
  return out;
}

// ---------------------------------------------------------------- memory

NetworkMemory::NetworkMemory(const NetworkConfig& cfg) : cfg_(&cfg), scale_(cfg.interaction_scale()) {
  const auto P = cfg.populations.size();
  entries_.resize(P);
  history_.resize(P);
  for (std::size_t k = 0; k < P; ++k) {
    entries_[k].resize(P);
    for (std::size_t l = 0; l < P; ++l) {
      const KernelSpec& ker = cfg.kernels.at(k, l);
      Entry& e = entries_[k][l];
      e.active = !ker.is_zero();
      if (!e.active) continue;
      auto times = inherited_times(cfg.populations[k].initial_signal, static_cast<int>(l));
      const Erlang* er = ker.as_erlang();
      e.use_cascade = er != nullptr && !ker.truncation_active();
      if (e.use_cascade)
        e.cascade = init_from_point_measure(times, er->n, er->nu, er->b * scale_);
      else
        e.initial_points = std::move(times);
    }
  }
}

double NetworkMemory::value(int population, double t) const {
  const auto k = static_cast<std::size_t>(population);
  double x = cfg_->populations[k].initial_signal.explicit_value(t);
  for (std::size_t l = 0; l < entries_[k].size(); ++l) {
    const Entry& e = entries_[k][l];
    if (!e.active) continue;
    if (e.use_cascade) {
      const double dt = t - e.cascade.last_update;
      if (dt < 0.0) throw std::logic_error("memory queried before its last update");
      double acc = 0.0, term = 1.0;
      for (std::size_t m = 0; m < e.cascade.coords.size(); ++m) {
        acc += term * e.cascade.coords[m];
        term *= dt / static_cast<double>(m + 1);
      }
      x += std::exp(-e.cascade.nu * dt) * acc;
      continue;
    }
    const KernelSpec& ker = cfg_->kernels.at(k, l);
    const double H = ker.truncation_horizon();
    const auto& hist = history_[l];
    double s = 0.0;
    for (auto it = std::lower_bound(hist.begin(), hist.end(), t); it != hist.begin();) {
      --it;
      if (t - *it > H) break;
      s += ker.eval(t - *it);
    }
    for (double tau : e.initial_points) s += ker.eval(t - tau);
    x += scale_ * s;
  }
  return x;
}

double NetworkMemory::abs_bound(int population, double t0, double t1) const {
  const auto k = static_cast<std::size_t>(population);
  double b = cfg_->populations[k].initial_signal.explicit_abs_bound(t0, t1);
  for (std::size_t l = 0; l < entries_[k].size(); ++l) {
    const Entry& e = entries_[k][l];
    if (!e.active) continue;
    if (e.use_cascade) {
      b += cascade_abs_bound(advance(e.cascade, t0 - e.cascade.last_update), t1 - t0);
      continue;
    }
    const KernelSpec& ker = cfg_->kernels.at(k, l);
    const double H = ker.truncation_horizon();
    const auto& hist = history_[l];
    double s = 0.0;
    for (auto it = std::upper_bound(hist.begin(), hist.end(), t0); it != hist.begin();) {
      --it;
      if (t0 - *it > H) break;
      s += ker.envelope(t0 - *it);
    }
    for (double tau : e.initial_points) s += ker.envelope(t0 - tau);
    b += scale_ * s;
  }
  return b;
}

void NetworkMemory::on_event(int population, double t) {
  const auto l = static_cast<std::size_t>(population);
  bool needs_history = false;
  for (std::size_t k = 0; k < entries_.size(); ++k) {
    Entry& e = entries_[k][l];
    if (!e.active) continue;
    if (e.use_cascade) {
      advance_in_place(e.cascade, t - e.cascade.last_update);
      e.cascade.last_update = t;  // avoid round-off drift past t
      e.cascade.coords.back() += e.cascade.b;
    } else {
      needs_history = true;
    }
  }
  if (needs_history) {
    auto& hist = history_[l];
    if (!hist.empty() && t < hist.back()) throw std::logic_error("memory events out of order");
    hist.push_back(t);
  }
}

FrozenMemory::FrozenMemory(double step, std::vector<std::vector<double>> values)
    : step_(step), values_(std::move(values)) {
  if (!(step_ > 0.0)) throw ConfigError("frozen memory: grid step must be positive");
  for (const auto& v : values_)
    if (v.empty()) throw ConfigError("frozen memory: empty trajectory");
}

double FrozenMemory::value(int population, double t) const {
  const auto& v = values_.at(static_cast<std::size_t>(population));
  double u = t / step_;
  if (u <= 0.0) return v.front();
  auto i = static_cast<std::size_t>(u);
  if (i + 1 >= v.size()) return v.back();
  double w = u - static_cast<double>(i);
  return v[i] * (1.0 - w) + v[i + 1] * w;
}

double FrozenMemory::abs_bound(int population, double t0, double t1) const {
  const auto& v = values_.at(static_cast<std::size_t>(population));
  double m = std::max(std::abs(value(population, t0)), std::abs(value(population, t1)));
  auto lo = static_cast<std::size_t>(std::max(0.0, std::ceil(t0 / step_)));
  for (std::size_t i = lo; i < v.size() && static_cast<double>(i) * step_ <= t1; ++i) m = std::max(m, std::abs(v[i]));
  return m;
}

// ---------------------------------------------------------------- thinning

namespace {
struct Candidate {
  double time;
  int population;
  int unit;
  std::size_t index;
  double mark;
  std::uint64_t version;
};

struct Later {
  bool operator()(const Candidate& a, const Candidate& b) const {
    return std::tie(a.time, a.population, a.unit) > std::tie(b.time, b.population, b.unit);
  }
};
}  // namespace

EventLog run_thinning(std::span<const ThinningUnit> units, MemorySource& memory, int populations, double horizon,
                      double window, std::size_t max_events, const SimulationHooks& hooks) {
  if (!(window > 0.0)) throw ConfigError("thinning window must be positive");
  EventLog log;
  log.horizon = horizon;
  const std::size_t n = units.size();
  const auto P = static_cast<std::size_t>(populations);
  std::vector<double> last(n, kNaN);
  std::vector<double> ceiling(n, 0.0);
  std::vector<std::uint64_t> version(n, 0);
  std::vector<double> xub(P, 0.0);
  std::vector<std::vector<std::size_t>> members(P);
  for (std::size_t i = 0; i < n; ++i) members.at(static_cast<std::size_t>(units[i].population)).push_back(i);

  auto age_at = [&](std::size_t i, double s) {
    return std::isnan(last[i]) ? units[i].initial_age + s : s - last[i];
  };
  auto silent_until = [&](std::size_t i) {
    const double sa = units[i].rate->silent_age();
    if (sa <= 0.0) return 0.0;
    return std::isnan(last[i]) ? std::max(0.0, sa - units[i].initial_age) : last[i] + sa;
  };

  std::priority_queue<Candidate, std::vector<Candidate>, Later> heap;
  double t = 0.0;
  double t_end = 0.0;
  auto requery = [&](std::size_t i, double from) {
    ++version[i];
    const double start = std::max(from, silent_until(i));
    if (start >= t_end || ceiling[i] <= 0.0) return;
    if (auto c = units[i].stream->first_after(start, t_end, ceiling[i]))
      heap.push({c->time, units[i].population, units[i].unit, i, c->mark, version[i]});
  };
  // Memory bound with headroom so that small bumps from new events do not
  // force a full re-query of every unit.
  auto refresh_bound = [&](std::size_t k, double from) {
    double b = memory.abs_bound(static_cast<int>(k), from, t_end);
    xub[k] = b * 1.25 + 1e-3;
    for (std::size_t i : members[k]) ceiling[i] = units[i].rate->window_majorant(xub[k]);
  };

  const double prm_w = n ? units[0].stream->layout().window_width : 1.0;
  std::int64_t prm_mark = 0;

  while (t < horizon) {
    t_end = std::min(t + window, horizon);
    ++log.stats.windows;
    heap = {};
    for (std::size_t k = 0; k < P; ++k)
      if (!members[k].empty()) refresh_bound(k, t);
    for (std::size_t i = 0; i < n; ++i) requery(i, t);

    while (!heap.empty()) {
      Candidate c = heap.top();
      heap.pop();
      if (c.version != version[c.index]) continue;
      const ThinningUnit& u = units[c.index];
      const double x = memory.value(u.population, c.time);
      const double lam = (*u.rate)(x, age_at(c.index, c.time));
      ++log.stats.candidates;
      if (lam > ceiling[c.index] * (1.0 + 1e-9))
        throw ModelError("intensity " + std::to_string(lam) + " exceeded the thinning majorant " +
                         std::to_string(ceiling[c.index]));
      if (lam > u.rate->lipschitz_L() * (1.0 + std::abs(x)) * (1.0 + 1e-12)) ++log.stats.sublinear_violations;
      const bool accept = c.mark <= lam;
      if (hooks.audit) hooks.audit->push_back({c.time, u.population, u.unit, c.mark, x, lam, ceiling[c.index], accept});
      if (!accept) {
        requery(c.index, c.time);
        continue;
      }
      log.events.push_back({c.time, u.population, u.unit});
      ++log.stats.accepted;
      if (log.events.size() > max_events)
        throw ModelError("explosion guard: more than " + std::to_string(max_events) + " events");
      last[c.index] = c.time;
      memory.on_event(u.population, c.time);
      t = c.time;
      for (std::size_t k = 0; k < P; ++k) {
        if (members[k].empty()) continue;
        double b = memory.abs_bound(static_cast<int>(k), t, t_end);
        if (b > xub[k]) {
          refresh_bound(k, t);
          for (std::size_t i : members[k]) requery(i, t);
        }
      }
      requery(c.index, t);
    }
    t = t_end;

    const auto mark = static_cast<std::int64_t>(std::floor(t / prm_w));
    if (mark > prm_mark) {
      prm_mark = mark;
      for (const auto& u : units) u.stream->forget_before(t);
    }
  }

  PathState& fs = log.final_state;
  fs.clock = horizon;
  fs.age.assign(P, {});
  fs.last_event.assign(P, {});
  fs.memory.assign(P, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    auto k = static_cast<std::size_t>(units[i].population);
    fs.age[k].push_back(age_at(i, horizon));
    fs.last_event[k].push_back(last[i]);
  }
  for (std::size_t k = 0; k < P; ++k) fs.memory[k] = memory.value(static_cast<int>(k), horizon);
  return log;
}

EventLog simulate(const NetworkConfig& cfg, StreamSet& streams, const SimulationHooks& hooks) {
  return simulate(cfg, streams, sample_initial_ages(cfg, streams.seed()), hooks);
}

EventLog simulate(const NetworkConfig& cfg, StreamSet& streams, std::vector<std::vector<double>> initial_ages,
                  const SimulationHooks& hooks) {
  const auto P = cfg.populations.size();
  if (initial_ages.size() != P) throw ConfigError("initial ages: one list per population is required");
  std::vector<ThinningUnit> units;
  for (std::size_t k = 0; k < P; ++k) {
    if (initial_ages[k].size() != static_cast<std::size_t>(cfg.populations[k].size))
      throw ConfigError("initial ages: list length must match the population size");
    for (int j = 0; j < cfg.populations[k].size; ++j)
      units.push_back({static_cast<int>(k), j, initial_ages[k][static_cast<std::size_t>(j)], &cfg.populations[k].rate,
                       &streams.at(static_cast<int>(k), j)});
  }
  NetworkMemory memory(cfg);
  EventLog log = run_thinning(units, memory, static_cast<int>(P), cfg.horizon, cfg.thinning_window(),
                              cfg.sim.max_events, hooks);
  log.initial_ages = std::move(initial_ages);
  if (hooks.record_compensator) {
    log.compensator.resize(P);
    for (std::size_t k = 0; k < P; ++k)
      for (int j = 0; j < cfg.populations[k].size; ++j)
        log.compensator[k].push_back(compensator(cfg, log, static_cast<int>(k), j));
  }
  return log;
}

// ---------------------------------------------------------------- oracles

double memory_bruteforce(const NetworkConfig& cfg, const EventLog& log, int population, double t) {
  const auto k = static_cast<std::size_t>(population);
  const double scale = cfg.interaction_scale();
  const InitialSignal& sig = cfg.populations[k].initial_signal;
  double x = sig.explicit_value(t);
  double s = 0.0;
  for (const auto& e : log.events) {
    if (e.time >= t) break;
    s += cfg.kernels.at(k, static_cast<std::size_t>(e.population)).eval(t - e.time);
  }
  if (auto inh = std::get_if<InitialSignal::Inherited>(&sig.kind))
    for (const auto& p : inh->points) s += cfg.kernels.at(k, static_cast<std::size_t>(p.population)).eval(t - p.time);
  return x + scale * s;
}

namespace {
double age_from_log(const std::vector<double>& times, double a0, double s) {
  auto it = std::lower_bound(times.begin(), times.end(), s);
  if (it == times.begin()) return a0 + s;
  return s - *(it - 1);
}
}  // namespace

std::vector<IntensityRow> intensity_trace(const NetworkConfig& cfg, const EventLog& log, std::span<const double> grid) {
  const auto P = cfg.populations.size();
  std::vector<std::vector<std::vector<double>>> times(P);
  for (std::size_t k = 0; k < P; ++k) times[k].resize(static_cast<std::size_t>(cfg.populations[k].size));
  for (const auto& e : log.events)
    times[static_cast<std::size_t>(e.population)][static_cast<std::size_t>(e.unit)].push_back(e.time);
  std::vector<IntensityRow> out;
  for (double s : grid) {
    if (s < 0.0 || s > log.horizon) throw std::domain_error("intensity grid outside [0, horizon]");
    for (std::size_t k = 0; k < P; ++k) {
      const double x = memory_bruteforce(cfg, log, static_cast<int>(k), s);
      for (int j = 0; j < cfg.populations[k].size; ++j) {
        const double a = age_from_log(times[k][static_cast<std::size_t>(j)], log.initial_ages[k][static_cast<std::size_t>(j)], s);
        out.push_back({s, static_cast<int>(k), j, cfg.populations[k].rate(x, a)});
      }
    }
  }
  return out;
}

std::vector<double> compensator(const NetworkConfig& cfg, const EventLog& log, int population, int unit) {
  const auto k = static_cast<std::size_t>(population);
  const RateSpec& rate = cfg.populations[k].rate;
  const double a0 = log.initial_ages.at(k).at(static_cast<std::size_t>(unit));
  const auto age_bps = rate.age_breakpoints();
  NetworkMemory memory(cfg);
  double last = kNaN;
  double cum = 0.0;
  std::vector<double> out;

  auto integrate_piece = [&](double a, double b) {
    if (!(b > a)) return 0.0;
    auto lam = [&](double s) {
      const double age = std::isnan(last) ? a0 + s : s - last;
      return rate(memory.value(population, s), std::max(age, 0.0));
    };
    return boost::math::quadrature::gauss_kronrod<double, 31>::integrate(lam, a, b, 12, 1e-12);
  };
  auto integrate = [&](double a, double b) {
    std::vector<double> cuts{a};
    for (double bp : age_bps) {
      const double c = std::isnan(last) ? bp - a0 : last + bp;
      if (c > a && c < b) cuts.push_back(c);
    }
    cuts.push_back(b);
    std::sort(cuts.begin(), cuts.end());
    double s = 0.0;
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) s += integrate_piece(cuts[i], cuts[i + 1]);
    return s;
  };

  double prev = 0.0;
  for (const auto& e : log.events) {
    cum += integrate(prev, e.time);
    prev = e.time;
    memory.on_event(e.population, e.time);
    if (e.population == population && e.unit == unit) {
      out.push_back(cum);
      last = e.time;
    }
  }
  cum += integrate(prev, log.horizon);
  out.push_back(cum);
  return out;
}

// ---------------------------------------------------------------- domination

double total_envelope(const NetworkConfig& cfg, double t) {
  const double scale = cfg.interaction_scale();
  double s = 0.0;
  for (std::size_t k = 0; k < cfg.populations.size(); ++k)
    for (std::size_t l = 0; l < cfg.populations.size(); ++l) {
      const auto& ker = cfg.kernels.at(k, l);
      if (ker.is_zero()) continue;
      s += static_cast<double>(cfg.populations[k].size) * cfg.populations[l].size * scale * ker.envelope(t);
    }
  return s;
}

double total_lattice_sum(const NetworkConfig& cfg, double delta) {
  const double scale = cfg.interaction_scale();
  double s = 0.0;
  for (std::size_t k = 0; k < cfg.populations.size(); ++k)
    for (std::size_t l = 0; l < cfg.populations.size(); ++l) {
      const auto& ker = cfg.kernels.at(k, l);
      if (ker.is_zero()) continue;
      s += static_cast<double>(cfg.populations[k].size) * cfg.populations[l].size * scale *
           ker.envelope_lattice_sum(delta);
    }
  return s;
}

DominatingLog simulate_dominating(const NetworkConfig& cfg, StreamSet& streams,
                                  const std::vector<std::vector<double>>& network_initial_ages) {
  DominatingLog out;
  double delta = std::numeric_limits<double>::infinity();
  double K = 0.0;
  const double L = cfg.max_lipschitz();
  for (const auto& p : cfg.populations) {
    delta = std::min(delta, p.rate.postjump_window());
    K = std::max(K, p.rate.postjump_bound_K());
  }
  const bool interacting = !cfg.kernels.all_zero();
  if (interacting && !(delta > 0.0))
    throw UnsupportedError("dominating process needs a positive post-jump window");
  out.lattice_sum = interacting ? total_lattice_sum(cfg, delta) : 0.0;
  if (!std::isfinite(out.lattice_sum)) throw UnsupportedError("envelope lattice sum diverges");
  out.C = std::max(1.0 + out.lattice_sum, K);

  double a_hat = std::numeric_limits<double>::infinity();
  for (const auto& row : network_initial_ages)
    for (double a : row) a_hat = std::min(a_hat, a);
  if (cfg.sim.dominating_initial_age) a_hat = *cfg.sim.dominating_initial_age;
  if (!std::isfinite(a_hat)) a_hat = 0.0;
  out.initial_age = a_hat;

  double last_hat = -a_hat;
  std::vector<double> pi_nk;
  double max_h = 0.0;
  for (const auto& row : cfg.kernels.entries)
    for (const auto& k : row)
      if (!k.is_zero()) max_h = std::max(max_h, k.truncation_horizon());

  const double base = cfg.sim.dominating_initial_mass + out.C;
  // inclusive = true gives the right limit at s (points at s count)
  auto lambda_hat = [&](double s, bool inclusive) {
    double v = base;
    if (interacting) {
      for (auto it = pi_nk.rbegin(); it != pi_nk.rend(); ++it) {
        if (*it > s || (!inclusive && *it == s)) continue;
        if (s - *it > max_h) break;
        v += total_envelope(cfg, s - *it);
      }
      v += total_envelope(cfg, std::max(s - last_hat, 0.0));
    }
    return L * v;
  };

  struct Unit {
    PrmStream* stream;
    int population;
    int unit;
  };
  std::vector<Unit> all;
  for (int k = 0; k < streams.populations(); ++k)
    for (int j = 0; j < streams.size(k); ++j) all.push_back({&streams.at(k, j), k, j});
  const std::size_t n = all.size();
  std::vector<std::uint64_t> version(n, 0);
  std::priority_queue<Candidate, std::vector<Candidate>, Later> heap;
  const double window = cfg.thinning_window();
  double t = 0.0, t_end = 0.0, ceiling = 0.0;
  auto query = [&](std::size_t i, double from) {
    ++version[i];
    if (auto c = all[i].stream->first_after(from, t_end, ceiling))
      heap.push({c->time, all[i].population, all[i].unit, i, c->mark, version[i]});
  };
  auto restart = [&]() {
    heap = {};
    ceiling = lambda_hat(t, true);
    for (std::size_t i = 0; i < n; ++i) query(i, t);
  };

  while (t < cfg.horizon) {
    t_end = std::min(t + window, cfg.horizon);
    restart();
    while (!heap.empty()) {
      Candidate c = heap.top();
      heap.pop();
      if (c.version != version[c.index]) continue;
      const double lam = lambda_hat(c.time, false);
      if (c.mark <= lam) {
        out.events.push_back({c.time, c.population, c.unit});
        out.intensity_at_events.push_back(lam);
        if (out.events.size() > cfg.sim.max_events) throw ModelError("explosion guard in dominating process");
        last_hat = c.time;
        if (c.mark <= K) pi_nk.push_back(c.time);
        t = c.time;
        restart();
      } else {
        query(c.index, c.time);
      }
    }
    t = t_end;
  }
  return out;
}

BoundCheck domination_bound_check(const NetworkConfig& cfg, const EventLog& log, StreamSet& streams, UnitKey i,
                                  UnitKey j, double t1, double t2, double initial_contribution) {
  if (!(t1 <= t2) || t1 < 0.0 || t2 > log.horizon) throw std::domain_error("bound check needs 0 <= t1 <= t2 <= T");
  const auto ki = static_cast<std::size_t>(i.population);
  const auto lj = static_cast<std::size_t>(j.population);
  const KernelSpec& ker = cfg.kernels.at(ki, lj);
  const double scale = cfg.interaction_scale();
  const RateSpec& rate = cfg.populations[lj].rate;
  const double delta = rate.postjump_window();
  const double K = rate.postjump_bound_K();

  BoundCheck r;
  const auto times = log.unit_times(j.population, j.unit);
  double y = 0.0;
  for (double tau : times)
    if (tau < t1) y += ker.eval(t2 - tau);
  r.lhs = std::abs(scale * y);

  const double a0 = log.initial_ages.at(lj).at(static_cast<std::size_t>(j.unit));
  double age = a0 + t1;
  for (double tau : times)
    if (tau <= t1) age = t1 - tau;

  if (ker.is_zero()) {
    r.rhs = initial_contribution;
  } else {
    if (!(delta > 0.0)) throw UnsupportedError("bound check needs a positive post-jump window");
    double rhs = ker.envelope_lattice_sum(delta, t2 - t1 + age, 0);
    if (K > 0.0 && t1 - age > 0.0)
      for (double s : streams.at(j.population, j.unit).truncated_events(0.0, t1 - age, K)) rhs += ker.envelope(t2 - s);
    r.rhs = scale * rhs + initial_contribution;
  }
  r.pass = r.lhs <= r.rhs + 1e-9;
  return r;
}

// ---------------------------------------------------------------- ergodic averages

double time_average(const EventLog& log, const WindowFunctional& f, double window, double step) {
  const double T = log.horizon;
  if (!(window > 0.0) || window > T) throw ConfigError("time_average: window must lie in (0, horizon]");
  if (window == T) return f(std::span<const Event>(log.events));
  if (!(step > 0.0)) step = window / 20.0;
  const auto m = static_cast<std::size_t>(std::max(1.0, std::ceil((T - window) / step)));
  const double h = (T - window) / static_cast<double>(m);
  double acc = 0.0;
  for (std::size_t q = 0; q < m; ++q) {
    const double s = window + (static_cast<double>(q) + 0.5) * h;
    // events in (s - window, s]
    auto lo = std::upper_bound(log.events.begin(), log.events.end(), s - window,
                               [](double v, const Event& e) { return v < e.time; });
    auto hi = std::upper_bound(log.events.begin(), log.events.end(), s,
                               [](double v, const Event& e) { return v < e.time; });
    acc += f(std::span<const Event>(log.events.data() + (lo - log.events.begin()), static_cast<std::size_t>(hi - lo)));
  }
  return acc / static_cast<double>(m);
}

WindowFunctional count_functional(std::optional<UnitKey> unit) {
  return [unit](std::span<const Event> ev) {
    if (!unit) return static_cast<double>(ev.size());
    return static_cast<double>(std::count_if(ev.begin(), ev.end(), [&](const Event& e) {
      return e.population == unit->population && e.unit == unit->unit;
    }));
  };
}

}  // namespace adh
