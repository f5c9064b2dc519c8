#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "adh/cascade.hpp"
#include "adh/kernels.hpp"
#include "adh/prm.hpp"
#include "adh/random.hpp"
#include "adh/rates.hpp"

namespace adh {

/// Signal R^k_t inherited from before time 0.
struct InitialSignal {
  struct Zero {};
  /// amplitude * exp(-rate t)
  struct Exponential { double amplitude = 0.0; double rate = 1.0; };
  /// Piecewise-linear through (times, values), zero outside [times.front(), times.back()].
  struct Grid { std::vector<double> times; std::vector<double> values; };
  /// Past jumps of a source population at times <= 0, fed through the kernels.
  struct Inherited {
    struct Point { int population = 0; double time = 0.0; };
    std::vector<Point> points;
  };
  using Kind = std::variant<Zero, Exponential, Grid, Inherited>;
  Kind kind = Zero{};

  bool is_zero() const;
  /// Value of the explicit part (Zero/Exponential/Grid). Inherited signals are
  /// routed through the kernels by the memory model and evaluate to 0 here.
  double explicit_value(double t) const;
  /// sup over (t0, t1] of |explicit_value|.
  double explicit_abs_bound(double t0, double t1) const;
  /// \int_0^T |explicit_value|, the integrability proxy.
  double explicit_l1(double T) const;
};

struct AgeLaw {
  struct PointMass { double age = 0.0; };
  struct Exponential { double rate = 1.0; };
  struct Uniform { double max = 1.0; };
  struct Empirical { std::vector<double> ages; };
  using Kind = std::variant<PointMass, Exponential, Uniform, Empirical>;
  Kind kind = PointMass{};

  double sample(SplitMix64& g) const;
  /// Density when the law is absolutely continuous.
  std::optional<double> density(double a) const;
  /// Atoms (age, weight) when the law is discrete.
  std::vector<std::pair<double, double>> atoms() const;
  /// P(A_0 >= a)
  double survival(double a) const;
};

struct Population {
  std::string name;
  int size = 1;
  RateSpec rate;
  InitialSignal initial_signal;
  AgeLaw initial_age;
};

enum class InteractionMode { finite_network, mean_field };

struct SimulationOptions {
  /// thinning lookahead width; 0 picks 0.1 min(1/nu, delta, 1)
  double window = 0.0;
  /// 0 picks 16 L (1 + x_scale)
  double strip_height = 0.0;
  double prm_window = 1.0;
  double x_scale = 1.0;
  std::size_t max_events = 10'000'000;
  /// stand-in for the pre-zero envelope mass of the dominating intensity
  double dominating_initial_mass = 0.0;
  /// initial age of the dominating process; unset uses the smallest network age
  std::optional<double> dominating_initial_age;
};

struct NetworkConfig {
  std::vector<Population> populations;
  KernelMatrix kernels;
  double horizon = 1.0;
  InteractionMode mode = InteractionMode::finite_network;
  SimulationOptions sim;

  int total_units() const;
  double interaction_scale() const;
  /// N_k / N
  double proportion(int k) const;
  double max_lipschitz() const;
  double thinning_window() const;
  PrmLayout prm_layout() const;
};

/// Checks the invariants and sets kernels.scale from the interaction mode.
void finalize(NetworkConfig& cfg);

struct Event {
  double time = 0.0;
  int population = 0;
  int unit = 0;
  friend bool operator==(const Event&, const Event&) = default;
};

struct PathState {
  double clock = 0.0;
  /// per population, per unit
  std::vector<std::vector<double>> age;
  std::vector<std::vector<double>> last_event;  // NaN when the unit never jumped
  /// per population memory X^k at clock-
  std::vector<double> memory;
};

struct SimStats {
  std::size_t candidates = 0;
  std::size_t accepted = 0;
  std::size_t windows = 0;
  /// candidates where psi exceeded L(1 + |X|)
  std::size_t sublinear_violations = 0;
};

struct EventLog {
  std::vector<Event> events;
  std::vector<std::vector<double>> initial_ages;
  PathState final_state;
  double horizon = 0.0;
  SimStats stats;
  /// Filled on request: per population, per unit, compensator at each own event.
  std::vector<std::vector<std::vector<double>>> compensator;

  std::vector<double> unit_times(int population, int unit) const;
  std::size_t count(int population, int unit) const;
};

struct CandidateRecord {
  double time = 0.0;
  int population = 0;
  int unit = 0;
  double mark = 0.0;
  double memory = 0.0;
  double intensity = 0.0;
  double majorant = 0.0;
  bool accepted = false;
};

struct SimulationHooks {
  std::vector<CandidateRecord>* audit = nullptr;
  bool record_compensator = false;
};

/// Per-unit PRM handles for one configuration; unit (k, j) uses key (k, j).
class StreamSet {
 public:
  StreamSet(std::uint64_t seed, const NetworkConfig& cfg);
  StreamSet(std::uint64_t seed, const std::vector<int>& sizes, PrmLayout layout);
  PrmStream& at(int population, int unit) { return streams_.at(population).at(unit); }
  std::uint64_t seed() const { return seed_; }
  const PrmLayout& layout() const { return layout_; }
  int populations() const { return static_cast<int>(streams_.size()); }
  int size(int population) const { return static_cast<int>(streams_.at(population).size()); }

 private:
  std::uint64_t seed_;
  PrmLayout layout_;
  std::vector<std::vector<PrmStream>> streams_;
};

/// Initial ages for every unit, drawn from counter-based streams keyed by
/// (seed, population, unit).
std::vector<std::vector<double>> sample_initial_ages(const NetworkConfig& cfg, std::uint64_t seed);
double sample_initial_age(const AgeLaw& law, std::uint64_t seed, int population, int unit);

/// Memory input seen by the thinning engine.
class MemorySource {
 public:
  virtual ~MemorySource() = default;
  /// X^k(t-) assuming no events between the last recorded event and t.
  virtual double value(int population, double t) const = 0;
  /// Bound on |X^k(s)| for s in (t0, t1] without new events.
  virtual double abs_bound(int population, double t0, double t1) const = 0;
  virtual void on_event(int population, double t) = 0;
};

/// Exact network memory: Erlang entries carry a cascade, other kernels scan
/// the event history up to their truncation horizon.
class NetworkMemory final : public MemorySource {
 public:
  explicit NetworkMemory(const NetworkConfig& cfg);
  double value(int population, double t) const override;
  double abs_bound(int population, double t0, double t1) const override;
  void on_event(int population, double t) override;

 private:
  struct Entry {
    bool active = false;
    bool use_cascade = false;
    CascadeState cascade;
    std::vector<double> initial_points;  // inherited times, history mode
  };
  const NetworkConfig* cfg_;
  double scale_;
  std::vector<std::vector<Entry>> entries_;
  std::vector<std::vector<double>> history_;  // per source population
};

/// Deterministic memory x^k on a uniform grid, linearly interpolated.
class FrozenMemory final : public MemorySource {
 public:
  FrozenMemory(double step, std::vector<std::vector<double>> values);
  double value(int population, double t) const override;
  double abs_bound(int population, double t0, double t1) const override;
  void on_event(int, double) override {}

 private:
  double step_;
  std::vector<std::vector<double>> values_;
};

struct ThinningUnit {
  int population = 0;
  int unit = 0;
  double initial_age = 0.0;
  const RateSpec* rate = nullptr;
  PrmStream* stream = nullptr;
};

/// Event-driven thinning of units sharing a memory source. The core used by
/// the network simulator and by limit-unit particles.
EventLog run_thinning(std::span<const ThinningUnit> units, MemorySource& memory, int populations,
                      double horizon, double window, std::size_t max_events, const SimulationHooks& hooks = {});

EventLog simulate(const NetworkConfig& cfg, StreamSet& streams, const SimulationHooks& hooks = {});
EventLog simulate(const NetworkConfig& cfg, StreamSet& streams, std::vector<std::vector<double>> initial_ages,
                  const SimulationHooks& hooks = {});

/// X^k(t-) recomputed from the log by direct summation.
double memory_bruteforce(const NetworkConfig& cfg, const EventLog& log, int population, double t);

struct IntensityRow {
  double time = 0.0;
  int population = 0;
  int unit = 0;
  double intensity = 0.0;
};

/// Left-limit intensity of every unit at every grid time, recomputed from the log.
std::vector<IntensityRow> intensity_trace(const NetworkConfig& cfg, const EventLog& log, std::span<const double> grid);

/// Compensator of one unit at each of its events and at the horizon (last entry).
std::vector<double> compensator(const NetworkConfig& cfg, const EventLog& log, int population, int unit);

struct DominatingLog {
  std::vector<Event> events;
  std::vector<double> intensity_at_events;
  double C = 0.0;
  double lattice_sum = 0.0;
  double initial_age = 0.0;
};

/// Total envelope sum_{i,j} h̄_ij(t) over all unit pairs.
double total_envelope(const NetworkConfig& cfg, double t);
/// sum_{k>=1} of total_envelope(k delta).
double total_lattice_sum(const NetworkConfig& cfg, double delta);

/// One-dimensional dominating process driven by the superposed unit streams.
DominatingLog simulate_dominating(const NetworkConfig& cfg, StreamSet& streams,
                                  const std::vector<std::vector<double>>& network_initial_ages);

struct BoundCheck {
  double lhs = 0.0;
  double rhs = 0.0;
  bool pass = false;
};

/// Intensity-history bound for the contribution of unit j's past jumps to
/// unit i's memory over the lag (t1, t2).
BoundCheck domination_bound_check(const NetworkConfig& cfg, const EventLog& log, StreamSet& streams, UnitKey i,
                                  UnitKey j, double t1, double t2, double initial_contribution = 0.0);

using WindowFunctional = std::function<double(std::span<const Event>)>;

/// (1/(T - T_w)) \int_{T_w}^T f(events in (s - T_w, s]) ds on a midpoint grid.
double time_average(const EventLog& log, const WindowFunctional& f, double window, double step = 0.0);

/// Helper: number of events in the window (optionally for one unit).
WindowFunctional count_functional(std::optional<UnitKey> unit = std::nullopt);

}  // namespace adh
