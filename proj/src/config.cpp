#include <fstream>
#include <set>
#include <sstream>

#include "adh/cli_io.hpp"
#include "adh/errors.hpp"
#include "json.hpp"

namespace adh::cli {

namespace {
using json = nlohmann::json;

// Strict object reader: tracks which keys were consumed and reports the rest.
class Obj {
 public:
  Obj(const json& j, std::string path, std::vector<std::string>& problems)
      : j_(j), path_(std::move(path)), problems_(problems) {
    ok_ = j.is_object();
    if (!ok_) fail("expected an object");
  }
  ~Obj() = default;

  bool ok() const { return ok_; }
  const std::string& path() const { return path_; }
  std::string at(const std::string& key) const { return path_ + "." + key; }

  void fail(const std::string& what) const { problems_.push_back(path_ + ": " + what); }
  void fail(const std::string& key, const std::string& what) const { problems_.push_back(at(key) + ": " + what); }

  const json* get(const std::string& key, bool required) {
    if (!ok_) return nullptr;
    used_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) {
      if (required) fail(key, "missing required key");
      return nullptr;
    }
    return &*it;
  }

  double number(const std::string& key, double fallback) {
    auto v = get(key, false);
    return v ? as_number(*v, at(key)).value_or(fallback) : fallback;
  }
  double number(const std::string& key) {
    auto v = get(key, true);
    return v ? as_number(*v, at(key)).value_or(0.0) : 0.0;
  }
  std::int64_t integer(const std::string& key, std::int64_t fallback, bool required = false) {
    auto v = get(key, required);
    if (!v) return fallback;
    if (!v->is_number_integer()) {
      fail(key, "expected an integer");
      return fallback;
    }
    return v->get<std::int64_t>();
  }
  bool boolean(const std::string& key, bool fallback) {
    auto v = get(key, false);
    if (!v) return fallback;
    if (!v->is_boolean()) {
      fail(key, "expected true or false");
      return fallback;
    }
    return v->get<bool>();
  }
  std::string string(const std::string& key, const std::string& fallback, bool required = false) {
    auto v = get(key, required);
    if (!v) return fallback;
    if (!v->is_string()) {
      fail(key, "expected a string");
      return fallback;
    }
    return v->get<std::string>();
  }
  std::vector<double> numbers(const std::string& key, bool required = true) {
    std::vector<double> out;
    auto v = get(key, required);
    if (!v) return out;
    if (!v->is_array()) {
      fail(key, "expected an array of numbers");
      return out;
    }
    for (std::size_t i = 0; i < v->size(); ++i)
      if (auto x = as_number((*v)[i], at(key) + "[" + std::to_string(i) + "]")) out.push_back(*x);
    return out;
  }

  /// reports keys that were never asked for
  void finish() const {
    if (!ok_) return;
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!used_.count(it.key())) problems_.push_back(at(it.key()) + ": unknown key");
  }

 private:
  std::optional<double> as_number(const json& v, const std::string& where) const {
    if (!v.is_number()) {
      problems_.push_back(where + ": expected a number");
      return std::nullopt;
    }
    return v.get<double>();
  }

  const json& j_;
  std::string path_;
  std::vector<std::string>& problems_;
  std::set<std::string> used_;
  bool ok_ = false;
};

// Runs a constructor that may throw ConfigError and files its message under `path`.
template <class F>
void guarded(std::vector<std::string>& problems, const std::string& path, F&& f) {
  try {
    f();
  } catch (const ConfigError& e) {
    problems.push_back(path + ": " + e.what());
  }
}

ScalarMap parse_scalar_map(const json& j, const std::string& path, std::vector<std::string>& problems) {
  Obj o(j, path, problems);
  ScalarMap m;
  const std::string kind = o.string("kind", "", true);
  if (kind == "constant") {
    m.kind = ScalarMap::Constant{o.number("value_per_time")};
  } else if (kind == "logistic") {
    ScalarMap::Logistic l;
    l.height = o.number("height_per_time");
    l.slope = o.number("slope", 1.0);
    l.midpoint = o.number("midpoint", 0.0);
    l.floor = o.number("floor_per_time", 0.0);
    m.kind = l;
  } else if (kind == "affine_clamped") {
    ScalarMap::AffineClamped a;
    a.intercept = o.number("intercept_per_time");
    a.slope = o.number("slope_per_time");
    a.lower = o.number("lower_per_time", 0.0);
    a.upper = o.number("upper_per_time", std::numeric_limits<double>::infinity());
    m.kind = a;
  } else if (kind == "exponential") {
    m.kind = ScalarMap::Exponential{o.number("scale_per_time"), o.number("rate", 1.0)};
  } else if (o.ok()) {
    o.fail("kind", "unknown map '" + kind + "' (constant, logistic, affine_clamped, exponential)");
  }
  o.finish();
  return m;
}

AgeMap parse_age_map(const json& j, const std::string& path, std::vector<std::string>& problems) {
  Obj o(j, path, problems);
  AgeMap g;
  const std::string kind = o.string("kind", "", true);
  if (kind == "constant") {
    g.kind = AgeMap::Constant{o.number("value", 1.0)};
  } else if (kind == "step") {
    g.kind = AgeMap::Step{o.number("threshold_time"), o.number("before", 0.0), o.number("after", 1.0)};
  } else if (kind == "recovery") {
    g.kind = AgeMap::Recovery{o.number("tau_time")};
  } else if (o.ok()) {
    o.fail("kind", "unknown age map '" + kind + "' (constant, step, recovery)");
  }
  o.finish();
  return g;
}

RateSpec parse_rate(const json& j, const std::string& path, std::vector<std::string>& problems) {
  Obj o(j, path, problems);
  RateSpec r;
  const std::string kind = o.string("kind", "", true);
  if (kind == "hard_refractory") {
    const double delta = o.number("delta_time");
    const double L = o.number("lipschitz_per_time");
    ScalarMap f;
    if (auto v = o.get("f", true)) f = parse_scalar_map(*v, o.at("f"), problems);
    guarded(problems, path, [&] { r = RateSpec::hard_refractory(f, delta, L); });
  } else if (kind == "product") {
    const double L = o.number("lipschitz_per_time");
    ScalarMap f;
    AgeMap g;
    if (auto v = o.get("f", true)) f = parse_scalar_map(*v, o.at("f"), problems);
    if (auto v = o.get("g", false)) g = parse_age_map(*v, o.at("g"), problems);
    const double K = o.number("postjump_bound_per_time", 0.0);
    const double window = o.number("postjump_window_time", 0.0);
    guarded(problems, path, [&] {
      r = RateSpec::product(f, g, L);
      if (K > 0.0 || window > 0.0) r.set_postjump(K, window);
    });
  } else if (o.ok()) {
    o.fail("kind", "unknown rate '" + kind + "' (hard_refractory, product)");
  }
  o.finish();
  return r;
}

KernelSpec parse_kernel(const json& j, const std::string& path, std::vector<std::string>& problems) {
  Obj o(j, path, problems);
  KernelSpec k;
  const std::string kind = o.string("kind", "", true);
  if (kind == "zero") {
    k = KernelSpec::zero();
  } else if (kind == "erlang") {
    const double b = o.number("b");
    const double nu = o.number("nu_per_time");
    const auto n = o.integer("n", 0);
    guarded(problems, path, [&] { k = KernelSpec::erlang(b, nu, static_cast<int>(n)); });
  } else if (kind == "piecewise") {
    auto grid = o.numbers("grid_time");
    auto values = o.numbers("values");
    guarded(problems, path, [&] { k = KernelSpec::piecewise(grid, values); });
  } else if (o.ok()) {
    o.fail("kind", "unknown kernel '" + kind + "' (zero, erlang, piecewise)");
  }
  if (auto v = o.get("truncation_time", false)) {
    if (!v->is_number())
      o.fail("truncation_time", "expected a number");
    else
      guarded(problems, o.at("truncation_time"), [&] { k = k.truncated(v->get<double>()); });
  }
  o.finish();
  return k;
}

InitialSignal parse_signal(const json& j, const std::string& path, std::vector<std::string>& problems) {
  Obj o(j, path, problems);
  InitialSignal s;
  const std::string kind = o.string("kind", "", true);
  if (kind == "zero") {
    s.kind = InitialSignal::Zero{};
  } else if (kind == "exponential") {
    s.kind = InitialSignal::Exponential{o.number("amplitude"), o.number("rate_per_time")};
  } else if (kind == "grid") {
    s.kind = InitialSignal::Grid{o.numbers("times_time"), o.numbers("values")};
  } else if (kind == "inherited") {
    InitialSignal::Inherited inh;
    if (auto v = o.get("points", true)) {
      if (!v->is_array()) {
        o.fail("points", "expected an array");
      } else {
        for (std::size_t i = 0; i < v->size(); ++i) {
          Obj p((*v)[i], o.at("points") + "[" + std::to_string(i) + "]", problems);
          InitialSignal::Inherited::Point pt;
          pt.population = static_cast<int>(p.integer("population", 0, true));
          pt.time = p.number("time_time");
          p.finish();
          inh.points.push_back(pt);
        }
      }
    }
    s.kind = std::move(inh);
  } else if (o.ok()) {
    o.fail("kind", "unknown initial signal '" + kind + "' (zero, exponential, grid, inherited)");
  }
  o.finish();
  return s;
}

AgeLaw parse_age_law(const json& j, const std::string& path, std::vector<std::string>& problems) {
  Obj o(j, path, problems);
  AgeLaw a;
  const std::string kind = o.string("kind", "", true);
  if (kind == "point_mass") {
    a.kind = AgeLaw::PointMass{o.number("age_time")};
  } else if (kind == "exponential") {
    a.kind = AgeLaw::Exponential{o.number("rate_per_time")};
  } else if (kind == "uniform") {
    a.kind = AgeLaw::Uniform{o.number("max_time")};
  } else if (kind == "empirical") {
    a.kind = AgeLaw::Empirical{o.numbers("ages_time")};
  } else if (o.ok()) {
    o.fail("kind", "unknown age law '" + kind + "' (point_mass, exponential, uniform, empirical)");
  }
  o.finish();
  return a;
}

Population parse_population(const json& j, const std::string& path, std::vector<std::string>& problems) {
  Obj o(j, path, problems);
  Population p;
  p.name = o.string("name", "");
  p.size = static_cast<int>(o.integer("size", 0, true));
  if (auto v = o.get("rate", true)) p.rate = parse_rate(*v, o.at("rate"), problems);
  if (auto v = o.get("initial_signal", false)) p.initial_signal = parse_signal(*v, o.at("initial_signal"), problems);
  if (auto v = o.get("initial_age", false)) p.initial_age = parse_age_law(*v, o.at("initial_age"), problems);
  o.finish();
  return p;
}

NetworkConfig parse_network(const json& j, const std::string& path, std::vector<std::string>& problems) {
  Obj o(j, path, problems);
  NetworkConfig cfg;
  cfg.horizon = o.number("horizon_time");
  const std::string mode = o.string("mode", "finite_network");
  if (mode == "finite_network")
    cfg.mode = InteractionMode::finite_network;
  else if (mode == "mean_field")
    cfg.mode = InteractionMode::mean_field;
  else
    o.fail("mode", "expected finite_network or mean_field");

  if (auto v = o.get("populations", true)) {
    if (!v->is_array() || v->empty())
      o.fail("populations", "expected a non-empty array");
    else
      for (std::size_t i = 0; i < v->size(); ++i)
        cfg.populations.push_back(parse_population((*v)[i], o.at("populations") + "[" + std::to_string(i) + "]", problems));
  }
  const std::size_t P = cfg.populations.size();
  if (auto v = o.get("kernels", true)) {
    if (!v->is_array() || v->size() != P) {
      o.fail("kernels", "expected a " + std::to_string(P) + "x" + std::to_string(P) + " array");
    } else {
      cfg.kernels.entries.resize(P);
      for (std::size_t k = 0; k < P; ++k) {
        const auto& row = (*v)[k];
        const std::string rp = o.at("kernels") + "[" + std::to_string(k) + "]";
        if (!row.is_array() || row.size() != P) {
          problems.push_back(rp + ": expected " + std::to_string(P) + " entries");
          cfg.kernels.entries[k].assign(P, KernelSpec::zero());
          continue;
        }
        for (std::size_t l = 0; l < P; ++l)
          cfg.kernels.entries[k].push_back(parse_kernel(row[l], rp + "[" + std::to_string(l) + "]", problems));
      }
    }
  }
  if (auto v = o.get("simulation", false)) {
    Obj s(*v, o.at("simulation"), problems);
    cfg.sim.window = s.number("window_time", 0.0);
    cfg.sim.strip_height = s.number("strip_height_per_time", 0.0);
    cfg.sim.prm_window = s.number("prm_window_time", 1.0);
    cfg.sim.x_scale = s.number("x_scale", 1.0);
    const auto me = s.integer("max_events", static_cast<std::int64_t>(cfg.sim.max_events));
    if (me < 1) s.fail("max_events", "must be positive");
    cfg.sim.max_events = static_cast<std::size_t>(std::max<std::int64_t>(me, 1));
    cfg.sim.dominating_initial_mass = s.number("dominating_initial_mass", 0.0);
    if (s.get("dominating_initial_age_time", false)) cfg.sim.dominating_initial_age = s.number("dominating_initial_age_time");
    s.finish();
  }
  o.finish();
  if (problems.empty()) {
    try {
      finalize(cfg);
    } catch (const ConfigError& e) {
      problems.push_back(path + ": " + e.what());
    }
  }
  return cfg;
}

std::size_t count(Obj& o, const std::string& key, std::size_t fallback) {
  const auto v = o.integer(key, static_cast<std::int64_t>(fallback));
  if (v < 0) {
    o.fail(key, "must be nonnegative");
    return fallback;
  }
  return static_cast<std::size_t>(v);
}
}  // namespace

RunConfig parse_config_text(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  std::vector<std::string> problems;
  RunConfig rc;
  Obj o(root, "$", problems);
  if (auto v = o.get("network", true)) rc.network = parse_network(*v, o.at("network"), problems);
  if (auto v = o.get("meanfield", false)) {
    Obj m(*v, o.at("meanfield"), problems);
    rc.meanfield.step = m.number("step_time", 0.0);
    rc.meanfield.particles = count(m, "particles", rc.meanfield.particles);
    rc.meanfield.tol = m.number("tol", rc.meanfield.tol);
    rc.meanfield.max_iter = static_cast<int>(m.integer("max_iter", rc.meanfield.max_iter));
    m.finish();
  }
  if (auto v = o.get("stationary", false)) {
    Obj s(*v, o.at("stationary"), problems);
    rc.stationary.epsilon = s.number("epsilon_per_time", rc.stationary.epsilon);
    rc.stationary.lambda_max = s.number("lambda_max_per_time", 0.0);
    rc.stationary.scan_points = count(s, "scan_points", rc.stationary.scan_points);
    rc.stationary.tol = s.number("tol", rc.stationary.tol);
    s.finish();
  }
  const std::size_t P = rc.network.populations.size();
  if (auto v = o.get("coupling", false)) {
    Obj c(*v, o.at("coupling"), problems);
    rc.coupling.replicates = count(c, "replicates", rc.coupling.replicates);
    rc.coupling.independent_age_draws = c.boolean("independent_age_draws", true);
    rc.coupling.initial_signals.resize(P);
    rc.coupling.initial_ages.resize(P);
    for (const char* key : {"initial_signals", "initial_ages"}) {
      auto arr = c.get(key, false);
      if (!arr) continue;
      if (!arr->is_array() || arr->size() != P) {
        c.fail(key, "expected one entry (or null) per population");
        continue;
      }
      for (std::size_t k = 0; k < P; ++k) {
        if ((*arr)[k].is_null()) continue;
        const std::string p = c.at(key) + "[" + std::to_string(k) + "]";
        if (std::string(key) == "initial_signals")
          rc.coupling.initial_signals[k] = parse_signal((*arr)[k], p, problems);
        else
          rc.coupling.initial_ages[k] = parse_age_law((*arr)[k], p, problems);
      }
    }
    c.finish();
  }
  if (auto v = o.get("experiments", false)) {
    Obj e(*v, o.at("experiments"), problems);
    if (e.get("chaos_sizes", false)) {
      rc.experiments.chaos_sizes.clear();
      for (double n : e.numbers("chaos_sizes")) {
        if (n != std::floor(n) || n < 1) e.fail("chaos_sizes", "sizes must be positive integers");
        rc.experiments.chaos_sizes.push_back(static_cast<int>(n));
      }
    }
    rc.experiments.chaos_replicates = count(e, "chaos_replicates", rc.experiments.chaos_replicates);
    rc.experiments.chaos_tagged = static_cast<int>(e.integer("chaos_tagged", 1));
    if (e.get("truncations_time", false)) rc.experiments.truncations = e.numbers("truncations_time");
    rc.experiments.weight_replicates = count(e, "weight_replicates", rc.experiments.weight_replicates);
    e.finish();
  }
  o.finish();
  if (!problems.empty()) throw ConfigError(problems);
  return rc;
}

RunConfig parse_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

NetworkConfig coupling_partner(const RunConfig& rc) {
  NetworkConfig out = rc.network;
  for (std::size_t k = 0; k < out.populations.size(); ++k) {
    if (k < rc.coupling.initial_signals.size() && rc.coupling.initial_signals[k])
      out.populations[k].initial_signal = *rc.coupling.initial_signals[k];
    if (k < rc.coupling.initial_ages.size() && rc.coupling.initial_ages[k])
      out.populations[k].initial_age = *rc.coupling.initial_ages[k];
  }
  finalize(out);
  return out;
}

}  // namespace adh::cli
