#include <algorithm>
#include <chrono>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "CLI11.hpp"
#include "adh/cli_io.hpp"
#include "adh/errors.hpp"

namespace adh::cli {

namespace {

struct Globals {
  std::uint64_t seed = 1;
  int threads = 1;
  std::string out_dir = ".";
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Collects outputs and writes <out>.manifest.json next to the main CSV.
class Run {
 public:
  Run(std::string sub, const Globals& g, const std::string& config_path)
      : g_(g), start_(std::chrono::steady_clock::now()) {
    const std::string text = read_file(config_path);
    cfg_ = parse_config_text(text);
    m_.subcommand = std::move(sub);
    m_.config_sha256 = sha256_hex(text);
    m_.seed = g.seed;
    m_.threads = g.threads;
  }
  RunConfig& cfg() { return cfg_; }
  std::filesystem::path path(const std::string& name) const { return std::filesystem::path(g_.out_dir) / name; }
  void emit(const CsvTable& t, const std::string& name) {
    m_.outputs[name] = emit_csv(t, path(name));
    if (main_.empty()) main_ = name;
  }
  void finish() {
    m_.wall_clock_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    auto stem = std::filesystem::path(main_.empty() ? m_.subcommand : main_).stem().string();
    std::ofstream out(path(stem + ".manifest.json"), std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write manifest");
    out << m_.to_json();
  }

 private:
  const Globals& g_;
  std::chrono::steady_clock::time_point start_;
  RunConfig cfg_;
  RunManifest m_;
  std::string main_;
};

std::vector<double> parse_list(const std::string& s, const char* what) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ConfigError(std::string("--") + what + ": cannot parse '" + item + "'");
    }
  }
  if (out.empty()) throw ConfigError(std::string("--") + what + ": empty list");
  return out;
}

std::vector<double> parse_sweep(const std::string& s) {
  // a:b:n, n points including both ends
  std::stringstream ss(s);
  std::string a, b, n;
  if (!std::getline(ss, a, ':') || !std::getline(ss, b, ':') || !std::getline(ss, n))
    throw ConfigError("--sweep-delta expects a:b:n");
  double lo, hi;
  long cnt;
  try {
    lo = std::stod(a);
    hi = std::stod(b);
    cnt = std::stol(n);
  } catch (const std::exception&) {
    throw ConfigError("--sweep-delta expects a:b:n");
  }
  if (cnt < 2 || !(lo > 0.0) || !(hi > lo)) throw ConfigError("--sweep-delta needs 0 < a < b and n >= 2");
  std::vector<double> out(static_cast<std::size_t>(cnt));
  for (long i = 0; i < cnt; ++i) out[static_cast<std::size_t>(i)] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(cnt - 1);
  return out;
}

void cmd_simulate(const Globals& g, const std::string& config, const std::string& out, const std::string& trace,
                  double trace_step) {
  Run run("simulate", g, config);
  const auto& cfg = run.cfg().network;
  StreamSet streams(g.seed, cfg);
  auto log = simulate(cfg, streams);
  CsvTable t({"time", "population", "unit"});
  for (const auto& e : log.events) t.add(e.time).add(e.population).add(e.unit).end_row();
  run.emit(t, out);
  if (!trace.empty()) {
    const double step = trace_step > 0.0 ? trace_step : cfg.horizon / 1000.0;
    std::vector<double> grid;
    for (double s = 0.0; s <= cfg.horizon; s += step) grid.push_back(s);
    CsvTable tr({"time", "population", "unit", "intensity"});
    for (const auto& r : intensity_trace(cfg, log, grid)) tr.add(r.time).add(r.population).add(r.unit).add(r.intensity).end_row();
    run.emit(tr, trace);
  }
  run.finish();
  std::cout << "events " << log.events.size() << ", candidates " << log.stats.candidates << ", sublinear violations "
            << log.stats.sublinear_violations << "\n";
}

void cmd_meanfield(const Globals& g, const std::string& config, const std::string& method, const std::string& out) {
  Run run("meanfield", g, config);
  auto& rc = run.cfg();
  MeanFieldSolution sol;
  if (method == "picard-mc") {
    auto opts = rc.meanfield;
    opts.seed = g.seed;
    opts.threads = g.threads;
    sol = solve_picard_mc(rc.network, opts);
  } else if (method == "dde") {
    sol = solve_hard_refractory_dde(rc.network, rc.meanfield.step);
  } else {
    throw ConfigError("--method must be picard-mc or dde");
  }
  CsvTable t({"time", "population", "phi", "x", "lambda_bar", "p"});
  for (std::size_t k = 0; k < sol.populations.size(); ++k) {
    const auto& p = sol.populations[k];
    for (std::size_t j = 0; j < sol.grid.size(); ++j)
      t.add(sol.grid[j]).add(k).add(p.phi[j]).add(p.x[j]).add(p.lambda_bar[j]).add(p.p[j]).end_row();
  }
  run.emit(t, out);
  run.finish();
  std::cout << sol.method << ": step " << sol.step << ", iterations " << sol.iterations << "\n";
}

void cmd_stationary(const Globals& g, const std::string& config, const std::string& sweep, const std::string& out,
                    const std::string& density_out, double age_max) {
  Run run("stationary", g, config);
  auto& rc = run.cfg();
  const auto& cfg = rc.network;
  if (cfg.populations.size() != 1) throw UnsupportedError("stationary analysis handles a single population");
  const RateSpec& rate = cfg.populations[0].rate;
  const double H = cfg.kernels.at(0, 0).total_integral();
  if (!sweep.empty()) {
    auto rep = delta_sweep(rate, H, parse_sweep(sweep), rc.stationary, g.threads);
    CsvTable t({"delta", "lambda_bar", "roots"});
    for (const auto& r : rep.rows)
      t.add(r.delta).add(r.lambda_bar.value_or(std::numeric_limits<double>::quiet_NaN())).add(r.roots).end_row();
    run.emit(t, out);
    std::cout << "all unique " << rep.all_unique << ", decreasing " << rep.strictly_decreasing << ", increasing "
              << rep.strictly_increasing << "\n";
  } else {
    auto rep = solve_fixed_point(rate, H, rc.stationary);
    CsvTable t({"root", "lambda_bar", "x_star", "kappa", "residual"});
    for (std::size_t i = 0; i < rep.roots.size(); ++i) {
      const auto& r = rep.roots[i];
      t.add(i).add(r.lambda_bar).add(r.x_star).add(r.kappa).add(r.residual).end_row();
    }
    run.emit(t, out);
    if (!rep.note.empty()) std::cerr << "note: " << rep.note << "\n";
    if (!density_out.empty()) {
      if (!rep.unique()) throw UnsupportedError("age density needs a unique fixed point");
      auto dens = stationary_age_density(rate, rep.roots[0].x_star);
      CsvTable d({"age", "density"});
      const int n = 1000;
      for (int i = 0; i <= n; ++i) {
        const double a = age_max * i / n;
        d.add(a).add(dens(a)).end_row();
      }
      run.emit(d, density_out);
    }
    std::cout << rep.roots.size() << " fixed point(s)\n";
  }
  run.finish();
}

void cmd_couple(const Globals& g, const std::string& config, long replicates, const std::string& out) {
  Run run("couple", g, config);
  auto& rc = run.cfg();
  CouplingSetup setup{rc.network, coupling_partner(rc), rc.coupling.independent_age_draws};
  const std::size_t R = replicates > 0 ? static_cast<std::size_t>(replicates) : rc.coupling.replicates;
  auto rep = coupling_experiment(setup, g.seed, R, g.threads);
  CsvTable t({"seed", "coupled", "coupling_time", "events_first", "events_second"});
  for (const auto& r : rep.rows) t.add(r.seed).add(r.coupled).add(r.coupling_time).add(r.events_first).add(r.events_second).end_row();
  run.emit(t, out);
  run.finish();
  std::cout << "fraction coupled " << rep.fraction_coupled << "\n";
}

void cmd_chaos(const Globals& g, const std::string& config, const std::string& sizes, long replicates,
               const std::string& out) {
  Run run("chaos", g, config);
  auto& rc = run.cfg();
  ChaosOptions o;
  o.sizes = rc.experiments.chaos_sizes;
  if (!sizes.empty()) {
    o.sizes.clear();
    for (double n : parse_list(sizes, "N")) {
      if (n < 1 || n != std::floor(n)) throw ConfigError("--N: sizes must be positive integers");
      o.sizes.push_back(static_cast<int>(n));
    }
  }
  o.replicates = replicates > 0 ? static_cast<std::size_t>(replicates) : rc.experiments.chaos_replicates;
  o.tagged = rc.experiments.chaos_tagged;
  o.limit = rc.meanfield;
  o.limit.seed = g.seed;
  o.limit.threads = g.threads;
  o.threads = g.threads;
  o.seed = g.seed;
  auto rep = chaos_experiment(rc.network, o);
  CsvTable t({"N", "sup_distance", "sup_distance_se", "noncommon", "noncommon_se"});
  for (const auto& r : rep.rows) t.add(r.N).add(r.sup_distance).add(r.sup_distance_se).add(r.noncommon).add(r.noncommon_se).end_row();
  run.emit(t, out);
  run.finish();
  std::cout << "distance trend " << rep.distance_trend << ", non-common trend " << rep.noncommon_trend << "\n";
}

void cmd_weights(const Globals& g, const std::string& config, const std::string& truncations, long replicates,
                 const std::string& out) {
  Run run("weights", g, config);
  auto& rc = run.cfg();
  WeightOptions o;
  o.truncations = truncations.empty() ? rc.experiments.truncations : parse_list(truncations, "truncations");
  o.replicates = replicates > 0 ? static_cast<std::size_t>(replicates) : rc.experiments.weight_replicates;
  o.threads = g.threads;
  o.seed = g.seed;
  auto rep = weight_approx_experiment(rc.network, o);
  CsvTable t({"truncation", "l1_gap", "event_distance", "event_distance_se", "ratio"});
  for (const auto& r : rep.rows) t.add(r.truncation).add(r.l1_gap).add(r.event_distance).add(r.event_distance_se).add(r.ratio).end_row();
  run.emit(t, out);
  run.finish();
  std::cout << "c_hat " << rep.c_hat << ", stability " << rep.stability << ", monotone " << rep.distance_monotone << "\n";
}

void cmd_diagnose(const Globals& g, const std::string& config, const std::string& test, const std::string& out) {
  Run run("diagnose", g, config);
  const auto& cfg = run.cfg().network;
  StreamSet streams(g.seed, cfg);
  auto ages = sample_initial_ages(cfg, g.seed);
  auto log = simulate(cfg, streams, ages);
  if (test == "rescaling") {
    CsvTable t({"population", "unit", "n", "ks_statistic", "p_value"});
    std::size_t tested = 0;
    for (std::size_t k = 0; k < cfg.populations.size(); ++k)
      for (int j = 0; j < cfg.populations[k].size; ++j) {
        const auto gaps = rescaled_gaps(cfg, log, static_cast<int>(k), j);
        if (gaps.size() < 100) continue;
        auto r = ks_exponential(gaps);
        t.add(k).add(j).add(r.n).add(r.ks_statistic).add(r.p_value).end_row();
        ++tested;
      }
    run.emit(t, out);
    std::cout << tested << " unit(s) with at least 100 events tested\n";
  } else if (test == "domination") {
    auto dom = simulate_dominating(cfg, streams, ages);
    std::vector<double> times;
    for (const auto& e : dom.events) times.push_back(e.time);
    std::sort(times.begin(), times.end());
    std::size_t missing = 0;
    for (const auto& e : log.events)
      if (!std::binary_search(times.begin(), times.end(), e.time)) ++missing;
    CsvTable t({"check", "violations", "total"});
    t.add(std::string("sublinear_growth")).add(log.stats.sublinear_violations).add(log.stats.candidates).end_row();
    t.add(std::string("dominated_events")).add(missing).add(log.events.size()).end_row();
    run.emit(t, out);
    std::cout << "sublinear violations " << log.stats.sublinear_violations << ", undominated events " << missing << "\n";
  } else {
    throw ConfigError("--test must be rescaling or domination");
  }
  run.finish();
}

int cmd_validate(const Globals& g, const std::string& config, std::size_t samples, const std::string& out) {
  Run run("validate", g, config);
  const auto& cfg = run.cfg().network;
  CsvTable t({"population", "check", "worst_margin", "samples", "pass"});
  bool all = true;
  for (std::size_t k = 0; k < cfg.populations.size(); ++k) {
    ValidationRanges ranges;
    ranges.seed = g.seed;
    auto rep = validate(cfg.populations[k].rate, samples, ranges);
    for (const CheckMargin* c : {&rep.nonnegative, &rep.postjump_bound, &rep.doeblin, &rep.lipschitz, &rep.sublinear})
      t.add(k).add(c->name).add(c->worst_margin).add(c->samples).add(c->pass).end_row();
    all = all && rep.pass();
  }
  run.emit(t, out);
  run.finish();
  std::cout << "config ok: " << cfg.populations.size() << " population(s), " << cfg.total_units() << " unit(s); rate audit "
            << (all ? "passed" : "FAILED") << "\n";
  return all ? 0 : 3;
}

}  // namespace

int run(int argc, char** argv) {
  CLI::App app{"Exact simulation and mean-field analysis of age dependent Hawkes networks"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--seed", g.seed, "master seed")->capture_default_str();
  app.add_option("--threads", g.threads, "worker threads")->check(CLI::PositiveNumber)->capture_default_str();
  app.add_option("--out-dir", g.out_dir, "directory for outputs")->capture_default_str();

  std::string config, trace, method = "picard-mc", sweep, density_out, sizes, truncations, test;
  double trace_step = 0.0, age_max = 10.0;
  long replicates = 0;
  std::size_t samples = 10000;
  std::map<std::string, std::string> outs;
  auto need_config = [&](CLI::App* s) { s->add_option("--config", config, "JSON config file")->required(); };
  auto out_opt = [&](CLI::App* s, const std::string& def, const std::string& help) {
    s->add_option("--out", outs[s->get_name()], help)->default_val(def);
  };

  auto* sim = app.add_subcommand("simulate", "simulate a network and write its event log");
  need_config(sim);
  out_opt(sim, "events.csv", "events CSV");
  sim->add_option("--trace", trace, "optional intensity trace CSV");
  sim->add_option("--trace-step", trace_step, "trace grid step (default horizon/1000)");

  auto* mf = app.add_subcommand("meanfield", "solve the mean-field limit");
  need_config(mf);
  mf->add_option("--method", method)->check(CLI::IsMember({"picard-mc", "dde"}))->capture_default_str();
  out_opt(mf, "meanfield.csv", "solution CSV");

  auto* st = app.add_subcommand("stationary", "stationary fixed points and delta sweeps");
  need_config(st);
  st->add_option("--sweep-delta", sweep, "a:b:n grid of refractory lengths");
  out_opt(st, "stationary.csv", "result CSV");
  st->add_option("--age-density", density_out, "optional stationary age density CSV");
  st->add_option("--age-max", age_max, "largest age in the density table")->capture_default_str();

  auto* cp = app.add_subcommand("couple", "coupling experiment on shared streams");
  need_config(cp);
  cp->add_option("--replicates", replicates, "overrides the config value");
  out_opt(cp, "coupling.csv", "output CSV");

  auto* ch = app.add_subcommand("chaos", "propagation of chaos experiment");
  need_config(ch);
  ch->add_option("--N", sizes, "comma separated network sizes");
  ch->add_option("--replicates", replicates, "overrides the config value");
  out_opt(ch, "chaos.csv", "output CSV");

  auto* wt = app.add_subcommand("weights", "kernel truncation ladder");
  need_config(wt);
  wt->add_option("--truncations", truncations, "comma separated truncation horizons");
  wt->add_option("--replicates", replicates, "overrides the config value");
  out_opt(wt, "weights.csv", "output CSV");

  auto* dg = app.add_subcommand("diagnose", "goodness-of-fit and domination diagnostics");
  need_config(dg);
  dg->add_option("--test", test)->required()->check(CLI::IsMember({"rescaling", "domination"}));
  out_opt(dg, "diagnose.csv", "output CSV");

  auto* va = app.add_subcommand("validate", "check a config and audit the declared rate constants");
  need_config(va);
  va->add_option("--samples", samples)->capture_default_str();
  out_opt(va, "validate.csv", "output CSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    std::string out;
    for (auto* s : app.get_subcommands()) out = outs[s->get_name()];
    if (sim->parsed()) cmd_simulate(g, config, out, trace, trace_step);
    else if (mf->parsed()) cmd_meanfield(g, config, method, out);
    else if (st->parsed()) cmd_stationary(g, config, sweep, out, density_out, age_max);
    else if (cp->parsed()) cmd_couple(g, config, replicates, out);
    else if (ch->parsed()) cmd_chaos(g, config, sizes, replicates, out);
    else if (wt->parsed()) cmd_weights(g, config, truncations, replicates, out);
    else if (dg->parsed()) cmd_diagnose(g, config, test, out);
    else if (va->parsed()) return cmd_validate(g, config, samples, out);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const UnsupportedError& e) {
    std::cerr << "unsupported: " << e.what() << "\n";
    return 2;
  } catch (const ModelError& e) {
    std::cerr << "model error: " << e.what() << "\n";
    return 3;
  } catch (const NonConvergenceError& e) {
    std::cerr << "no convergence: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace adh::cli
