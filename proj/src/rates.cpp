#include "adh/rates.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

#include "adh/errors.hpp"
#include "adh/random.hpp"

namespace adh {

namespace {
template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;
}  // namespace

double ScalarMap::operator()(double x) const {
  return std::visit(
      overloaded{
          [](const Constant& c) { return c.value; },
          [x](const Logistic& l) { return l.floor + l.height / (1.0 + std::exp(-l.slope * (x - l.midpoint))); },
          [x](const AffineClamped& a) { return std::clamp(a.intercept + a.slope * x, a.lower, a.upper); },
          [x](const Exponential& e) { return e.scale * std::exp(e.rate * x); },
      },
      kind);
}

std::optional<double> ScalarMap::upper_bound() const {
  return std::visit(
      overloaded{
          [](const Constant& c) -> std::optional<double> { return c.value; },
          [](const Logistic& l) -> std::optional<double> {
            return l.slope == 0.0 ? l.floor + 0.5 * l.height : l.floor + std::max(l.height, 0.0);
          },
          [](const AffineClamped& a) -> std::optional<double> {
            if (a.slope == 0.0) return std::clamp(a.intercept, a.lower, a.upper);
            if (std::isfinite(a.upper)) return a.upper;
            return std::nullopt;
          },
          [](const Exponential& e) -> std::optional<double> {
            if (e.rate == 0.0 || e.scale <= 0.0) return std::max(e.scale, 0.0);
            return std::nullopt;
          },
      },
      kind);
}

std::optional<double> ScalarMap::lower_bound() const {
  return std::visit(
      overloaded{
          [](const Constant& c) -> std::optional<double> { return c.value; },
          [](const Logistic& l) -> std::optional<double> { return l.floor + std::min(l.height, 0.0); },
          [](const AffineClamped& a) -> std::optional<double> { return a.slope == 0.0 ? std::clamp(a.intercept, a.lower, a.upper) : a.lower; },
          [](const Exponential& e) -> std::optional<double> {
            if (e.rate == 0.0) return e.scale;
            if (e.scale >= 0.0) return 0.0;
            return std::nullopt;
          },
      },
      kind);
}

double ScalarMap::sup_on_ball(double x_abs) const {
  // every built-in kind is monotone in x
  return std::max((*this)(-x_abs), (*this)(x_abs));
}

bool ScalarMap::strictly_increasing() const {
  return std::visit(
      overloaded{
          [](const Constant&) { return false; },
          [](const Logistic& l) { return l.height * l.slope > 0.0; },
          [](const AffineClamped& a) { return a.slope > 0.0 && !std::isfinite(a.upper) && a.lower == -std::numeric_limits<double>::infinity(); },
          [](const Exponential& e) { return e.scale * e.rate > 0.0; },
      },
      kind);
}

double AgeMap::operator()(double a) const {
  return std::visit(overloaded{
                        [](const Constant& c) { return c.value; },
                        [a](const Step& s) { return a < s.threshold ? s.before : s.after; },
                        [a](const Recovery& r) { return -std::expm1(-a / r.tau); },
                    },
                    kind);
}

double AgeMap::sup() const {
  return std::visit(overloaded{
                        [](const Constant& c) { return std::abs(c.value); },
                        [](const Step& s) { return std::max(std::abs(s.before), std::abs(s.after)); },
                        [](const Recovery&) { return 1.0; },
                    },
                    kind);
}

std::vector<double> AgeMap::breakpoints() const {
  if (auto s = std::get_if<Step>(&kind)) return {s->threshold};
  return {};
}

RateSpec::RateSpec(Form form, double lipschitz_L) : form_(std::move(form)), L_(lipschitz_L) {
  if (!(L_ >= 1.0)) throw ConfigError("rate: lipschitz_L must be >= 1");
  if (auto h = std::get_if<HardRefractory>(&form_)) {
    if (!(h->delta >= 0.0) || !std::isfinite(h->delta)) throw ConfigError("rate: delta must be finite and >= 0");
    K_ = 0.0;
    delta_window_ = h->delta;
  }
  if (auto c = std::get_if<CustomRate>(&form_); c && !c->psi) throw ConfigError("rate: custom psi is empty");
}

RateSpec RateSpec::hard_refractory(ScalarMap f, double delta, double lipschitz_L) {
  return RateSpec(HardRefractory{std::move(f), delta}, lipschitz_L);
}

RateSpec RateSpec::product(ScalarMap f, AgeMap g, double lipschitz_L) {
  return RateSpec(ProductRate{std::move(f), std::move(g)}, lipschitz_L);
}

RateSpec RateSpec::custom(std::function<double(double, double)> psi, double lipschitz_L,
                          std::vector<double> age_breakpoints) {
  return RateSpec(CustomRate{std::move(psi), std::move(age_breakpoints)}, lipschitz_L);
}

RateSpec& RateSpec::set_postjump(double K, double delta) {
  if (!(K >= 0.0) || !(delta >= 0.0)) throw ConfigError("rate: post-jump constants must be >= 0");
  K_ = K;
  delta_window_ = delta;
  return *this;
}

RateSpec& RateSpec::set_doeblin(DoeblinConstants d) {
  if (d.c < 0.0 || d.a_star < 0.0 || d.x_star < 0.0) throw ConfigError("rate: doeblin constants must be >= 0");
  doeblin_ = d;
  return *this;
}

RateSpec RateSpec::with_delta(double delta) const {
  auto h = as_hard_refractory();
  if (!h) throw UnsupportedError("with_delta needs a hard-refractory rate");
  RateSpec out = *this;
  out.form_ = HardRefractory{h->f, delta};
  if (!(delta >= 0.0)) throw ConfigError("rate: delta must be >= 0");
  out.delta_window_ = delta;
  return out;
}

double RateSpec::operator()(double x, double a) const {
  if (a < 0.0) throw std::domain_error("rate evaluated at negative age");
  double v = std::visit(overloaded{
                            [&](const HardRefractory& h) { return a >= h.delta ? h.f(x) : 0.0; },
                            [&](const ProductRate& p) { return p.f(x) * p.g(a); },
                            [&](const CustomRate& c) { return c.psi(x, a); },
                        },
                        form_);
  if (!(v >= 0.0)) throw ModelError("rate function returned a negative or NaN value");
  return v;
}

std::optional<double> RateSpec::upper_bound() const {
  return std::visit(overloaded{
                        [](const HardRefractory& h) { return h.f.upper_bound(); },
                        [](const ProductRate& p) -> std::optional<double> {
                          auto fb = p.f.upper_bound();
                          if (!fb) return std::nullopt;
                          return *fb * p.g.sup();
                        },
                        [](const CustomRate&) -> std::optional<double> { return std::nullopt; },
                    },
                    form_);
}

double RateSpec::sublinear_majorant(double x_abs) const {
  if (x_abs < 0.0) throw std::domain_error("sublinear_majorant needs x_abs >= 0");
  double m = L_ * (1.0 + x_abs);
  if (auto ub = upper_bound()) m = std::min(m, *ub);
  return m;
}

double RateSpec::window_majorant(double x_abs) const {
  // Built-in forms get their exact sup so a misdeclared L is reported by the
  // sublinearity counter instead of breaking the thinning.
  double m = std::visit(overloaded{
                            [&](const HardRefractory& h) { return h.f.sup_on_ball(x_abs); },
                            [&](const ProductRate& p) { return p.f.sup_on_ball(x_abs) * p.g.sup(); },
                            [&](const CustomRate&) { return sublinear_majorant(x_abs); },
                        },
                        form_);
  return std::max(m, 0.0);
}

double RateSpec::silent_age() const {
  if (auto h = as_hard_refractory()) return h->delta;
  return 0.0;
}

std::vector<double> RateSpec::age_breakpoints() const {
  return std::visit(overloaded{
                        [](const HardRefractory& h) { return h.delta > 0.0 ? std::vector<double>{h.delta} : std::vector<double>{}; },
                        [](const ProductRate& p) { return p.g.breakpoints(); },
                        [](const CustomRate& c) { return c.age_breakpoints; },
                    },
                    form_);
}

double psi_eval(const RateSpec& r, double x, double a) { return r(x, a); }
double sublinear_majorant(const RateSpec& r, double x_abs) { return r.sublinear_majorant(x_abs); }

RateValidationReport validate(const RateSpec& r, std::size_t sample_count, ValidationRanges ranges) {
  if (sample_count < 1) throw std::invalid_argument("validate needs sample_count >= 1");
  RateValidationReport rep;
  rep.nonnegative.name = "nonnegative";
  rep.postjump_bound.name = "postjump_bound";
  rep.doeblin.name = "doeblin";
  rep.lipschitz.name = "lipschitz";
  rep.sublinear.name = "sublinear";

  SplitMix64 rng(ranges.seed);
  std::uniform_real_distribution<double> ux(-ranges.x_abs_max, ranges.x_abs_max);
  std::uniform_real_distribution<double> ua(0.0, ranges.age_max);
  std::uniform_real_distribution<double> u01(0.0, 1.0);

  auto note = [](CheckMargin& m, double margin) {
    m.worst_margin = std::max(m.worst_margin, margin);
    ++m.samples;
  };
  auto safe_psi = [&](double x, double a) {
    double v = 0.0;
    try {
      v = r(x, a);
    } catch (const ModelError&) {
      v = -1.0;  // reported through the nonnegativity margin
      if (auto c = std::get_if<CustomRate>(&r.form())) v = c->psi(x, a);
    }
    return v;
  };

  const double delta = r.postjump_window();
  const auto& d = r.doeblin();
  for (std::size_t s = 0; s < sample_count; ++s) {
    double x = ux(rng);
    double a = ua(rng);
    double v = safe_psi(x, a);
    note(rep.nonnegative, -v);
    note(rep.sublinear, v - r.lipschitz_L() * (1.0 + std::abs(x)));

    if (delta > 0.0) {
      // sample the window half-open: at a = delta the refractory switch fires
      double aw = u01(rng) * delta;
      note(rep.postjump_bound, safe_psi(x, aw) - r.postjump_bound_K());
    }
    if (d.c > 0.0) {
      double xd = (2.0 * u01(rng) - 1.0) * d.x_star;
      double ad = d.a_star + u01(rng) * std::max(ranges.age_max - d.a_star, 1.0);
      note(rep.doeblin, d.c - safe_psi(xd, ad));
    }
    double x2 = ux(rng);
    if (x2 != x) {
      double slope_gap = std::abs(safe_psi(x, a) - safe_psi(x2, a)) - r.lipschitz_L() * std::abs(x - x2);
      note(rep.lipschitz, slope_gap);
    }
  }
  constexpr double kTol = 1e-12;
  for (CheckMargin* m : {&rep.nonnegative, &rep.postjump_bound, &rep.doeblin, &rep.lipschitz, &rep.sublinear})
    m->pass = m->samples == 0 || m->worst_margin <= kTol;
  return rep;
}

}  // namespace adh
