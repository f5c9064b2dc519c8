#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace adh {

/// Scalar memory-to-rate maps f(x). All built-in kinds are monotone, which
/// makes sup over an interval a two-point evaluation.
struct ScalarMap {
  struct Constant { double value = 1.0; };
  /// height / (1 + exp(-slope (x - midpoint))) + floor
  struct Logistic { double height = 1.0; double slope = 1.0; double midpoint = 0.0; double floor = 0.0; };
  /// clamp(intercept + slope x, lower, upper)
  struct AffineClamped {
    double intercept = 0.0;
    double slope = 1.0;
    double lower = 0.0;
    double upper = std::numeric_limits<double>::infinity();
  };
  /// scale * exp(rate x)
  struct Exponential { double scale = 1.0; double rate = 1.0; };

  using Kind = std::variant<Constant, Logistic, AffineClamped, Exponential>;
  Kind kind = Constant{};

  double operator()(double x) const;
  /// sup_x f(x) when finite.
  std::optional<double> upper_bound() const;
  std::optional<double> lower_bound() const;
  /// sup over |x| <= x_abs.
  double sup_on_ball(double x_abs) const;
  bool strictly_increasing() const;
};

/// Bounded age modulation g(a) for product-form rates.
struct AgeMap {
  struct Constant { double value = 1.0; };
  /// `before` on [0, threshold), `after` from threshold on.
  struct Step { double threshold = 1.0; double before = 0.0; double after = 1.0; };
  /// 1 - exp(-a / tau)
  struct Recovery { double tau = 1.0; };

  using Kind = std::variant<Constant, Step, Recovery>;
  Kind kind = Constant{};

  double operator()(double a) const;
  double sup() const;
  std::vector<double> breakpoints() const;
};

struct HardRefractory {
  ScalarMap f;
  double delta = 0.0;
};

struct ProductRate {
  ScalarMap f;
  AgeMap g;
};

struct CustomRate {
  std::function<double(double, double)> psi;
  /// Ages where psi may be discontinuous in a.
  std::vector<double> age_breakpoints;
};

struct DoeblinConstants {
  double c = 0.0;
  double a_star = 0.0;
  double x_star = 0.0;
};

/// psi(x, a) with its declared regularity constants. Constants are declared by
/// the user and audited by validate(), never inferred.
class RateSpec {
 public:
  using Form = std::variant<HardRefractory, ProductRate, CustomRate>;

  RateSpec() = default;
  RateSpec(Form form, double lipschitz_L);

  static RateSpec hard_refractory(ScalarMap f, double delta, double lipschitz_L = 1.0);
  static RateSpec product(ScalarMap f, AgeMap g, double lipschitz_L = 1.0);
  static RateSpec custom(std::function<double(double, double)> psi, double lipschitz_L = 1.0,
                         std::vector<double> age_breakpoints = {});

  const Form& form() const { return form_; }
  const HardRefractory* as_hard_refractory() const { return std::get_if<HardRefractory>(&form_); }

  double lipschitz_L() const { return L_; }
  double postjump_bound_K() const { return K_; }
  double postjump_window() const { return delta_window_; }
  const DoeblinConstants& doeblin() const { return doeblin_; }

  RateSpec& set_postjump(double K, double delta);
  RateSpec& set_doeblin(DoeblinConstants d);
  /// Same rate with the refractory length replaced (hard-refractory only).
  RateSpec with_delta(double delta) const;

  /// Raw psi(x, a); throws ModelError on a negative value.
  double operator()(double x, double a) const;
  double psi(double x, double a) const { return (*this)(x, a); }

  /// L(1 + x_abs), tightened to a declared finite sup of f when available.
  double sublinear_majorant(double x_abs) const;
  /// Tightest cheap bound on psi over |x| <= x_abs and all ages; used as the
  /// thinning ceiling.
  double window_majorant(double x_abs) const;
  /// psi vanishes for ages below this value (hard refractory), else 0.
  double silent_age() const;
  std::vector<double> age_breakpoints() const;
  /// sup_x sup_a psi when finite.
  std::optional<double> upper_bound() const;

 private:
  Form form_ = HardRefractory{};
  double L_ = 1.0;
  double K_ = 0.0;
  double delta_window_ = 0.0;
  DoeblinConstants doeblin_{};
};

double psi_eval(const RateSpec& r, double x, double a);
double sublinear_majorant(const RateSpec& r, double x_abs);

struct CheckMargin {
  std::string name;
  /// max over samples of (observed - allowed); <= 0 means no violation seen
  double worst_margin = -std::numeric_limits<double>::infinity();
  bool pass = true;
  std::size_t samples = 0;
};

struct RateValidationReport {
  CheckMargin nonnegative;
  CheckMargin postjump_bound;
  CheckMargin doeblin;
  CheckMargin lipschitz;
  CheckMargin sublinear;
  bool pass() const {
    return nonnegative.pass && postjump_bound.pass && doeblin.pass && lipschitz.pass && sublinear.pass;
  }
};

struct ValidationRanges {
  double x_abs_max = 10.0;
  double age_max = 20.0;
  std::uint64_t seed = 0x5eed;
};

/// Monte-Carlo audit of the declared constants on a random grid.
RateValidationReport validate(const RateSpec& r, std::size_t sample_count, ValidationRanges ranges = {});

}  // namespace adh
