#pragma once

#include <limits>
#include <variant>
#include <vector>

namespace adh {

/// h(t) = b t^n / n! e^{-nu t}
struct Erlang {
  double b = 0.0;
  double nu = 1.0;
  int n = 0;
};

/// Right-continuous steps: values[i] on [grid[i], grid[i+1]), zero before
/// grid.front() and from grid.back() on. grid.size() == values.size() + 1.
struct PiecewiseConstant {
  std::vector<double> grid;
  std::vector<double> values;
};

struct ZeroKernel {};

/// A weight function h together with its decreasing envelope and integral
/// transforms. Immutable after construction.
class KernelSpec {
 public:
  using Kind = std::variant<ZeroKernel, Erlang, PiecewiseConstant>;

  KernelSpec() : KernelSpec(ZeroKernel{}) {}
  explicit KernelSpec(Kind kind);

  static KernelSpec zero() { return KernelSpec(ZeroKernel{}); }
  static KernelSpec erlang(double b, double nu, int n);
  static KernelSpec piecewise(std::vector<double> grid, std::vector<double> values);

  /// Returns a copy with eval() forced to 0 beyond `horizon`.
  KernelSpec truncated(double horizon) const;

  const Kind& kind() const { return kind_; }
  bool is_zero() const;
  const Erlang* as_erlang() const { return std::get_if<Erlang>(&kind_); }
  const PiecewiseConstant* as_piecewise() const {
    return std::get_if<PiecewiseConstant>(&kind_);
  }

  /// Time beyond which |h| is negligible (or exactly zero when truncating).
  double truncation_horizon() const { return horizon_; }
  bool truncation_active() const { return truncating_; }

  double eval(double t) const;
  double envelope(double t) const;
  /// \int_a^b h(t) dt. `b` may be +infinity for decaying kinds.
  double integral(double a, double b) const;
  /// \int_0^\infty h, using the truncation when active.
  double total_integral() const { return integral(0.0, std::numeric_limits<double>::infinity()); }

  /// \sum_{k>=1} envelope(k delta), with a tail bound for the numeric case.
  double envelope_lattice_sum(double delta, double offset = 0.0, int first_index = 1) const;

  /// Age breakpoints where eval() is not smooth (grid points, truncation).
  std::vector<double> breakpoints() const;

 private:
  double raw_eval(double t) const;
  double raw_envelope(double t) const;

  Kind kind_;
  double horizon_ = 0.0;
  bool truncating_ = false;
};

struct IntegrabilityReport {
  double l1_envelope = 0.0;
  double l2_envelope = 0.0;
  double t_weighted_l1 = 0.0;
  bool pass = false;
};

IntegrabilityReport integrability_check(const KernelSpec& k);

/// Population-level weight functions; entries[k][l] is the effect of a jump in
/// population l on the memory of population k.
struct KernelMatrix {
  std::vector<std::vector<KernelSpec>> entries;
  double scale = 1.0;

  std::size_t size() const { return entries.size(); }
  const KernelSpec& at(std::size_t k, std::size_t l) const { return entries.at(k).at(l); }
  bool all_zero() const;
};

}  // namespace adh
