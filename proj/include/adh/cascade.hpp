#pragma once

#include <span>
#include <vector>

namespace adh {

/// Markovian state (X^(0), ..., X^(n)) of an Erlang-kernel convolution
/// h(t) = b t^n/n! e^{-nu t}. X^(0) equals the convolution of h with the
/// recorded events; X^(k) uses the order n-k kernel with the same b and nu.
struct CascadeState {
  std::vector<double> coords;
  double nu = 1.0;
  double b = 0.0;
  double last_update = 0.0;

  CascadeState() = default;
  CascadeState(int n, double nu, double b);

  int order() const { return static_cast<int>(coords.size()) - 1; }
  double value() const { return coords.front(); }
};

/// Exact flow of the Jordan block over dt with no events.
CascadeState advance(const CascadeState& s, double dt);
void advance_in_place(CascadeState& s, double dt);

/// Adds b to the last coordinate.
CascadeState on_event(const CascadeState& s);

/// State at time 0 for a discrete point measure on (-inf, 0].
CascadeState init_from_point_measure(std::span<const double> times, int n, double nu, double b);

/// X^(0)(t+s) for s in [0, horizon] bounded in absolute value without events.
double cascade_abs_bound(const CascadeState& s, double horizon);

}  // namespace adh
