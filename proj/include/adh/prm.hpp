#pragma once

#include <cstdint>
#include <optional>
#include <unordered_map>
#include <vector>

namespace adh {

struct UnitKey {
  int population = 0;
  int unit = 0;
  friend bool operator==(const UnitKey&, const UnitKey&) = default;
};

struct PrmPoint {
  double time = 0.0;
  double mark = 0.0;
};

struct PrmLayout {
  /// mark height of one strip
  double strip_height = 16.0;
  /// time width of one cell
  double window_width = 1.0;
};

/// One realization of a unit-intensity Poisson random measure on
/// (0, inf) x (0, inf), tiled into cells (time window x mark strip). Each
/// cell's points are a pure function of (seed, unit key, strip, window), so
/// independent handles over the same keys see the same points and raising a
/// mark ceiling never disturbs points below it.
///
/// The cell cache makes a handle non-thread-safe; use one handle per thread.
class PrmStream {
 public:
  PrmStream(std::uint64_t seed, UnitKey key, PrmLayout layout = {});

  /// All points in (t1, t2] x (0, mark_ceiling], sorted by time.
  std::vector<PrmPoint> points_in(double t1, double t2, double mark_ceiling);
  /// Times of points_in(t1, t2, K).
  std::vector<double> truncated_events(double t1, double t2, double K);
  /// Earliest point with time in (t, t_end] and mark <= mark_ceiling.
  std::optional<PrmPoint> first_after(double t, double t_end, double mark_ceiling);

  /// Drops cached cells that end at or before t. Pure regeneration makes this
  /// safe at any time.
  void forget_before(double t);

  UnitKey key() const { return key_; }
  std::uint64_t seed() const { return seed_; }
  const PrmLayout& layout() const { return layout_; }

 private:
  const std::vector<PrmPoint>& cell(std::int64_t window, std::int64_t strip);

  std::uint64_t seed_;
  UnitKey key_;
  PrmLayout layout_;
  std::unordered_map<std::uint64_t, std::vector<PrmPoint>> cache_;
  std::int64_t lowest_cached_window_ = 0;
};

}  // namespace adh
