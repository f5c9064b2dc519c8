#include "adh/prm.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "adh/errors.hpp"
#include "adh/random.hpp"

namespace adh {

namespace {
constexpr std::int64_t kMaxStrips = 1 << 20;

std::uint64_t cell_id(std::int64_t window, std::int64_t strip) {
  return (static_cast<std::uint64_t>(window) << 20) ^ static_cast<std::uint64_t>(strip);
}
}  // namespace

PrmStream::PrmStream(std::uint64_t seed, UnitKey key, PrmLayout layout)
    : seed_(seed), key_(key), layout_(layout) {
  if (!(layout_.strip_height > 0.0) || !(layout_.window_width > 0.0))
    throw ConfigError("prm layout: strip height and window width must be positive");
}

const std::vector<PrmPoint>& PrmStream::cell(std::int64_t window, std::int64_t strip) {
  const std::uint64_t id = cell_id(window, strip);
  auto it = cache_.find(id);
  if (it != cache_.end()) return it->second;

  SplitMix64 gen(derive_key(seed_, {stream_tag::kPrmCell, static_cast<std::uint64_t>(key_.population),
                                    static_cast<std::uint64_t>(key_.unit), static_cast<std::uint64_t>(strip),
                                    static_cast<std::uint64_t>(window)}));
  const double w = layout_.window_width;
  const double hgt = layout_.strip_height;
  std::poisson_distribution<long> count_dist(w * hgt);
  long count = count_dist(gen);
  std::vector<PrmPoint> pts;
  pts.reserve(static_cast<std::size_t>(count));
  const double t0 = static_cast<double>(window) * w;
  const double m0 = static_cast<double>(strip) * hgt;
  for (long i = 0; i < count; ++i) {
    // (0,1] offsets keep cells half-open on the left: (t0, t0+w] x (m0, m0+h]
    double ut = uniform_open0(gen);
    double um = uniform_open0(gen);
    pts.push_back({t0 + ut * w, m0 + um * hgt});
  }
  std::sort(pts.begin(), pts.end(), [](const PrmPoint& a, const PrmPoint& b) { return a.time < b.time; });
  lowest_cached_window_ = cache_.empty() ? window : std::min(lowest_cached_window_, window);
  return cache_.emplace(id, std::move(pts)).first->second;
}

std::vector<PrmPoint> PrmStream::points_in(double t1, double t2, double mark_ceiling) {
  std::vector<PrmPoint> out;
  if (!(t2 > t1) || !(mark_ceiling > 0.0)) return out;
  const double w = layout_.window_width;
  const std::int64_t w_lo = static_cast<std::int64_t>(std::floor(std::max(t1, 0.0) / w));
  const std::int64_t w_hi = static_cast<std::int64_t>(std::ceil(t2 / w));
  const std::int64_t strips = static_cast<std::int64_t>(std::ceil(mark_ceiling / layout_.strip_height));
  if (strips > kMaxStrips) throw ModelError("prm query: mark ceiling too large");
  for (std::int64_t win = w_lo; win < w_hi; ++win)
    for (std::int64_t s = 0; s < strips; ++s)
      for (const auto& p : cell(win, s))
        if (p.time > t1 && p.time <= t2 && p.mark <= mark_ceiling) out.push_back(p);
  std::sort(out.begin(), out.end(), [](const PrmPoint& a, const PrmPoint& b) {
    return a.time < b.time || (a.time == b.time && a.mark < b.mark);
  });
  return out;
}

std::vector<double> PrmStream::truncated_events(double t1, double t2, double K) {
  std::vector<double> out;
  for (const auto& p : points_in(t1, t2, K)) out.push_back(p.time);
  return out;
}

std::optional<PrmPoint> PrmStream::first_after(double t, double t_end, double mark_ceiling) {
  if (!(t_end > t) || !(mark_ceiling > 0.0)) return std::nullopt;
  const double w = layout_.window_width;
  const std::int64_t strips = static_cast<std::int64_t>(std::ceil(mark_ceiling / layout_.strip_height));
  if (strips > kMaxStrips) throw ModelError("prm query: mark ceiling too large");
  std::int64_t win = static_cast<std::int64_t>(std::floor(std::max(t, 0.0) / w));
  const std::int64_t w_hi = static_cast<std::int64_t>(std::ceil(t_end / w));
  for (; win < w_hi; ++win) {
    std::optional<PrmPoint> best;
    for (std::int64_t s = 0; s < strips; ++s) {
      const auto& pts = cell(win, s);
      auto it = std::upper_bound(pts.begin(), pts.end(), t,
                                 [](double v, const PrmPoint& p) { return v < p.time; });
      for (; it != pts.end(); ++it) {
        if (it->time > t_end) break;
        if (best && it->time >= best->time) break;
        if (it->mark <= mark_ceiling) {
          best = *it;
          break;
        }
      }
    }
    if (best) return best;
  }
  return std::nullopt;
}

void PrmStream::forget_before(double t) {
  const std::int64_t keep_from = static_cast<std::int64_t>(std::floor(t / layout_.window_width));
  if (cache_.empty() || keep_from <= lowest_cached_window_) return;
  for (auto it = cache_.begin(); it != cache_.end();) {
    if (static_cast<std::int64_t>(it->first >> 20) < keep_from) it = cache_.erase(it);
    else ++it;
  }
  lowest_cached_window_ = keep_from;
}

}  // namespace adh
