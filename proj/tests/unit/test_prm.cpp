#include <cmath>

#include "adh/prm.hpp"
#include "doctest.h"

using namespace adh;

TEST_CASE("streams are pure functions of their keys") {
  PrmStream a(42, {0, 3});
  PrmStream b(42, {0, 3});
  auto pa = a.points_in(0.0, 20.0, 5.0);
  auto pb = b.points_in(0.0, 20.0, 5.0);
  REQUIRE(pa.size() == pb.size());
  for (std::size_t i = 0; i < pa.size(); ++i) {
    CHECK(pa[i].time == pb[i].time);
    CHECK(pa[i].mark == pb[i].mark);
  }
  PrmStream c(42, {0, 4});
  auto pc = c.points_in(0.0, 20.0, 5.0);
  CHECK((pc.size() != pa.size() || pc.front().time != pa.front().time));
}

TEST_CASE("raising the ceiling keeps the lower points") {
  PrmStream s(7, {1, 0});
  auto low = s.points_in(0.0, 10.0, 3.0);
  auto high = s.points_in(0.0, 10.0, 40.0);
  std::size_t found = 0;
  for (const auto& p : low)
    for (const auto& q : high)
      if (p.time == q.time && p.mark == q.mark) ++found;
  CHECK(found == low.size());
  CHECK(high.size() > low.size());
}

TEST_CASE("point counts have unit intensity") {
  PrmStream s(99, {0, 0});
  const double area = 2000.0 * 3.0;
  auto n = static_cast<double>(s.points_in(0.0, 2000.0, 3.0).size());
  CHECK(std::abs(n - area) < 5.0 * std::sqrt(area));
  for (const auto& p : s.points_in(0.0, 50.0, 3.0)) {
    CHECK(p.time > 0.0);
    CHECK(p.mark > 0.0);
    CHECK(p.mark <= 3.0);
  }
}

TEST_CASE("first_after agrees with the sorted window query") {
  PrmStream s(5, {2, 1}, {4.0, 0.5});
  double t = 0.0;
  for (int i = 0; i < 50; ++i) {
    auto fa = s.first_after(t, 100.0, 2.5);
    auto all = s.points_in(t, 100.0, 2.5);
    REQUIRE(fa.has_value());
    CHECK(fa->time == all.front().time);
    t = fa->time;
  }
  CHECK_FALSE(s.first_after(3.0, 3.0, 1.0).has_value());
}

TEST_CASE("forgetting cells does not change the realization") {
  PrmStream s(13, {0, 0});
  auto before = s.points_in(5.0, 9.0, 2.0);
  s.forget_before(8.0);
  auto again = s.points_in(5.0, 9.0, 2.0);
  REQUIRE(before.size() == again.size());
  for (std::size_t i = 0; i < before.size(); ++i) CHECK(before[i].time == again[i].time);
  auto tr = s.truncated_events(5.0, 9.0, 1.0);
  for (double v : tr) CHECK((v > 5.0 && v <= 9.0));
}
