#include <doctest.h>

#include "fixtures.hpp"
#include "skyloop/planning.hpp"

using namespace skyloop;
using namespace skyloop::planning;
using skyloop::mapping::OccupancyOctree;

namespace {

PlanRequest box_request(const Eigen::Vector3d& start, const Eigen::Vector3d& goal, std::uint64_t seed) {
  PlanRequest r;
  r.start = start;
  r.goal = goal;
  r.bounds = {{0.1, 0.1, 0.1}, {9.9, 9.9, 9.9}};
  r.seed = seed;
  return r;
}

}  // namespace

TEST_CASE("segment validation") {
  OccupancyOctree empty;
  CHECK(validate_segment(empty, {0, 0, 0}, {3, 2, 1}, 0.2, true));
  CHECK_FALSE(validate_segment(empty, {0, 0, 0}, {3, 2, 1}, 0.2, false));

  OccupancyOctree t;
  fixtures::fill_free(t, {-2, -2, -2}, {2, 2, 2});
  CHECK(validate_segment(t, {-1.5, -1.5, -1.5}, {1.5, 1.2, 0.9}, 0.2));

  const auto k = t.key_of({0.1, 0.1, 0.1});
  t.set_log_odds(k, 2.0);
  CHECK_FALSE(validate_segment(t, {-1, 0.1, 0.1}, {1, 0.1, 0.1}, 0.0));

}

TEST_CASE("clearance is decided by the exact distance to the voxel center") {
  OccupancyOctree t;
  fixtures::fill_free(t, {-2, -2, -2}, {2, 2, 2});
  const auto k = t.key_of({0.1, 0.1, 0.1});
  t.set_log_odds(k, 2.0);
  // Segment along x at 0.15 m from the center in z, outside the occupied box (half size 0.1).
  const Eigen::Vector3d a(-1, 0.1, 0.25), b(1, 0.1, 0.25);
  CHECK(fixtures::point_segment_distance(t.center_of(k), a, b) == doctest::Approx(0.15));
  CHECK_FALSE(validate_segment(t, a, b, 0.2));
  CHECK(validate_segment(t, a, b, 0.1));
}

TEST_CASE("rrt in a free box") {
  OccupancyOctree t;
  fixtures::fill_free(t, {0.1, 0.1, 0.1}, {9.9, 9.9, 9.9});
  t.prune();
  const auto path = plan_rrt(t, box_request({1, 1, 1}, {9, 9, 9}, 3));
  REQUIRE(path);
  CHECK(path->waypoints.front() == Eigen::Vector3d(1, 1, 1));
  CHECK(path->waypoints.back() == Eigen::Vector3d(9, 9, 9));
  CHECK(path->length() >= std::sqrt(3.0) * 8.0 - 1e-9);
  CHECK(fixtures::oracle_path_ok(t, *path, 0.2));
}

TEST_CASE("rrt through a wall gap") {
  const auto t = fixtures::wall_with_gap();
  const auto req = box_request({2, 2, 2}, {8, 8, 8}, 11);
  const auto path = plan_rrt(t, req);
  REQUIRE(path);
  CHECK(fixtures::oracle_path_ok(t, *path, req.clearance));
  bool crossed_in_gap = false;
  for (std::size_t i = 1; i < path->waypoints.size(); ++i) {
    const auto& a = path->waypoints[i - 1];
    const auto& b = path->waypoints[i];
    if ((a.x() - 5.1) * (b.x() - 5.1) <= 0 && a.x() != b.x()) {
      const double u = (5.1 - a.x()) / (b.x() - a.x());
      const Eigen::Vector3d p = a + u * (b - a);
      crossed_in_gap = std::abs(p.y() - 5) < 0.5 && std::abs(p.z() - 5) < 0.5;
    }
  }
  CHECK(crossed_in_gap);
  const auto again = plan_rrt(t, req);
  REQUIRE(again);
  CHECK(fixtures::path_bytes(*again) == fixtures::path_bytes(*path));
}

TEST_CASE("endpoints must be free") {
  const auto t = fixtures::wall_with_gap();
  auto req = box_request({2, 2, 2}, {5.1, 1.1, 1.1}, 1);
  try {
    plan_rrt(t, req);
    FAIL("expected EndpointError");
  } catch (const EndpointError& e) {
    CHECK(std::string(e.what()) == "goal not free");
  }
  req = box_request({5.1, 1.1, 1.1}, {2, 2, 2}, 1);
  CHECK_THROWS_WITH_AS(plan_rrt(t, req), "start not free", EndpointError);
  req = box_request({2, 2, 2}, {20, 2, 2}, 1);
  CHECK_THROWS_AS(plan_rrt(t, req), std::invalid_argument);
}

TEST_CASE("rrt gives up when no path exists") {
  auto t = fixtures::wall_with_gap();
  const auto wall_x = t.key_of({5.1, 0, 0}).x;
  for (double y = 4.5; y <= 5.5; y += 0.2)
    for (double z = 4.5; z <= 5.5; z += 0.2) t.set_log_odds({wall_x, t.key_of({0, y, 0}).y, t.key_of({0, 0, z}).z}, 2.0);
  auto req = box_request({2, 2, 2}, {8, 8, 8}, 1);
  req.max_iterations = 300;
  CHECK_FALSE(plan_rrt(t, req));
}

TEST_CASE("shortcut") {
  OccupancyOctree t;
  fixtures::fill_free(t, {0.1, 0.1, 0.1}, {9.9, 9.9, 9.9});
  const Path two{{{1, 1, 1}, {2, 2, 2}}};
  CHECK(fixtures::path_bytes(shortcut(two, t, 0.2, 1)) == fixtures::path_bytes(two));

  Path zigzag;
  for (int i = 0; i <= 8; ++i) zigzag.waypoints.emplace_back(1 + i, (i % 2) ? 3.0 : 2.0, 5.0);
  const Path s = shortcut(zigzag, t, 0.2, 1);
  CHECK(s.waypoints.size() == 2);
  CHECK(s.length() == doctest::Approx((zigzag.waypoints.back() - zigzag.waypoints.front()).norm()));

  const auto wall = fixtures::wall_with_gap();
  const auto path = plan_rrt(wall, box_request({2, 2, 2}, {8, 8, 8}, 5));
  REQUIRE(path);
  const Path short_path = shortcut(*path, wall, 0.2, 5);
  CHECK(short_path.length() <= path->length() + 1e-12);
  CHECK(short_path.waypoints.front() == path->waypoints.front());
  CHECK(short_path.waypoints.back() == path->waypoints.back());
  CHECK(fixtures::oracle_path_ok(wall, short_path, 0.2));
}
