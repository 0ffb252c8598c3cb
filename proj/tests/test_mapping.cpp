#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <sstream>

#include "skyloop/mapping.hpp"

using namespace skyloop;
using namespace skyloop::mapping;

namespace {

SubmapGrid::Params small_params(int n) {
  SubmapGrid::Params p;
  p.scans_per_submap = n;
  return p;
}

std::set<std::tuple<int, int, int>> occupied_keys(const OccupancyOctree& t) {
  std::set<std::tuple<int, int, int>> out;
  for (const auto& l : t.leaves()) {
    if (t.classify(l.log_odds) != Occupancy::occupied) continue;
    for (std::uint32_t dx = 0; dx < l.span(); ++dx)
      for (std::uint32_t dy = 0; dy < l.span(); ++dy)
        for (std::uint32_t dz = 0; dz < l.span(); ++dz) out.emplace(l.key.x + dx, l.key.y + dy, l.key.z + dz);
  }
  return out;
}

}  // namespace

TEST_CASE("log-odds helpers") {
  CHECK(logit(0.5) == 0.0);
  CHECK(sigmoid(logit(0.65)) == doctest::Approx(0.65).epsilon(1e-15));
  CHECK(logit(0.65) == doctest::Approx(std::log(0.65 / 0.35)));
}

TEST_CASE("submap insertion") {
  SubmapGrid s(0, Pose(), small_params(2));
  const Eigen::Vector3d p(0.05, 0.05, 0.05);
  s.insert_scan({p});
  CHECK(s.high_res().probability(s.high_res().index_of(p)) == doctest::Approx(0.65).epsilon(1e-12));
  CHECK(s.low_res().probability(s.low_res().index_of(p)) == doctest::Approx(0.65).epsilon(1e-12));
  CHECK(s.high_res().probability({5, 5, 5}) == 0.5);
  CHECK_FALSE(s.finished());

  // Far outside the current extent: the grid grows.
  s.insert_scan({p, {100.0, -50.0, 3.0}});
  CHECK(s.finished());
  CHECK(s.low_res().probability(s.low_res().index_of({100.0, -50.0, 3.0})) > 0.5);
  // Two hits: logit(0.65) * 2.
  CHECK(s.low_res().probability(s.low_res().index_of(p)) == doctest::Approx(sigmoid(2 * logit(0.65))));
  CHECK_THROWS_AS(s.insert_scan({p}), std::logic_error);
}

TEST_CASE("points in one scan hit a voxel once") {
  SubmapGrid s(0, Pose(), small_params(5));
  s.insert_scan({{0.01, 0.01, 0.01}, {0.02, 0.02, 0.02}, {0.03, 0.01, 0.02}});
  CHECK(s.high_res().probability({0, 0, 0}) == doctest::Approx(0.65).epsilon(1e-12));
}

TEST_CASE("probabilities stay clamped") {
  SubmapGrid s(0, Pose(), small_params(100));
  for (int i = 0; i < 100; ++i) s.insert_scan({{0.1, 0.1, 0.1}});
  CHECK(s.low_res().probability({0, 0, 0}) == doctest::Approx(sigmoid(3.5)));
}

TEST_CASE("low-res edge must be a multiple of high-res edge") {
  SubmapGrid::Params p;
  p.high_res_edge = 0.15;
  p.low_res_edge = 0.4;
  CHECK_THROWS(p.validate());
  p.high_res_edge = 0.1;
  CHECK_NOTHROW(p.validate());
}

TEST_CASE("extract cloud") {
  SubmapGrid s(3, Pose(), small_params(1));
  s.insert_scan({});
  CHECK(extract_cloud(s, Pose()).points.empty());

  SubmapGrid unfinished(0, Pose(), small_params(2));
  CHECK_THROWS(extract_cloud(unfinished, Pose()));

  auto& low = s.mutable_low_res();
  low.set_probability({0, 0, 0}, 0.9);
  low.set_probability({1, 0, 0}, 0.9);
  low.set_probability({2, 0, 0}, 0.7);
  const auto cloud = extract_cloud(s, Pose());
  CHECK(cloud.submap_id == 3);
  REQUIRE(cloud.points.size() == 2);
  CHECK(cloud.points[0] == Eigen::Vector3d(0.2, 0.2, 0.2));
  CHECK(cloud.points[1] == Eigen::Vector3d(0.6, 0.2, 0.2));

  const Pose moved(Rotation::from_yaw(M_PI / 2), {1, 0, 0});
  const auto cloud2 = extract_cloud(s, moved);
  CHECK((cloud2.points[0] - moved.transform({0.2, 0.2, 0.2})).norm() < 1e-15);
}

TEST_CASE("octree keys and ranges") {
  OccupancyOctree t;
  CHECK(t.resolution() == 0.2);
  const auto k = t.key_of({0.1, -0.1, 0.0});
  CHECK(k.x == 32768);
  CHECK(k.y == 32767);
  CHECK(t.center_of(k).isApprox(Eigen::Vector3d(0.1, -0.1, 0.1)));
  CHECK(t.in_range({6553.0, 0, 0}));
  CHECK_FALSE(t.in_range({6554.0, 0, 0}));
  CHECK_THROWS_AS(t.key_of({1e6, 0, 0}), std::out_of_range);
}

TEST_CASE("octree single point insertion") {
  OccupancyOctree::Params p;
  p.carve_free_space = false;
  OccupancyOctree t(p);
  t.insert_cloud({0, {{1.0, 1.0, 1.0}}}, {0, 0, 0});
  const auto leaves = t.leaves();
  REQUIRE(leaves.size() == 1);
  CHECK(leaves[0].log_odds == 0.85);
  CHECK(t.query(Eigen::Vector3d(1.0, 1.0, 1.0)) == Occupancy::occupied);
  CHECK(t.query(Eigen::Vector3d(5.0, 1.0, 1.0)) == Occupancy::unknown);

  t.insert_cloud({0, {{1.0, 1.0, 1.0}}}, {0, 0, 0});
  CHECK(occupied_keys(t).size() == 1);
  for (int i = 0; i < 10; ++i) t.insert_cloud({0, {{1.0, 1.0, 1.0}}}, {0, 0, 0});
  CHECK(t.leaves()[0].log_odds == 3.5);
}

TEST_CASE("ray carving") {
  OccupancyOctree t;
  // Origin in voxel x=0, hit in voxel x=4 along the x axis.
  const Eigen::Vector3d origin(0.1, 0.1, 0.1), hit(0.9, 0.1, 0.1);
  const auto keys = t.ray_keys(origin, hit);
  REQUIRE(keys.size() == 4);
  for (int i = 0; i < 4; ++i) CHECK(keys[i].x == 32768 + i);
  t.insert_cloud({0, {hit}}, origin);
  int free = 0, occ = 0;
  for (const auto& l : t.leaves()) {
    free += t.classify(l.log_odds) == Occupancy::free;
    occ += t.classify(l.log_odds) == Occupancy::occupied;
  }
  CHECK(free == 4);
  CHECK(occ == 1);
  CHECK(t.query(Eigen::Vector3d(0.5, 0.1, 0.1)) == Occupancy::free);
  CHECK(t.query(hit) == Occupancy::occupied);
}

TEST_CASE("ray keys on a diagonal are face-connected") {
  OccupancyOctree t;
  const auto keys = t.ray_keys({0.05, 0.05, 0.05}, {2.33, 1.71, -0.93});
  for (std::size_t i = 1; i < keys.size(); ++i) {
    const int d = std::abs(keys[i].x - keys[i - 1].x) + std::abs(keys[i].y - keys[i - 1].y) +
                  std::abs(keys[i].z - keys[i - 1].z);
    CHECK(d == 1);
  }
}

TEST_CASE("prune collapses identical blocks only") {
  OccupancyOctree t;
  for (int x = 0; x < 2; ++x)
    for (int y = 0; y < 2; ++y)
      for (int z = 0; z < 2; ++z) t.set_log_odds({std::uint16_t(32768 + x), std::uint16_t(32768 + y), std::uint16_t(32768 + z)}, 2.0);
  const auto before = t.node_count();
  t.prune();
  CHECK(t.node_count() < before);
  REQUIRE(t.leaves().size() == 1);
  CHECK(t.leaves()[0].depth == OccupancyOctree::kDepth - 1);
  CHECK(t.query(Eigen::Vector3d(0.3, 0.3, 0.3)) == Occupancy::occupied);

  OccupancyOctree mixed;
  for (int x = 0; x < 2; ++x)
    for (int y = 0; y < 2; ++y)
      for (int z = 0; z < 2; ++z)
        mixed.set_log_odds({std::uint16_t(32768 + x), std::uint16_t(32768 + y), std::uint16_t(32768 + z)}, x ? 2.0 : 1.0);
  mixed.prune();
  CHECK(mixed.leaves().size() == 8);

  // Updating inside a pruned block expands it again.
  t.update({32768, 32768, 32768}, -3.0);
  CHECK(t.leaves().size() == 8);
  CHECK(t.query(Eigen::Vector3d(0.1, 0.1, 0.1)) == Occupancy::free);
  CHECK(t.query(Eigen::Vector3d(0.3, 0.3, 0.3)) == Occupancy::occupied);
}

TEST_CASE("prune preserves random queries") {
  std::mt19937_64 rng(31);
  std::uniform_int_distribution<int> coord(0, 15);
  OccupancyOctree t;
  for (int i = 0; i < 3000; ++i) {
    const OctreeKey k{std::uint16_t(32760 + coord(rng)), std::uint16_t(32760 + coord(rng)), std::uint16_t(32760 + coord(rng))};
    t.set_log_odds(k, (i % 3 == 0) ? -1.0 : 1.5);
  }
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  std::vector<Eigen::Vector3d> probes;
  std::vector<Occupancy> before;
  for (int i = 0; i < 1000; ++i) {
    probes.emplace_back(u(rng), u(rng), u(rng));
    before.push_back(t.query(probes.back()));
  }
  t.prune();
  for (int i = 0; i < 1000; ++i) CHECK(t.query(probes[i]) == before[i]);
}

TEST_CASE("binary format round trip") {
  OccupancyOctree t;
  t.insert_cloud({0, {{1, 2, 3}, {-1, 0.5, 2}}}, {0, 0, 0});
  t.prune();
  std::stringstream ss;
  t.write_binary(ss);
  const std::string bytes = ss.str();
  CHECK(bytes.substr(0, 4) == "AOK1");
  const auto back = OccupancyOctree::read_binary(ss);
  std::stringstream again;
  back.write_binary(again);
  CHECK(again.str() == bytes);
  CHECK(back.leaves().size() == t.leaves().size());

  std::stringstream a, b;
  t.write_text(a);
  back.write_text(b);
  CHECK(a.str() == b.str());
  CHECK(a.str().rfind("OCC ", 0) == 0);

  std::stringstream junk("NOPE....");
  CHECK_THROWS(OccupancyOctree::read_binary(junk));
  std::stringstream truncated(bytes.substr(0, bytes.size() - 3));
  CHECK_THROWS(OccupancyOctree::read_binary(truncated));
}

TEST_CASE("occupied box query") {
  OccupancyOctree t;
  t.set_log_odds(t.key_of({1.0, 1.0, 1.0}), 2.0);
  t.set_log_odds(t.key_of({3.0, 1.0, 1.0}), 2.0);
  t.set_log_odds(t.key_of({1.5, 1.0, 1.0}), -1.0);
  int n = 0;
  t.for_each_occupied_in_box({0.5, 0.5, 0.5}, {2.0, 2.0, 2.0}, [&](const OctreeKey&) { ++n; });
  CHECK(n == 1);
}

TEST_CASE("publisher swaps snapshots") {
  OctreePublisher pub;
  const auto first = pub.snapshot();
  OccupancyOctree next;
  next.set_log_odds(next.key_of({0, 0, 0}), 1.0);
  pub.publish(std::move(next));
  CHECK(first->leaves().empty());
  CHECK(pub.snapshot()->leaves().size() == 1);
}
