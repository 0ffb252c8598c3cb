#pragma once

// Shared test fixtures and an independent brute-force collision oracle.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "skyloop/mapping.hpp"
#include "skyloop/planning.hpp"

namespace fixtures {

using skyloop::mapping::OccupancyOctree;
using skyloop::mapping::OctreeKey;
using skyloop::mapping::Occupancy;

/// Marks every leaf whose center lies in [lo, hi] as free.
inline void fill_free(OccupancyOctree& t, const Eigen::Vector3d& lo, const Eigen::Vector3d& hi) {
  const auto a = t.key_of(lo), b = t.key_of(hi);
  for (int x = a.x; x <= b.x; ++x)
    for (int y = a.y; y <= b.y; ++y)
      for (int z = a.z; z <= b.z; ++z) t.set_log_odds({std::uint16_t(x), std::uint16_t(y), std::uint16_t(z)}, -0.4);
}

/// 10 m free cube with a one-voxel wall at x = 5 and a 1 m square gap centred at (5, 5, 5).
inline OccupancyOctree wall_with_gap() {
  OccupancyOctree t;
  fill_free(t, {0.1, 0.1, 0.1}, {9.9, 9.9, 9.9});
  const auto wall_x = t.key_of({5.1, 0, 0}).x;
  const auto a = t.key_of({0.1, 0.1, 0.1}), b = t.key_of({9.9, 9.9, 9.9});
  for (int y = a.y; y <= b.y; ++y) {
    for (int z = a.z; z <= b.z; ++z) {
      const OctreeKey k{wall_x, std::uint16_t(y), std::uint16_t(z)};
      const Eigen::Vector3d c = t.center_of(k);
      if (std::abs(c.y() - 5.0) < 0.5 && std::abs(c.z() - 5.0) < 0.5) continue;
      t.set_log_odds(k, 2.0);
    }
  }
  t.prune();
  return t;
}

inline double point_segment_distance(const Eigen::Vector3d& p, const Eigen::Vector3d& a,
                                     const Eigen::Vector3d& b) {
  const Eigen::Vector3d ab = b - a;
  const double len2 = ab.squaredNorm();
  double u = len2 > 0 ? (p - a).dot(ab) / len2 : 0.0;
  u = std::clamp(u, 0.0, 1.0);
  return (a + u * ab - p).norm();
}

/// Every occupied leaf-resolution voxel center, by exhaustive expansion of the leaf list.
inline std::vector<Eigen::Vector3d> occupied_centers(const OccupancyOctree& t) {
  std::vector<Eigen::Vector3d> out;
  for (const auto& l : t.leaves()) {
    if (t.classify(l.log_odds) != Occupancy::occupied) continue;
    for (std::uint32_t dx = 0; dx < l.span(); ++dx)
      for (std::uint32_t dy = 0; dy < l.span(); ++dy)
        for (std::uint32_t dz = 0; dz < l.span(); ++dz)
          out.push_back(t.center_of({std::uint16_t(l.key.x + dx), std::uint16_t(l.key.y + dy), std::uint16_t(l.key.z + dz)}));
  }
  return out;
}

/// Brute force: exact distance to every occupied center, plus dense samples tested for
/// occupied-box membership and unknown space.
inline bool oracle_segment_ok(const OccupancyOctree& t, const std::vector<Eigen::Vector3d>& occupied,
                              const Eigen::Vector3d& a, const Eigen::Vector3d& b, double clearance,
                              bool allow_unknown) {
  const double half = 0.5 * t.resolution();
  for (const auto& c : occupied) {
    if (point_segment_distance(c, a, b) <= clearance) return false;
  }
  const int n = std::max(1, static_cast<int>(std::ceil((b - a).norm() / (0.05 * t.resolution()))));
  for (int i = 0; i <= n; ++i) {
    const Eigen::Vector3d p = a + (b - a) * (double(i) / n);
    for (const auto& c : occupied) {
      if (((p - c).cwiseAbs().array() <= half).all()) return false;
    }
    if (!allow_unknown && t.query(p) == Occupancy::unknown) return false;
  }
  return true;
}

inline bool oracle_path_ok(const OccupancyOctree& t, const skyloop::planning::Path& path,
                           double clearance, bool allow_unknown = false) {
  const auto occupied = occupied_centers(t);
  for (std::size_t i = 1; i < path.waypoints.size(); ++i) {
    if (!oracle_segment_ok(t, occupied, path.waypoints[i - 1], path.waypoints[i], clearance, allow_unknown)) {
      return false;
    }
  }
  return true;
}

inline std::string path_bytes(const skyloop::planning::Path& p) {
  std::ostringstream os;
  skyloop::planning::write_path_csv(os, p);
  return os.str();
}

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("skyloop_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace fixtures
