#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

#include <Eigen/Core>

#include "skyloop/mapping.hpp"

namespace skyloop::planning {

struct Box {
  Eigen::Vector3d min = Eigen::Vector3d::Zero();
  Eigen::Vector3d max = Eigen::Vector3d::Zero();

  bool contains(const Eigen::Vector3d& p) const {
    return (p.array() >= min.array()).all() && (p.array() <= max.array()).all();
  }
};

struct PlanRequest {
  Eigen::Vector3d start = Eigen::Vector3d::Zero();
  Eigen::Vector3d goal = Eigen::Vector3d::Zero();
  Box bounds;
  double clearance = 0.2;
  int max_iterations = 10000;
  double step = 0.5;
  double goal_tolerance = 0.25;
  double goal_bias = 0.1;
  bool allow_unknown = false;
  std::uint64_t seed = 1;

  void validate() const;
};

struct Path {
  std::vector<Eigen::Vector3d> waypoints;

  double length() const;
};

/// Start or goal is not traversable; distinct from running out of iterations.
class EndpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Segment test against an octree snapshot.
///
/// A segment is blocked when it enters an occupied voxel, passes within `clearance`
/// of an occupied voxel center, or (unless unknown space is allowed) has a sample in
/// unknown space. Samples are spaced at most half a leaf apart and include both ends.
/// The occupied tests are exact; only the unknown-space test is sampled.
class CollisionChecker {
 public:
  CollisionChecker(const mapping::OccupancyOctree& octree, double clearance,
                   bool allow_unknown = false);

  bool point_free(const Eigen::Vector3d& p) const { return segment_free(p, p); }
  bool segment_free(const Eigen::Vector3d& a, const Eigen::Vector3d& b) const;

 private:
  const mapping::OccupancyOctree& octree_;
  double clearance_;
  bool allow_unknown_;
};

bool validate_segment(const mapping::OccupancyOctree& octree, const Eigen::Vector3d& a,
                      const Eigen::Vector3d& b, double clearance, bool allow_unknown = false);

/// Bidirectional RRT (RRT-Connect) with goal bias: with probability goal_bias a tree
/// samples the other tree's root. The path ends exactly at the goal. Deterministic for a
/// fixed seed. Returns nullopt when the iteration budget runs out; throws EndpointError
/// ("start not free" / "goal not free") up front.
std::optional<Path> plan_rrt(const mapping::OccupancyOctree& octree, const PlanRequest& request);

/// Random shortcut attempts followed by a greedy farthest-visible pass. Never lengthens
/// the path and keeps every segment valid.
Path shortcut(const Path& path, const mapping::OccupancyOctree& octree, double clearance,
              std::uint64_t seed, bool allow_unknown = false, int attempts = 100);

void write_path_csv(std::ostream& os, const Path& path);

}  // namespace skyloop::planning
