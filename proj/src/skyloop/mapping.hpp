#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <mutex>
#include <optional>
#include <unordered_map>
#include <vector>

#include <Eigen/Core>

#include "skyloop/geometry.hpp"

namespace skyloop::mapping {

struct VoxelIndex {
  std::int32_t x = 0, y = 0, z = 0;

  friend bool operator==(const VoxelIndex&, const VoxelIndex&) = default;
  friend auto operator<=>(const VoxelIndex&, const VoxelIndex&) = default;
};

struct VoxelIndexHash {
  std::size_t operator()(const VoxelIndex& i) const noexcept;
};

double logit(double p);
double sigmoid(double log_odds);

/// Sparse voxel grid of occupancy probabilities. Unobserved voxels read as 0.5.
/// Indices are anchored at the grid frame origin, so the grid grows without bound.
class ProbabilityGrid {
 public:
  struct Params {
    double hit_log_odds = 0.6190392084062235;  // logit(0.65)
    double clamp_min = -2.0;
    double clamp_max = 3.5;
  };

  explicit ProbabilityGrid(double edge) : ProbabilityGrid(edge, Params()) {}
  ProbabilityGrid(double edge, Params params);

  double edge() const { return edge_; }
  VoxelIndex index_of(const Eigen::Vector3d& p) const;
  Eigen::Vector3d center_of(const VoxelIndex& i) const;

  double probability(const VoxelIndex& i) const;
  void set_probability(const VoxelIndex& i, double p);
  /// One hit: log-odds += hit increment, clamped.
  void apply_hit(const VoxelIndex& i);

  std::size_t size() const { return cells_.size(); }
  /// Observed voxels in ascending index order.
  std::vector<std::pair<VoxelIndex, double>> sorted_cells() const;
  /// Inclusive index bounds of observed voxels; requires size() > 0.
  std::pair<VoxelIndex, VoxelIndex> bounds() const;

 private:
  double edge_;
  Params params_;
  std::unordered_map<VoxelIndex, double, VoxelIndexHash> cells_;
};

/// Dual-resolution occupancy grid built from a fixed number of scans.
class SubmapGrid {
 public:
  struct Params {
    double high_res_edge = 0.1;
    double low_res_edge = 0.4;
    int scans_per_submap = 40;
    ProbabilityGrid::Params grid;

    void validate() const;
  };

  SubmapGrid(int id, const Pose& origin) : SubmapGrid(id, origin, Params()) {}
  SubmapGrid(int id, const Pose& origin, Params params);

  int id() const { return id_; }
  const Pose& origin() const { return origin_; }
  const ProbabilityGrid& high_res() const { return high_; }
  const ProbabilityGrid& low_res() const { return low_; }
  ProbabilityGrid& mutable_low_res() { return low_; }
  int scans_inserted() const { return scans_; }
  int scans_per_submap() const { return params_.scans_per_submap; }
  bool finished() const { return scans_ == params_.scans_per_submap; }

  /// Hits every voxel containing a point, once per scan and resolution.
  /// Throws std::logic_error when the submap is already finished.
  void insert_scan(const std::vector<Eigen::Vector3d>& points_in_submap_frame);

 private:
  int id_;
  Pose origin_;
  Params params_;
  ProbabilityGrid high_;
  ProbabilityGrid low_;
  int scans_ = 0;
};

struct SubmapCloud {
  int submap_id = 0;
  std::vector<Eigen::Vector3d> points;  // global frame
};

inline constexpr double kDefaultCloudThreshold = 0.7;

/// Centers of low-resolution voxels whose probability strictly exceeds `threshold`,
/// mapped through the submap's global pose. Requires a finished submap unless
/// `require_finished` is false.
SubmapCloud extract_cloud(const SubmapGrid& submap, const Pose& submap_global_pose,
                          double threshold = kDefaultCloudThreshold,
                          bool require_finished = true);

void write_clouds_csv(std::ostream& os, const std::vector<SubmapCloud>& clouds);

enum class Occupancy { free, occupied, unknown };
const char* to_string(Occupancy o);

/// Octree key: leaf-resolution voxel coordinates offset by 2^15.
struct OctreeKey {
  std::uint16_t x = 0, y = 0, z = 0;
  friend bool operator==(const OctreeKey&, const OctreeKey&) = default;
  friend auto operator<=>(const OctreeKey&, const OctreeKey&) = default;
};

/// Log-odds occupancy octree, 16 levels deep. Leaves hold clamped log-odds; a childless
/// node above leaf depth stands for a pruned block of identical leaves.
class OccupancyOctree {
 public:
  static constexpr int kDepth = 16;

  struct Params {
    double resolution = 0.2;
    double hit = 0.85;
    double miss = -0.4;
    double clamp_min = -2.0;
    double clamp_max = 3.5;
    double occupied_threshold = 0.0;  // occupied: log-odds > threshold
    double free_threshold = 0.0;      // free: log-odds < threshold
    bool carve_free_space = true;

    void validate() const;
  };

  struct Leaf {
    OctreeKey key;  // minimum corner, leaf resolution
    int depth = kDepth;
    double log_odds = 0.0;

    std::uint32_t span() const { return 1u << (kDepth - depth); }
  };

  OccupancyOctree() : OccupancyOctree(Params()) {}
  explicit OccupancyOctree(Params params);
  OccupancyOctree(const OccupancyOctree& other);
  OccupancyOctree& operator=(const OccupancyOctree& other);
  OccupancyOctree(OccupancyOctree&&) noexcept;
  OccupancyOctree& operator=(OccupancyOctree&&) noexcept;
  ~OccupancyOctree();

  const Params& params() const { return params_; }
  double resolution() const { return params_.resolution; }

  /// Throws std::out_of_range outside the addressable cube.
  OctreeKey key_of(const Eigen::Vector3d& p) const;
  bool in_range(const Eigen::Vector3d& p) const;
  Eigen::Vector3d center_of(const OctreeKey& k) const;

  Occupancy query(const Eigen::Vector3d& p) const;
  Occupancy query(const OctreeKey& k) const;
  /// Log-odds of the containing leaf, or nullopt when unknown.
  std::optional<double> log_odds(const OctreeKey& k) const;
  Occupancy classify(double log_odds) const;

  /// Adds `delta` to the leaf log-odds (starting from 0), clamped.
  void update(const OctreeKey& k, double delta);
  void set_log_odds(const OctreeKey& k, double value);

  /// Voxels crossed by the segment origin -> end, excluding the end voxel.
  std::vector<OctreeKey> ray_keys(const Eigen::Vector3d& origin, const Eigen::Vector3d& end) const;

  /// One hit per distinct endpoint voxel; when carving, one miss per distinct voxel
  /// crossed by a ray that is not also an endpoint of this cloud.
  void insert_cloud(const SubmapCloud& cloud, const Eigen::Vector3d& sensor_origin);

  /// Collapses every inner node whose eight children are leaves with identical log-odds.
  void prune();

  /// Stored leaves (pruned blocks reported once, with their depth), in key order.
  std::vector<Leaf> leaves() const;
  std::size_t node_count() const;
  /// Leaf-resolution keys of occupied voxels intersecting [lo, hi].
  void for_each_occupied_in_box(const Eigen::Vector3d& lo, const Eigen::Vector3d& hi,
                                const std::function<void(const OctreeKey&)>& fn) const;

  /// `OCC x y z state logodds`, one line per leaf-resolution voxel.
  void write_text(std::ostream& os) const;
  /// Binary AOK1 format, see docs/octree_format.md.
  void write_binary(std::ostream& os) const;
  static OccupancyOctree read_binary(std::istream& is);

 private:
  struct Node;
  Params params_;
  std::unique_ptr<Node> root_;
};

/// Holds the octree readers plan against; writers publish whole new snapshots.
class OctreePublisher {
 public:
  explicit OctreePublisher(OccupancyOctree initial = OccupancyOctree());
  std::shared_ptr<const OccupancyOctree> snapshot() const;
  void publish(OccupancyOctree next);

 private:
  mutable std::mutex mutex_;
  std::shared_ptr<const OccupancyOctree> current_;
};

}  // namespace skyloop::mapping
