#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <future>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "skyloop/geometry.hpp"

namespace skyloop::graph {

using NodeId = std::int64_t;
using Vector6d = Eigen::Matrix<double, 6, 1>;
using Matrix6d = Eigen::Matrix<double, 6, 6>;
using Matrix36d = Eigen::Matrix<double, 3, 6>;

struct TrajectoryNode {
  NodeId id = 0;
  Timestamp time;
  Pose local_pose;   // from odometry, never optimized
  Pose global_pose;  // optimization variable
};

enum class ConstraintKind { odometry, loop_closure };

struct RelativeConstraint {
  NodeId from_id = 0;
  NodeId to_id = 0;
  Pose measured;  // from -> to
  double translation_weight = 20.0;  // 1/m
  double rotation_weight = 100.0;    // 1/rad
  ConstraintKind kind = ConstraintKind::odometry;
};

struct GpsMeasurement {
  Timestamp time;
  Eigen::Vector3d position_enu = Eigen::Vector3d::Zero();
  Eigen::Vector3d sigma_enu = Eigen::Vector3d::Ones();  // east, north, up
};

struct GpsConstraint {
  GpsMeasurement measurement;
  NodeId node_before = 0;
  NodeId node_after = 0;
  double beta = 0.0;
};

enum class GpsWeightingMode { inverse_diagonal, isotropic_max, affine };

struct GpsWeighting {
  GpsWeightingMode mode = GpsWeightingMode::isotropic_max;
  double a = 1.0;
  double b = 0.0;  // 1/m
  std::optional<double> huber_delta = 1.0;
  std::array<bool, 3> axis_mask = {true, true, true};

  void validate() const;
};

struct OrientationPrior {
  Rotation orientation;
  double weight = 100.0;  // 1/rad
};

/// Trajectory nodes plus the constraints between them. Node ids increase with time.
class PoseGraph {
 public:
  NodeId add_node(Timestamp time, const Pose& local_pose, const Pose& global_pose);
  void add_relative(const RelativeConstraint& c);
  void add_gps(const GpsConstraint& c);

  const std::vector<TrajectoryNode>& nodes() const { return nodes_; }
  std::vector<TrajectoryNode>& mutable_nodes() { return nodes_; }
  const std::vector<RelativeConstraint>& relative_constraints() const { return relative_; }
  const std::vector<GpsConstraint>& gps_constraints() const { return gps_; }

  /// Index into nodes() for an id, or throws std::out_of_range.
  std::size_t index_of(NodeId id) const;
  const TrajectoryNode& node(NodeId id) const { return nodes_[index_of(id)]; }
  bool empty() const { return nodes_.empty(); }

  std::optional<OrientationPrior> initial_orientation_prior;

 private:
  std::vector<TrajectoryNode> nodes_;
  std::vector<RelativeConstraint> relative_;
  std::vector<GpsConstraint> gps_;
};

/// Brackets the measurement time with adjacent nodes. A measurement exactly at a node
/// time pairs forward with beta = 0, except at the last node, which pairs backward with
/// beta = 1. Returns nullopt outside the trajectory's time span.
std::optional<GpsConstraint> attach_gps(const PoseGraph& graph, const GpsMeasurement& m);

/// Interpolated trajectory position minus the GPS position, ENU axes.
Eigen::Vector3d gps_residual(const Pose& pose_n, const Pose& pose_n1, const GpsConstraint& c);

/// Per-axis multipliers that turn a GPS residual into its weighted cost (masked axes get 0).
Eigen::Vector3d gps_axis_weights(const Eigen::Vector3d& sigma, const GpsWeighting& w);
Eigen::Vector3d gps_weighted_cost(const Eigen::Vector3d& residual, const Eigen::Vector3d& sigma,
                                  const GpsWeighting& w);

struct HuberValue {
  double value = 0.0;
  double derivative = 0.0;  // d value / d squared_norm
};

/// Huber loss of r = sqrt(squared_norm): r^2 inside delta, 2 delta r - delta^2 outside.
HuberValue huber_loss(double squared_norm, double delta);

/// Weighted error of inverse(pose_i) * pose_j against the measurement:
/// [translation (m) * tw ; log(rotation error) (rad) * rw].
Vector6d relative_residual(const Pose& pose_i, const Pose& pose_j, const RelativeConstraint& c);

/// Adds an absolute orientation prior on the first node, tying the trajectory to the
/// ENU map frame the way a constraint against a virtual origin trajectory would.
void set_initial_orientation(PoseGraph& graph, const Rotation& q0, double weight);

/// Unweighted orientation prior error log(q0^-1 * R).
Eigen::Vector3d orientation_prior_residual(const Pose& pose, const Rotation& q0);

// Jacobians are taken with respect to the tangent increment [dt; dphi] applied by retract().

/// t + dt, R * exp(dphi).
Pose retract(const Pose& p, const Vector6d& delta);

struct RelativeLinearization {
  Vector6d residual;
  Matrix6d jacobian_i;
  Matrix6d jacobian_j;
};
RelativeLinearization linearize_relative(const Pose& pose_i, const Pose& pose_j,
                                         const RelativeConstraint& c);

struct GpsLinearization {
  Eigen::Vector3d residual;  // unweighted
  Matrix36d jacobian_n;
  Matrix36d jacobian_n1;
};
GpsLinearization linearize_gps(const Pose& pose_n, const Pose& pose_n1, const GpsConstraint& c);

struct OrientationPriorLinearization {
  Eigen::Vector3d residual;  // unweighted
  Matrix36d jacobian;
};
OrientationPriorLinearization linearize_orientation_prior(const Pose& pose, const Rotation& q0);

struct SolverSettings {
  double initial_lambda = 1e-4;
  double lambda_increase = 10.0;
  double lambda_decrease = 10.0;
  int max_iterations = 50;
  double relative_tolerance = 1e-9;
  GpsWeighting gps;
  /// Pose prior on node 0 for graphs with neither GPS nor an orientation prior.
  double gauge_translation_weight = 1e3;
  double gauge_rotation_weight = 1e3;
  /// Position prior on node 0 when only an orientation prior anchors the graph.
  double weak_position_weight = 1.0;

  void validate() const;
};

struct OptimizationReport {
  int iterations = 0;
  double initial_cost = 0.0;
  double final_cost = 0.0;
  bool converged = false;
  std::vector<double> cost_history;  // cost after each accepted step, starting with initial
};

struct OptimizationResult {
  std::vector<Pose> global_poses;  // same order as graph.nodes()
  Pose correction;                 // new map->local transform
  OptimizationReport report;
};

/// Normal equations cannot be solved: the graph lacks a prior or GPS anchor.
class GaugeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Sum of squared relative residuals, robustified weighted GPS costs and priors.
double total_cost(const PoseGraph& graph, const std::vector<Pose>& poses,
                  const SolverSettings& settings);

/// Levenberg-Marquardt over all global poses. Throws GaugeError for under-constrained graphs.
OptimizationResult optimize(const PoseGraph& graph, const SolverSettings& settings);

/// Writes optimized poses for the first `snapshot_node_count` nodes; later nodes are
/// re-expressed through the new correction. Returns the correction.
Pose merge_result(PoseGraph& live, const OptimizationResult& result,
                  std::size_t snapshot_node_count);

/// Runs one optimization at a time over a graph snapshot.
/// Deferred mode runs on the caller's thread and reports completion after a fixed number
/// of polls, which makes replay deterministic; threaded mode uses std::async.
class BackgroundOptimizer {
 public:
  enum class Mode { deferred, threaded };

  struct Outcome {
    std::size_t snapshot_node_count = 0;
    OptimizationResult result;
  };

  explicit BackgroundOptimizer(SolverSettings settings, Mode mode = Mode::deferred,
                               int completion_delay_polls = 0);

  bool busy() const { return busy_; }
  /// Throws std::logic_error when an optimization is already in flight.
  void start(PoseGraph snapshot);
  /// Result once finished; rethrows solver errors (e.g. GaugeError).
  std::optional<Outcome> poll();
  /// Blocks until the in-flight optimization (if any) finishes.
  std::optional<Outcome> wait();

 private:
  SolverSettings settings_;
  Mode mode_;
  int delay_;
  bool busy_ = false;
  int polls_left_ = 0;
  std::future<Outcome> future_;
};

/// Line-oriented dump: NODE / EDGE_REL / EDGE_GPS records, global poses.
void write_graph_text(std::ostream& os, const PoseGraph& graph);
/// Inverse of write_graph_text; local poses are set equal to the stored global poses.
PoseGraph read_graph_text(std::istream& is);

std::string to_string(ConstraintKind kind);
std::string to_string(GpsWeightingMode mode);
GpsWeightingMode parse_weighting_mode(std::string_view s);

}  // namespace skyloop::graph
