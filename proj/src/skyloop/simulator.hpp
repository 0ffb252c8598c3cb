#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "skyloop/geodesy.hpp"
#include "skyloop/geometry.hpp"
#include "skyloop/graph.hpp"
#include "skyloop/mapping.hpp"
#include "skyloop/smoothing.hpp"

namespace skyloop::sim {

struct AxisBox {
  Eigen::Vector3d min = Eigen::Vector3d::Zero();
  Eigen::Vector3d max = Eigen::Vector3d::Zero();
};

struct TimeWindow {
  double begin = 0.0;
  double end = 0.0;

  bool contains(double t) const { return t >= begin && t <= end; }
};

struct CircleTrajectory {
  double radius = 10.0;
  double height = 5.0;
  double angular_rate = 0.1;  // rad/s
  double laps = 1.0;
  Eigen::Vector2d center = Eigen::Vector2d::Zero();
};

struct SimConfig {
  enum class TrajectoryKind { circle, waypoints };

  TrajectoryKind trajectory = TrajectoryKind::circle;
  CircleTrajectory circle;
  std::vector<Eigen::Vector3d> waypoints;  // map frame
  double speed = 1.0;                      // m/s along waypoints

  double odom_rate = 10.0;  // Hz
  double gps_rate = 1.0;    // Hz
  Eigen::Vector3d gps_sigma{0.5, 0.5, 1.0};           // actual noise, m
  Eigen::Vector3d gps_reported_sigma{0.5, 0.5, 1.0};  // what the receiver reports, m
  double gps_altitude_drift = 0.0;                    // m, linear ramp over the flight
  std::vector<TimeWindow> gps_dropout;

  double odom_drift_translation = 0.01;  // m per m traveled
  Eigen::Vector3d odom_drift_direction{0.0, 0.0, 1.0};
  double odom_drift_yaw = 0.0005;           // rad per m traveled
  double odom_noise_translation = 0.002;    // m per tick
  double odom_noise_yaw = 0.0002;           // rad per tick

  double loop_radius = 2.0;  // m
  double loop_min_gap = 30.0;  // s
  int loop_every_n = 10;       // ticks between loop searches
  double loop_noise_translation = 0.02;   // m
  double loop_noise_rotation_deg = 0.2;

  double optimization_period = 60.0;  // s

  std::vector<AxisBox> environment;
  double lidar_range = 20.0;
  int scan_every_n = 5;
  double scan_spacing = 0.4;

  /// Hidden map <- local transform of the odometry frame.
  Eigen::Vector3d local_offset = Eigen::Vector3d::Zero();
  double local_yaw_deg = 0.0;
  geodesy::GeoPoint geo_origin{45.8, 15.97, 120.0};
  double heading_noise_deg = 0.0;

  std::uint64_t seed = 42;

  void validate() const;
  Pose hidden_map_from_local() const;
};

struct GpsFix {
  Timestamp time;
  geodesy::GeoPoint position;
  Eigen::Vector3d sigma_enu = Eigen::Vector3d::Ones();
};

struct LoopEvent {
  graph::NodeId from_id = 0;
  graph::NodeId to_id = 0;
  Pose measured;
};

struct Scan {
  std::size_t tick = 0;
  Timestamp time;
  std::vector<Eigen::Vector3d> points;  // body frame
};

struct SimTrace {
  std::vector<StampedPose> ground_truth;  // map (sim ENU) frame
  std::vector<StampedPose> odometry;      // local frame
  std::vector<GpsFix> gps;
  std::vector<LoopEvent> loop_events;     // ids are tick indices
  std::vector<Scan> scans;
  Rotation initial_orientation;           // magnetometer/autopilot reading at takeoff
  geodesy::GeoPoint geo_origin;           // origin of the ground-truth ENU frame
};

/// Analytic ground truth at `t`; heading follows the direction of travel.
Pose ground_truth_pose(const SimConfig& config, double t);
double flight_duration(const SimConfig& config);

SimTrace generate(const SimConfig& config);

/// Lattice samples on box faces within `range` of the pose, in the body frame.
std::vector<Eigen::Vector3d> synth_scan(const std::vector<AxisBox>& environment,
                                        const Pose& true_pose, double range,
                                        double spacing = 0.4);

struct PipelineSettings {
  bool use_gps = true;
  graph::SolverSettings solver;
  smoothing::SmootherParams smoother;
  mapping::SubmapGrid::Params submap;
  mapping::OccupancyOctree::Params octree;
  double cloud_threshold = mapping::kDefaultCloudThreshold;
  double optimization_period = 60.0;
  bool final_optimization = true;
  bool threaded_optimizer = false;
  int completion_delay_ticks = 0;
  double odom_translation_weight = 20.0;
  double odom_rotation_weight = 100.0;
  double loop_translation_weight = 10.0;
  double loop_rotation_weight = 50.0;
  bool use_initial_orientation = true;
  double initial_orientation_weight = 100.0;
};

struct OptimizationRecord {
  Timestamp started;
  Timestamp merged;
  std::size_t node_count = 0;
  graph::OptimizationReport report;
};

struct RunMetrics {
  double position_rmse = 0.0;          // final optimized nodes vs ground truth, m
  double takeoff_landing_alt_diff = 0.0;  // estimated z(last) - z(first), m
  double landing_altitude_error = 0.0;    // the above minus the true difference, m
  double loop_gap_before = 0.0;           // m
  double loop_gap_after = 0.0;            // m
  double loop_gap_reduction_pct = 0.0;
  double max_jump_raw = 0.0;              // largest inter-tick position change, m
  double max_jump_smoothed = 0.0;
};

struct RunArtifacts {
  std::vector<StampedPose> pose_raw;
  std::vector<StampedPose> pose_smoothed;
  std::vector<double> error_raw;       // per tick, m
  std::vector<double> error_smoothed;  // per tick, m
  std::vector<graph::GpsMeasurement> gps_enu;
  std::optional<geodesy::GeoPoint> enu_origin;  // first GPS fix when GPS is used
  std::vector<Eigen::Vector3d> reference_positions;  // ground truth in the estimate's frame
  std::vector<mapping::SubmapCloud> clouds;
  mapping::OccupancyOctree octree;
  graph::PoseGraph graph;
  std::vector<OptimizationRecord> optimizations;
  RunMetrics metrics;
};

/// Replays a trace through graph building, periodic optimization, smoothing and mapping.
/// Propagates graph::GaugeError.
RunArtifacts run_pipeline(const SimTrace& trace, const PipelineSettings& settings);

}  // namespace skyloop::sim
