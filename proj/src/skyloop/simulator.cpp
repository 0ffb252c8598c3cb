#include "skyloop/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "skyloop/random.hpp"

namespace skyloop::sim {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kDeg = kPi / 180.0;

void require(bool ok, const char* key, const char* what) {
  if (!ok) throw std::invalid_argument(std::string(key) + ": " + what);
}

std::size_t tick_count(const SimConfig& c) {
  return static_cast<std::size_t>(std::floor(flight_duration(c) * c.odom_rate + 1e-9)) + 1;
}

}  // namespace

void SimConfig::validate() const {
  require(odom_rate > 0.0 && std::isfinite(odom_rate), "sim.odom_rate", "must be > 0");
  require(gps_rate > 0.0 && std::isfinite(gps_rate), "sim.gps_rate", "must be > 0");
  require(gps_rate <= odom_rate, "sim.gps_rate", "must not exceed sim.odom_rate");
  require((gps_sigma.array() >= 0.0).all(), "sim.gps_sigma", "must be >= 0");
  require((gps_reported_sigma.array() > 0.0).all(), "sim.gps_reported_sigma", "must be > 0");
  for (const auto& w : gps_dropout) {
    require(w.begin <= w.end, "sim.gps_dropout", "window begin must not exceed end");
  }
  require(odom_drift_translation >= 0.0, "sim.odom_drift_translation", "must be >= 0");
  require(odom_drift_direction.norm() > 0.0 || odom_drift_translation == 0.0,
          "sim.odom_drift_direction", "must be non-zero");
  require(odom_noise_translation >= 0.0, "sim.odom_noise_translation", "must be >= 0");
  require(odom_noise_yaw >= 0.0, "sim.odom_noise_yaw", "must be >= 0");
  require(loop_radius >= 0.0, "sim.loop_radius", "must be >= 0");
  require(loop_min_gap >= 0.0, "sim.loop_min_gap", "must be >= 0");
  require(loop_every_n >= 1, "sim.loop_every_n", "must be >= 1");
  require(loop_noise_translation >= 0.0, "sim.loop_noise_translation", "must be >= 0");
  require(loop_noise_rotation_deg >= 0.0, "sim.loop_noise_rotation_deg", "must be >= 0");
  require(optimization_period > 0.0, "sim.optimization_period", "must be > 0");
  require(lidar_range >= 0.0, "sim.lidar_range", "must be >= 0");
  require(scan_every_n >= 1, "sim.scan_every_n", "must be >= 1");
  require(scan_spacing > 0.0, "sim.scan_spacing", "must be > 0");
  require(heading_noise_deg >= 0.0, "sim.heading_noise_deg", "must be >= 0");
  for (const auto& b : environment) {
    require((b.min.array() <= b.max.array()).all(), "sim.environment", "box min must not exceed max");
  }
  if (trajectory == TrajectoryKind::circle) {
    require(circle.radius > 0.0, "sim.circle.radius", "must be > 0");
    require(circle.angular_rate != 0.0 && std::isfinite(circle.angular_rate),
            "sim.circle.angular_rate", "must be non-zero");
    require(circle.laps > 0.0, "sim.circle.laps", "must be > 0");
  } else {
    require(waypoints.size() >= 2, "sim.waypoints", "need at least two waypoints");
    require(speed > 0.0, "sim.speed", "must be > 0");
  }
  geo_origin.validate();
}

Pose SimConfig::hidden_map_from_local() const {
  return Pose(Rotation::from_yaw(local_yaw_deg * kDeg), local_offset);
}

double flight_duration(const SimConfig& c) {
  if (c.trajectory == SimConfig::TrajectoryKind::circle) {
    return c.circle.laps * 2.0 * kPi / std::abs(c.circle.angular_rate);
  }
  double len = 0.0;
  for (std::size_t i = 1; i < c.waypoints.size(); ++i) len += (c.waypoints[i] - c.waypoints[i - 1]).norm();
  return len / c.speed;
}

Pose ground_truth_pose(const SimConfig& c, double t) {
  if (c.trajectory == SimConfig::TrajectoryKind::circle) {
    const auto& k = c.circle;
    const double phi = -0.5 * kPi + k.angular_rate * t;
    const Eigen::Vector3d p(k.center.x() + k.radius * std::cos(phi),
                            k.center.y() + k.radius * std::sin(phi), k.height);
    const double yaw = phi + (k.angular_rate > 0.0 ? 0.5 * kPi : -0.5 * kPi);
    return Pose(Rotation::from_yaw(yaw), p);
  }
  double remaining = std::max(0.0, t) * c.speed;
  for (std::size_t i = 1; i < c.waypoints.size(); ++i) {
    const Eigen::Vector3d seg = c.waypoints[i] - c.waypoints[i - 1];
    const double len = seg.norm();
    const double yaw = std::atan2(seg.y(), seg.x());
    if (remaining <= len || i + 1 == c.waypoints.size()) {
      const double u = len > 0.0 ? std::min(remaining / len, 1.0) : 1.0;
      return Pose(Rotation::from_yaw(yaw), c.waypoints[i - 1] + u * seg);
    }
    remaining -= len;
  }
  return Pose::from_translation(c.waypoints.front());
}

std::vector<Eigen::Vector3d> synth_scan(const std::vector<AxisBox>& environment,
                                        const Pose& true_pose, double range, double spacing) {
  std::vector<Eigen::Vector3d> out;
  const Pose body_from_map = inverse(true_pose);
  for (const auto& box : environment) {
    const Eigen::Vector3d ext = box.max - box.min;
    for (int axis = 0; axis < 3; ++axis) {
      const int u = (axis + 1) % 3;
      const int v = (axis + 2) % 3;
      const int nu = std::max(1, static_cast<int>(std::round(ext[u] / spacing)));
      const int nv = std::max(1, static_cast<int>(std::round(ext[v] / spacing)));
      for (double face : {box.min[axis], box.max[axis]}) {
        for (int i = 0; i < nu; ++i) {
          for (int j = 0; j < nv; ++j) {
            Eigen::Vector3d p;
            p[axis] = face;
            p[u] = box.min[u] + (i + 0.5) * ext[u] / nu;
            p[v] = box.min[v] + (j + 0.5) * ext[v] / nv;
            if ((p - true_pose.translation).norm() <= range) out.push_back(body_from_map.transform(p));
          }
        }
        if (ext[axis] == 0.0) break;  // degenerate box: one face
      }
    }
  }
  return out;
}

SimTrace generate(const SimConfig& config) {
  config.validate();
  SimTrace trace;
  trace.geo_origin = config.geo_origin;
  const std::size_t n = tick_count(config);
  const double duration = flight_duration(config);

  for (std::size_t k = 0; k < n; ++k) {
    const double t = static_cast<double>(k) / config.odom_rate;
    trace.ground_truth.push_back({Timestamp(t), ground_truth_pose(config, t)});
  }

  // Odometry: dead reckoning of ground-truth increments with drift and noise.
  RandomStream odo_rng(config.seed, "sim.odometry");
  const Eigen::Vector3d drift_dir = config.odom_drift_translation > 0.0
                                        ? Eigen::Vector3d(config.odom_drift_direction.normalized())
                                        : Eigen::Vector3d::Zero();
  Pose odom = compose(inverse(config.hidden_map_from_local()), trace.ground_truth[0].pose);
  trace.odometry.push_back({trace.ground_truth[0].time, odom});
  for (std::size_t k = 1; k < n; ++k) {
    const Pose delta = compose(inverse(trace.ground_truth[k - 1].pose), trace.ground_truth[k].pose);
    const double dist = delta.translation.norm();
    const double yaw_err = config.odom_drift_yaw * dist + odo_rng.normal(config.odom_noise_yaw);
    Eigen::Vector3d t_noise;
    for (int i = 0; i < 3; ++i) t_noise[i] = odo_rng.normal(config.odom_noise_translation);
    const Pose noisy(Rotation::from_yaw(yaw_err) * delta.rotation, delta.translation + t_noise);
    odom = compose(odom, noisy);
    odom.translation += drift_dir * (config.odom_drift_translation * dist);
    trace.odometry.push_back({trace.ground_truth[k].time, odom});
  }

  // GPS: ground truth + noise + altitude ramp, outside dropout windows.
  RandomStream gps_rng(config.seed, "sim.gps");
  const geodesy::EnuFrame sim_frame(config.geo_origin);
  for (std::size_t j = 0;; ++j) {
    const double t = static_cast<double>(j) / config.gps_rate;
    if (t > duration + 1e-9) break;
    Eigen::Vector3d noise;
    for (int i = 0; i < 3; ++i) noise[i] = gps_rng.normal(config.gps_sigma[i]);
    const bool dropped = std::any_of(config.gps_dropout.begin(), config.gps_dropout.end(),
                                     [&](const TimeWindow& w) { return w.contains(t); });
    if (dropped) continue;
    Eigen::Vector3d p = ground_truth_pose(config, t).translation + noise;
    p.z() += config.gps_altitude_drift * (duration > 0.0 ? t / duration : 0.0);
    trace.gps.push_back({Timestamp(t), sim_frame.geodetic_of(p), config.gps_reported_sigma});
  }

  // Loop closures: one per searched node, against its nearest sufficiently old node.
  RandomStream loop_rng(config.seed, "sim.loops");
  for (std::size_t j = 0; j < n; j += static_cast<std::size_t>(config.loop_every_n)) {
    const auto& gj = trace.ground_truth[j];
    std::size_t best = n;
    double best_dist = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < j; ++i) {
      const auto& gi = trace.ground_truth[i];
      if (!(gj.time - gi.time > config.loop_min_gap)) break;  // times increase with i
      const double d = (gj.pose.translation - gi.pose.translation).norm();
      if (d < config.loop_radius && d < best_dist) {
        best = i;
        best_dist = d;
      }
    }
    if (best == n) continue;
    Pose rel = compose(inverse(trace.ground_truth[best].pose), gj.pose);
    Eigen::Vector3d tn, rn;
    for (int i = 0; i < 3; ++i) tn[i] = loop_rng.normal(config.loop_noise_translation);
    for (int i = 0; i < 3; ++i) rn[i] = loop_rng.normal(config.loop_noise_rotation_deg * kDeg);
    rel = Pose(rel.rotation * Rotation::exp(rn), rel.translation + tn);
    trace.loop_events.push_back({static_cast<graph::NodeId>(best), static_cast<graph::NodeId>(j), rel});
  }

  for (std::size_t k = 0; k < n; k += static_cast<std::size_t>(config.scan_every_n)) {
    trace.scans.push_back({k, trace.ground_truth[k].time,
                           synth_scan(config.environment, trace.ground_truth[k].pose,
                                      config.lidar_range, config.scan_spacing)});
  }

  RandomStream heading_rng(config.seed, "sim.heading");
  trace.initial_orientation =
      Rotation::from_yaw(heading_rng.normal(config.heading_noise_deg * kDeg)) *
      trace.ground_truth[0].pose.rotation;
  return trace;
}

// ---------------------------------------------------------------------------
// Pipeline replay

namespace {

double max_jump(const std::vector<StampedPose>& series) {
  double best = 0.0;
  for (std::size_t i = 1; i < series.size(); ++i) {
    best = std::max(best, (series[i].pose.translation - series[i - 1].pose.translation).norm());
  }
  return best;
}

double end_to_start_gap(const std::vector<Eigen::Vector3d>& est,
                        const std::vector<Eigen::Vector3d>& ref) {
  return ((est.back() - est.front()) - (ref.back() - ref.front())).norm();
}

}  // namespace

RunArtifacts run_pipeline(const SimTrace& trace, const PipelineSettings& s) {
  s.smoother.validate();
  s.solver.validate();
  if (trace.odometry.empty()) throw std::invalid_argument("run_pipeline: empty trace");
  for (const auto& e : trace.loop_events) {
    if (e.from_id < 0 || e.to_id < 0 ||
        static_cast<std::size_t>(std::max(e.from_id, e.to_id)) >= trace.odometry.size()) {
      throw std::invalid_argument("run_pipeline: loop event references a missing node");
    }
  }

  RunArtifacts out;
  out.octree = mapping::OccupancyOctree(s.octree);
  auto& graph = out.graph;
  const auto& odo = trace.odometry;
  const std::size_t n = odo.size();

  Pose correction = Pose::identity();
  if (s.use_initial_orientation) {
    const Pose& o0 = odo.front().pose;
    const Rotation r = trace.initial_orientation * o0.rotation.inverse();
    correction = Pose(r, o0.translation - r.rotate(o0.translation));
  }
  const Pose initial_correction = correction;
  smoothing::CorrectionSmoother smoother(correction, s.smoother);
  graph::BackgroundOptimizer optimizer(
      s.solver,
      s.threaded_optimizer ? graph::BackgroundOptimizer::Mode::threaded
                           : graph::BackgroundOptimizer::Mode::deferred,
      s.completion_delay_ticks);

  std::optional<geodesy::EnuFrame> enu;
  std::size_t gps_next = 0, loop_next = 0, scan_next = 0;
  std::optional<mapping::SubmapGrid> submap;
  int next_submap_id = 0;
  Timestamp last_optimization = odo.front().time;
  Timestamp optimization_started;

  auto take_gps = [&](auto&& until) {
    while (gps_next < trace.gps.size() && until(trace.gps[gps_next].time)) {
      const auto& fix = trace.gps[gps_next++];
      if (!s.use_gps) continue;
      if (!enu) {
        enu.emplace(fix.position);
        out.enu_origin = fix.position;
      }
      const graph::GpsMeasurement m{fix.time, enu->enu_of(fix.position), fix.sigma_enu};
      if (auto c = graph::attach_gps(graph, m)) {
        graph.add_gps(*c);
        out.gps_enu.push_back(m);
      }
    }
  };

  auto apply = [&](const graph::BackgroundOptimizer::Outcome& o, Timestamp now) {
    correction = graph::merge_result(graph, o.result, o.snapshot_node_count);
    smoother.on_optimization_event(correction, now);
    out.optimizations.push_back({optimization_started, now, o.snapshot_node_count, o.result.report});
  };

  for (std::size_t k = 0; k < n; ++k) {
    const Timestamp t = odo[k].time;
    const Pose& local = odo[k].pose;
    graph.add_node(t, local, compose(correction, local));
    if (k == 0 && s.use_initial_orientation) {
      graph::set_initial_orientation(graph, trace.initial_orientation, s.initial_orientation_weight);
    }
    if (k > 0) {
      graph.add_relative({static_cast<graph::NodeId>(k - 1), static_cast<graph::NodeId>(k),
                          compose(inverse(odo[k - 1].pose), local), s.odom_translation_weight,
                          s.odom_rotation_weight, graph::ConstraintKind::odometry});
    }
    while (loop_next < trace.loop_events.size() &&
           trace.loop_events[loop_next].to_id <= static_cast<graph::NodeId>(k)) {
      const auto& e = trace.loop_events[loop_next++];
      graph.add_relative({e.from_id, e.to_id, e.measured, s.loop_translation_weight,
                          s.loop_rotation_weight, graph::ConstraintKind::loop_closure});
    }
    // A fix exactly at this node's time is attached once the next node brackets it.
    take_gps([&](Timestamp gt) { return gt < t; });

    while (scan_next < trace.scans.size() && trace.scans[scan_next].tick == k) {
      const auto& scan = trace.scans[scan_next++];
      if (!submap) submap.emplace(next_submap_id++, local, s.submap);
      const Pose submap_from_body = compose(inverse(submap->origin()), local);
      std::vector<Eigen::Vector3d> pts;
      pts.reserve(scan.points.size());
      for (const auto& p : scan.points) pts.push_back(submap_from_body.transform(p));
      submap->insert_scan(pts);
      if (submap->finished()) {
        const Pose global = compose(correction, submap->origin());
        auto cloud = mapping::extract_cloud(*submap, global, s.cloud_threshold);
        out.octree.insert_cloud(cloud, global.translation);
        out.clouds.push_back(std::move(cloud));
        submap.reset();
      }
    }

    if (t - last_optimization >= s.optimization_period - 1e-9 && !optimizer.busy()) {
      optimization_started = t;
      last_optimization = t;
      optimizer.start(graph);
    }
    if (auto o = optimizer.poll()) apply(*o, t);

    out.pose_raw.push_back({t, compose(correction, local)});
    out.pose_smoothed.push_back({t, smoother.global_pose(local, t)});
  }

  const Timestamp t_end = odo.back().time;
  take_gps([&](Timestamp gt) { return gt <= t_end; });
  if (auto o = optimizer.wait()) apply(*o, t_end);
  if (s.final_optimization) {
    optimization_started = t_end;
    optimizer.start(graph);
    if (auto o = optimizer.wait()) apply(*o, t_end);
  }

  // Ground truth expressed in the estimate's frame.
  auto& ref = out.reference_positions;
  if (enu) {
    const geodesy::EnuFrame sim_frame(trace.geo_origin);
    for (const auto& g : trace.ground_truth) ref.push_back(enu->enu_of(sim_frame.geodetic_of(g.pose.translation)));
  } else {
    const Pose align = compose(compose(initial_correction, odo.front().pose),
                               inverse(trace.ground_truth.front().pose));
    for (const auto& g : trace.ground_truth) ref.push_back(align.transform(g.pose.translation));
  }
  if (ref.size() != n) throw std::invalid_argument("run_pipeline: ground truth and odometry lengths differ");

  std::vector<Eigen::Vector3d> final_pos, initial_pos;
  double sq = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    final_pos.push_back(graph.nodes()[k].global_pose.translation);
    initial_pos.push_back(compose(initial_correction, odo[k].pose).translation);
    sq += (final_pos[k] - ref[k]).squaredNorm();
    out.error_raw.push_back((out.pose_raw[k].pose.translation - ref[k]).norm());
    out.error_smoothed.push_back((out.pose_smoothed[k].pose.translation - ref[k]).norm());
  }
  auto& m = out.metrics;
  m.position_rmse = std::sqrt(sq / static_cast<double>(n));
  m.takeoff_landing_alt_diff = final_pos.back().z() - final_pos.front().z();
  m.landing_altitude_error = m.takeoff_landing_alt_diff - (ref.back().z() - ref.front().z());
  m.loop_gap_before = end_to_start_gap(initial_pos, ref);
  m.loop_gap_after = end_to_start_gap(final_pos, ref);
  m.loop_gap_reduction_pct =
      m.loop_gap_before > 0.0 ? 100.0 * (1.0 - m.loop_gap_after / m.loop_gap_before) : 0.0;
  m.max_jump_raw = max_jump(out.pose_raw);
  m.max_jump_smoothed = max_jump(out.pose_smoothed);
  return out;
}

}  // namespace skyloop::sim
