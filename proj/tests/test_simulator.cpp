#include <doctest.h>

#include <cmath>
#include <set>

#include "skyloop/commands.hpp"
#include "skyloop/config.hpp"
#include "skyloop/simulator.hpp"

using namespace skyloop;
using namespace skyloop::sim;

namespace {

SimConfig quiet() {
  SimConfig c;
  c.odom_drift_translation = 0;
  c.odom_drift_yaw = 0;
  c.odom_noise_translation = 0;
  c.odom_noise_yaw = 0;
  c.gps_sigma = Eigen::Vector3d::Zero();
  c.loop_noise_translation = 0;
  c.loop_noise_rotation_deg = 0;
  return c;
}

RunConfig scenario(const std::string& name) {
  return load_run_config(std::string(SKYLOOP_SCENARIO_DIR) + "/" + name + ".conf");
}

}  // namespace

TEST_CASE("circle ground truth") {
  SimConfig c;
  CHECK(flight_duration(c) == doctest::Approx(2 * M_PI / 0.1));
  const Pose p0 = ground_truth_pose(c, 0.0);
  CHECK((p0.translation - Eigen::Vector3d(0, -10, 5)).norm() < 1e-12);
  for (double t : {0.0, 7.0, 31.4, 50.0}) {
    const Pose p = ground_truth_pose(c, t);
    CHECK(std::hypot(p.translation.x(), p.translation.y()) == doctest::Approx(10.0));
    // Body x axis points along the velocity.
    const Eigen::Vector3d v = (ground_truth_pose(c, t + 1e-6).translation - p.translation) / 1e-6;
    const Eigen::Vector3d fwd = p.rotation.matrix().col(0);
    CHECK(fwd.dot(v.normalized()) == doctest::Approx(1.0).epsilon(1e-6));
  }
}

TEST_CASE("waypoint ground truth") {
  SimConfig c;
  c.trajectory = SimConfig::TrajectoryKind::waypoints;
  c.waypoints = {{0, 0, 1}, {4, 0, 1}, {4, 3, 1}};
  c.speed = 2.0;
  CHECK(flight_duration(c) == doctest::Approx(3.5));
  CHECK((ground_truth_pose(c, 1.0).translation - Eigen::Vector3d(2, 0, 1)).norm() < 1e-12);
  CHECK((ground_truth_pose(c, 3.0).translation - Eigen::Vector3d(4, 2, 1)).norm() < 1e-12);
}

TEST_CASE("config validation") {
  SimConfig c;
  c.gps_rate = 20;
  CHECK_THROWS_WITH_AS(c.validate(), doctest::Contains("sim.gps_rate"), std::invalid_argument);
  c = SimConfig();
  c.odom_rate = 0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
}

TEST_CASE("noise-free odometry equals ground truth") {
  const auto trace = generate(quiet());
  REQUIRE(trace.odometry.size() == trace.ground_truth.size());
  CHECK(trace.odometry.size() == 629);
  double worst = 0;
  for (std::size_t i = 0; i < trace.odometry.size(); ++i) {
    CHECK(trace.odometry[i].time == trace.ground_truth[i].time);
    worst = std::max(worst, (trace.odometry[i].pose.translation - trace.ground_truth[i].pose.translation).norm());
    worst = std::max(worst, angular_distance(trace.odometry[i].pose.rotation, trace.ground_truth[i].pose.rotation));
  }
  CHECK(worst < 1e-9);
}

TEST_CASE("translation drift accumulates with distance") {
  SimConfig c = quiet();
  c.odom_drift_translation = 0.01;
  const auto trace = generate(c);
  // Dead reckoning: 0.01 m of bias per meter along the drift direction over one circumference.
  const double oracle = 0.01 * 2 * M_PI * 10;
  const double err = (trace.odometry.back().pose.translation - trace.ground_truth.back().pose.translation).norm();
  CHECK(err == doctest::Approx(oracle).epsilon(0.2));
}

TEST_CASE("gps dropout") {
  SimConfig c = quiet();
  c.circle.angular_rate = 2 * M_PI / 120.0;
  c.gps_dropout = {{30, 60}};
  const auto trace = generate(c);
  CHECK(std::abs(static_cast<int>(trace.gps.size()) - 90) <= 1);
  for (const auto& g : trace.gps) CHECK_FALSE((g.time.seconds >= 30 && g.time.seconds <= 60));
  for (std::size_t i = 1; i < trace.gps.size(); ++i) CHECK(trace.gps[i].time.seconds > trace.gps[i - 1].time.seconds);
}

TEST_CASE("loop events") {
  SimConfig c = quiet();
  c.loop_every_n = 5;
  const auto trace = generate(c);
  REQUIRE_FALSE(trace.loop_events.empty());
  std::set<std::pair<graph::NodeId, graph::NodeId>> pairs;
  for (const auto& e : trace.loop_events) {
    const auto a = std::min(e.from_id, e.to_id), b = std::max(e.from_id, e.to_id);
    CHECK(pairs.insert({a, b}).second);
    const auto& ga = trace.ground_truth[e.from_id];
    const auto& gb = trace.ground_truth[e.to_id];
    CHECK(std::abs(gb.time.seconds - ga.time.seconds) > c.loop_min_gap);
    CHECK((gb.pose.translation - ga.pose.translation).norm() < c.loop_radius);
    const Pose rel = inverse(ga.pose) * gb.pose;
    CHECK((rel.translation - e.measured.translation).norm() < 1e-9);
  }
}

TEST_CASE("synthetic scans") {
  const Pose pose = Pose::from_translation({0, 0, 1});
  CHECK(synth_scan({}, pose, 10.0).empty());
  const std::vector<AxisBox> wall{{{5, -2, 0}, {5.2, 2, 2}}};
  const auto a = synth_scan(wall, pose, 10.0);
  REQUIRE_FALSE(a.empty());
  for (const auto& p : a) CHECK(p.norm() <= 10.0);
  const auto b = synth_scan(wall, pose, 10.0);
  CHECK(a == b);
  CHECK(synth_scan(wall, pose, 4.0).empty());
}

TEST_CASE("generation is deterministic") {
  SimConfig c;
  c.environment = {{{-3, -3, 0}, {3, 3, 8}}};
  const auto a = generate(c), b = generate(c);
  REQUIRE(a.odometry.size() == b.odometry.size());
  for (std::size_t i = 0; i < a.odometry.size(); ++i) {
    CHECK(a.odometry[i].pose.translation == b.odometry[i].pose.translation);
  }
  REQUIRE(a.gps.size() == b.gps.size());
  for (std::size_t i = 0; i < a.gps.size(); ++i) CHECK(a.gps[i].position.latitude_deg == b.gps[i].position.latitude_deg);
  REQUIRE(a.scans.size() == b.scans.size());
  CHECK(a.scans.back().points == b.scans.back().points);
  c.seed = 43;
  CHECK(generate(c).odometry.back().pose.translation != a.odometry.back().pose.translation);
}

TEST_CASE("noise-free pipeline recovers ground truth") {
  SimConfig c = quiet();
  c.local_offset = {1, 2, 0.5};
  c.local_yaw_deg = -40;
  PipelineSettings s;
  const auto run = run_pipeline(generate(c), s);
  CHECK(run.metrics.position_rmse < 1e-6);
  CHECK(run.pose_smoothed.size() == run.pose_raw.size());
}

TEST_CASE("smoothed output suppresses the optimization step") {
  // Keep flying after the loop closes so the first optimization lands mid-flight.
  RunConfig cfg = scenario("circle_loops");
  cfg.sim.circle.laps = 1.5;
  cfg.sim.optimization_period = 70;
  const auto run = run_pipeline(generate(cfg.sim_config()), cfg.pipeline_settings());
  REQUIRE_FALSE(run.optimizations.empty());
  const double per_tick = cfg.sim.circle.radius * cfg.sim.circle.angular_rate / cfg.sim.odom_rate;
  // The raw series steps well beyond the per-tick motion at the first merge.
  const double merged = run.optimizations.front().merged.seconds;
  double step = 0;
  for (std::size_t i = 1; i < run.pose_raw.size(); ++i) {
    if (std::abs(run.pose_raw[i].time.seconds - merged) < 1e-9) {
      step = (run.pose_raw[i].pose.translation - run.pose_raw[i - 1].pose.translation).norm();
    }
  }
  CHECK(step > 2 * per_tick);
  CHECK(run.metrics.max_jump_raw >= step);
  const double bound = (1 - smoothing::alpha(0.0, cfg.pipeline.smoother)) * run.metrics.max_jump_raw + per_tick;
  CHECK(run.metrics.max_jump_smoothed < bound);
  CHECK(run.metrics.max_jump_smoothed < run.metrics.max_jump_raw);
}

TEST_CASE("landing altitude error grows with b") {
  RunConfig cfg = scenario("altitude_drift");
  const auto trace = generate(cfg.sim_config());
  cfg.gps_enabled = false;
  const double at_zero = run_pipeline(trace, cfg.pipeline_settings()).metrics.landing_altitude_error;
  CHECK(std::abs(at_zero) < 1e-3);
  double prev = at_zero;
  for (double b : {10.0, 100.0}) {
    cfg.gps_enabled = true;
    cfg.pipeline.solver.gps.b = b;
    const double err = run_pipeline(trace, cfg.pipeline_settings()).metrics.landing_altitude_error;
    CHECK(err > prev);
    CHECK(err <= 0.8);
    prev = err;
  }
}

TEST_CASE("pipeline is deterministic") {
  const RunConfig cfg = scenario("circle_loops");
  const auto trace = generate(cfg.sim_config());
  const auto a = run_pipeline(trace, cfg.pipeline_settings());
  const auto b = run_pipeline(trace, cfg.pipeline_settings());
  CHECK(report_text(a) == report_text(b));
  REQUIRE(a.pose_smoothed.size() == b.pose_smoothed.size());
  for (std::size_t i = 0; i < a.pose_smoothed.size(); ++i) {
    CHECK(a.pose_smoothed[i].pose.translation == b.pose_smoothed[i].pose.translation);
  }
}

TEST_CASE("threaded optimizer completes") {
  RunConfig cfg = scenario("circle_loops");
  cfg.pipeline.threaded_optimizer = true;
  const auto run = run_pipeline(generate(cfg.sim_config()), cfg.pipeline_settings());
  CHECK(run.metrics.loop_gap_reduction_pct >= 90.0);
}
