#include "skyloop/commands.hpp"

#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

#include "skyloop/text.hpp"

namespace skyloop {

namespace fs = std::filesystem;

namespace {

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    throw WriteError("cannot create directory '" + dir.string() + "'");
  }
}

template <typename Fn>
void write_file(const fs::path& path, Fn&& body, bool binary = false) {
  std::ofstream out(path, binary ? std::ios::binary | std::ios::trunc : std::ios::trunc);
  if (!out) throw WriteError("cannot open '" + path.string() + "' for writing");
  body(out);
  out.flush();
  if (!out) throw WriteError("write failed for '" + path.string() + "'");
}

/// Rows of a CSV file with the given header; each row split into numbers.
std::vector<std::vector<double>> read_csv(const fs::path& path, std::string_view header,
                                          std::size_t columns) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot read '" + path.string() + "'");
  std::string line;
  if (!std::getline(in, line) || trim(line) != header) {
    throw InputError(path.filename().string() + ": expected header '" + std::string(header) + "'");
  }
  std::vector<std::vector<double>> rows;
  int number = 1;
  while (std::getline(in, line)) {
    ++number;
    if (trim(line).empty()) continue;
    try {
      auto row = parse_doubles(line);
      if (row.size() != columns) throw std::invalid_argument("wrong column count");
      rows.push_back(std::move(row));
    } catch (const std::invalid_argument& e) {
      throw InputError(path.filename().string() + " line " + std::to_string(number) + ": " + e.what());
    }
  }
  return rows;
}

void write_poses(const fs::path& path, const std::vector<StampedPose>& poses) {
  write_file(path, [&](std::ostream& os) {
    os << kPoseCsvHeader << '\n';
    for (const auto& p : poses) os << format_pose_row(p.time, p.pose) << '\n';
  });
}

std::vector<StampedPose> read_poses(const fs::path& path) {
  std::vector<StampedPose> out;
  for (const auto& r : read_csv(path, kPoseCsvHeader, 8)) {
    out.push_back({Timestamp(r[0]), Pose(Rotation(r[4], r[5], r[6], r[7]), {r[1], r[2], r[3]})});
  }
  return out;
}

std::size_t to_index(double v, const char* what) {
  if (!(v >= 0.0) || v != std::floor(v)) throw InputError(std::string(what) + ": expected an index");
  return static_cast<std::size_t>(v);
}

constexpr std::string_view kGpsHeader = "t,lat_deg,lon_deg,alt_m,sigma_e,sigma_n,sigma_u";
constexpr std::string_view kLoopHeader = "from,to,px,py,pz,qw,qx,qy,qz";
constexpr std::string_view kScanIndexHeader = "tick,t,points";
constexpr std::string_view kScanPointsHeader = "tick,x,y,z";
constexpr std::string_view kOrientationHeader = "qw,qx,qy,qz";
constexpr std::string_view kOriginHeader = "lat_deg,lon_deg,alt_m";

std::string fmt(double v) { return format_double(v); }

}  // namespace

std::string manifest_text(const RunConfig& config, const std::vector<std::string>& metadata) {
  std::ostringstream os;
  for (const auto& m : metadata) os << "# " << m << '\n';
  os << effective_config_text(config);
  return os.str();
}

void write_trace_bundle(const fs::path& dir, const sim::SimTrace& trace, const RunConfig& config) {
  ensure_dir(dir);
  write_poses(dir / "ground_truth.csv", trace.ground_truth);
  write_poses(dir / "odometry.csv", trace.odometry);
  write_file(dir / "gps.csv", [&](std::ostream& os) {
    os << kGpsHeader << '\n';
    for (const auto& g : trace.gps) {
      os << join_doubles({g.time.seconds, g.position.latitude_deg, g.position.longitude_deg,
                          g.position.altitude_m, g.sigma_enu.x(), g.sigma_enu.y(), g.sigma_enu.z()})
         << '\n';
    }
  });
  write_file(dir / "loops.csv", [&](std::ostream& os) {
    os << kLoopHeader << '\n';
    for (const auto& e : trace.loop_events) {
      const auto& t = e.measured.translation;
      const auto& q = e.measured.rotation;
      os << e.from_id << ',' << e.to_id << ','
         << join_doubles({t.x(), t.y(), t.z(), q.w(), q.x(), q.y(), q.z()}) << '\n';
    }
  });
  write_file(dir / "scan_index.csv", [&](std::ostream& os) {
    os << kScanIndexHeader << '\n';
    for (const auto& s : trace.scans) os << s.tick << ',' << fmt(s.time.seconds) << ',' << s.points.size() << '\n';
  });
  write_file(dir / "scan_points.csv", [&](std::ostream& os) {
    os << kScanPointsHeader << '\n';
    for (const auto& s : trace.scans) {
      for (const auto& p : s.points) os << s.tick << ',' << join_doubles({p.x(), p.y(), p.z()}) << '\n';
    }
  });
  write_file(dir / "initial_orientation.csv", [&](std::ostream& os) {
    const auto& q = trace.initial_orientation;
    os << kOrientationHeader << '\n' << join_doubles({q.w(), q.x(), q.y(), q.z()}) << '\n';
  });
  write_file(dir / "geo_origin.csv", [&](std::ostream& os) {
    const auto& g = trace.geo_origin;
    os << kOriginHeader << '\n' << join_doubles({g.latitude_deg, g.longitude_deg, g.altitude_m}) << '\n';
  });
  write_file(dir / "manifest.txt", [&](std::ostream& os) {
    std::ostringstream hash;
    hash << std::hex << std::setw(16) << std::setfill('0') << config_hash(config);
    os << manifest_text(config, {"skyloop trace bundle",
                                 "format_version = " + std::to_string(kBundleFormatVersion),
                                 "config_hash = " + hash.str(), "seed = " + std::to_string(config.seed)});
  });
}

sim::SimTrace read_trace_bundle(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw InputError("trace directory '" + dir.string() + "' not found");
  sim::SimTrace trace;
  trace.ground_truth = read_poses(dir / "ground_truth.csv");
  trace.odometry = read_poses(dir / "odometry.csv");
  if (trace.odometry.empty()) throw InputError("odometry.csv: no samples");
  if (trace.ground_truth.size() != trace.odometry.size()) {
    throw InputError("ground_truth.csv and odometry.csv differ in length");
  }
  for (const auto& r : read_csv(dir / "gps.csv", kGpsHeader, 7)) {
    trace.gps.push_back({Timestamp(r[0]), {r[1], r[2], r[3]}, {r[4], r[5], r[6]}});
  }
  for (const auto& r : read_csv(dir / "loops.csv", kLoopHeader, 9)) {
    trace.loop_events.push_back({static_cast<graph::NodeId>(to_index(r[0], "loops.csv")),
                                 static_cast<graph::NodeId>(to_index(r[1], "loops.csv")),
                                 Pose(Rotation(r[5], r[6], r[7], r[8]), {r[2], r[3], r[4]})});
  }
  std::map<std::size_t, std::size_t> scan_of_tick, declared;
  for (const auto& r : read_csv(dir / "scan_index.csv", kScanIndexHeader, 3)) {
    const auto tick = to_index(r[0], "scan_index.csv");
    if (!trace.scans.empty() && tick <= trace.scans.back().tick) {
      throw InputError("scan_index.csv: ticks must increase");
    }
    scan_of_tick[tick] = trace.scans.size();
    declared[tick] = to_index(r[2], "scan_index.csv");
    trace.scans.push_back({tick, Timestamp(r[1]), {}});
  }
  for (const auto& r : read_csv(dir / "scan_points.csv", kScanPointsHeader, 4)) {
    const auto it = scan_of_tick.find(to_index(r[0], "scan_points.csv"));
    if (it == scan_of_tick.end()) throw InputError("scan_points.csv: point for an unlisted scan");
    trace.scans[it->second].points.emplace_back(r[1], r[2], r[3]);
  }
  for (const auto& s : trace.scans) {
    if (s.points.size() != declared[s.tick]) {
      throw InputError("scan_points.csv: point count differs from scan_index.csv for tick " +
                       std::to_string(s.tick));
    }
  }
  const auto q = read_csv(dir / "initial_orientation.csv", kOrientationHeader, 4);
  if (q.size() != 1) throw InputError("initial_orientation.csv: expected one row");
  trace.initial_orientation = Rotation(q[0][0], q[0][1], q[0][2], q[0][3]);
  const auto g = read_csv(dir / "geo_origin.csv", kOriginHeader, 3);
  if (g.size() != 1) throw InputError("geo_origin.csv: expected one row");
  trace.geo_origin = {g[0][0], g[0][1], g[0][2]};
  return trace;
}

std::string report_text(const sim::RunArtifacts& run) {
  std::ostringstream os;
  const auto& m = run.metrics;
  std::size_t loops = 0;
  for (const auto& c : run.graph.relative_constraints()) loops += c.kind == graph::ConstraintKind::loop_closure;
  os << "format_version = " << kBundleFormatVersion << '\n'
     << "nodes = " << run.graph.nodes().size() << '\n'
     << "loop_constraints = " << loops << '\n'
     << "gps_constraints = " << run.graph.gps_constraints().size() << '\n'
     << "position_rmse = " << fmt(m.position_rmse) << '\n'
     << "takeoff_landing_alt_diff = " << fmt(m.takeoff_landing_alt_diff) << '\n'
     << "landing_altitude_error = " << fmt(m.landing_altitude_error) << '\n'
     << "loop_gap_before = " << fmt(m.loop_gap_before) << '\n'
     << "loop_gap_after = " << fmt(m.loop_gap_after) << '\n'
     << "loop_gap_reduction_pct = " << fmt(m.loop_gap_reduction_pct) << '\n'
     << "max_jump_raw = " << fmt(m.max_jump_raw) << '\n'
     << "max_jump_smoothed = " << fmt(m.max_jump_smoothed) << '\n'
     << "submap_clouds = " << run.clouds.size() << '\n'
     << "octree_leaves = " << run.octree.leaves().size() << '\n'
     << "optimizations = " << run.optimizations.size() << '\n';
  for (std::size_t i = 0; i < run.optimizations.size(); ++i) {
    const auto& o = run.optimizations[i];
    const std::string p = "optimization." + std::to_string(i) + ".";
    os << p << "started = " << fmt(o.started.seconds) << '\n'
       << p << "merged = " << fmt(o.merged.seconds) << '\n'
       << p << "nodes = " << o.node_count << '\n'
       << p << "iterations = " << o.report.iterations << '\n'
       << p << "initial_cost = " << fmt(o.report.initial_cost) << '\n'
       << p << "final_cost = " << fmt(o.report.final_cost) << '\n'
       << p << "converged = " << (o.report.converged ? "true" : "false") << '\n';
  }
  return os.str();
}

void write_run_outputs(const fs::path& dir, const sim::RunArtifacts& run, const RunConfig& config) {
  ensure_dir(dir);
  write_poses(dir / "pose_raw.csv", run.pose_raw);
  write_poses(dir / "pose_smoothed.csv", run.pose_smoothed);
  if (run.enu_origin) {
    write_file(dir / "gps.csv", [&](std::ostream& os) {
      os << "t,e,n,u,sigma_e,sigma_n,sigma_u\n";
      for (const auto& g : run.gps_enu) {
        const auto& p = g.position_enu;
        os << join_doubles({g.time.seconds, p.x(), p.y(), p.z(), g.sigma_enu.x(), g.sigma_enu.y(),
                            g.sigma_enu.z()})
           << '\n';
      }
    });
  }
  write_file(dir / "errors.csv", [&](std::ostream& os) {
    os << "t,error_raw,error_smoothed\n";
    for (std::size_t k = 0; k < run.pose_raw.size(); ++k) {
      os << join_doubles({run.pose_raw[k].time.seconds, run.error_raw[k], run.error_smoothed[k]}) << '\n';
    }
  });
  write_file(dir / "octree.txt", [&](std::ostream& os) { run.octree.write_text(os); });
  write_file(dir / "octree.aok", [&](std::ostream& os) { run.octree.write_binary(os); }, true);
  write_file(dir / "submap_clouds.csv", [&](std::ostream& os) { mapping::write_clouds_csv(os, run.clouds); });
  write_file(dir / "graph.txt", [&](std::ostream& os) { graph::write_graph_text(os, run.graph); });
  write_file(dir / "report.txt", [&](std::ostream& os) { os << report_text(run); });
  write_file(dir / "manifest.txt", [&](std::ostream& os) {
    std::vector<std::string> meta{"skyloop run", "format_version = " + std::to_string(kBundleFormatVersion)};
    std::ostringstream hash;
    hash << std::hex << std::setw(16) << std::setfill('0') << config_hash(config);
    meta.push_back("config_hash = " + hash.str());
    meta.push_back("seed = " + std::to_string(config.seed));
    if (run.enu_origin) {
      const auto& g = *run.enu_origin;
      meta.push_back("enu_origin = " + join_doubles({g.latitude_deg, g.longitude_deg, g.altitude_m}));
    }
    os << manifest_text(config, meta);
  });
}

void simulate_command(const RunConfig& config, const fs::path& out_dir) {
  config.validate();
  write_trace_bundle(out_dir, sim::generate(config.sim_config()), config);
}

sim::RunArtifacts run_command(const RunConfig& config, const fs::path& trace_dir, const fs::path& out_dir) {
  config.validate();
  const auto trace = read_trace_bundle(trace_dir);
  auto run = sim::run_pipeline(trace, config.pipeline_settings());
  write_run_outputs(out_dir, run, config);
  return run;
}

PlanOutcome plan_command(const RunConfig& config, const fs::path& octree_file,
                         const Eigen::Vector3d& start, const Eigen::Vector3d& goal,
                         const std::optional<planning::Box>& bounds, const fs::path& out_csv) {
  config.validate();
  std::ifstream in(octree_file, std::ios::binary);
  if (!in) throw InputError("cannot read octree '" + octree_file.string() + "'");
  mapping::OccupancyOctree octree;
  try {
    octree = mapping::OccupancyOctree::read_binary(in);
  } catch (const std::exception& e) {
    throw InputError(octree_file.filename().string() + ": " + e.what());
  }

  planning::PlanRequest req;
  req.start = start;
  req.goal = goal;
  if (bounds) {
    req.bounds = *bounds;
  } else {
    Eigen::Vector3d lo = start.cwiseMin(goal), hi = start.cwiseMax(goal);
    for (const auto& leaf : octree.leaves()) {
      const Eigen::Vector3d corner = octree.center_of(leaf.key) -
                                     Eigen::Vector3d::Constant(0.5 * octree.resolution());
      lo = lo.cwiseMin(corner);
      hi = hi.cwiseMax(corner + Eigen::Vector3d::Constant(leaf.span() * octree.resolution()));
    }
    req.bounds = {lo.array() - 2.0, hi.array() + 2.0};
  }
  const auto& p = config.planner;
  req.clearance = p.clearance;
  req.step = p.step;
  req.max_iterations = p.max_iterations;
  req.goal_bias = p.goal_bias;
  req.goal_tolerance = p.goal_tolerance;
  req.allow_unknown = p.allow_unknown;
  req.seed = config.seed;

  auto path = planning::plan_rrt(octree, req);
  if (!path) throw NoPathError("no path found within " + std::to_string(p.max_iterations) + " iterations");
  if (p.shortcut) {
    *path = planning::shortcut(*path, octree, p.clearance, config.seed, p.allow_unknown, p.shortcut_attempts);
  }
  if (out_csv.has_parent_path()) ensure_dir(out_csv.parent_path());
  write_file(out_csv, [&](std::ostream& os) { planning::write_path_csv(os, *path); });
  return {*path, path->length()};
}

void compare_command(const std::vector<fs::path>& run_dirs, std::ostream& out, const std::string& series) {
  if (run_dirs.size() < 2) throw InputError("compare needs at least two run directories");
  if (series != "pose_smoothed" && series != "pose_raw") {
    throw InputError("unknown series '" + series + "'");
  }
  std::vector<std::pair<std::string, std::vector<StampedPose>>> runs;
  for (const auto& dir : run_dirs) {
    std::string name = dir.filename().string();
    if (name.empty()) name = dir.parent_path().filename().string();
    for (const auto& r : runs) {
      if (r.first == name) throw InputError("duplicate variant name '" + name + "'");
    }
    runs.emplace_back(name, read_poses(dir / (series + ".csv")));
  }
  const auto& base = runs.front().second;
  for (const auto& [name, poses] : runs) {
    if (poses.size() != base.size()) throw InputError("variant '" + name + "' has a different sample count");
    for (std::size_t i = 0; i < poses.size(); ++i) {
      if (poses[i].time != base[i].time) throw InputError("variant '" + name + "' has different timestamps");
    }
  }
  out << "variant,t,x,y,z\n";
  for (const auto& [name, poses] : runs) {
    for (const auto& p : poses) {
      const auto& t = p.pose.translation;
      out << name << ',' << join_doubles({p.time.seconds, t.x(), t.y(), t.z()}) << '\n';
    }
  }
}

}  // namespace skyloop
