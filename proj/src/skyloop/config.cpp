#include "skyloop/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <istream>
#include <sstream>

#include "skyloop/text.hpp"

namespace skyloop {

namespace {

using Setter = std::function<void(RunConfig&, std::string_view)>;
using Getter = std::function<std::string(const RunConfig&)>;

struct Entry {
  std::string key;
  Setter set;
  Getter get;
};

[[noreturn]] void bad_value(std::string_view what) { throw std::invalid_argument(std::string(what)); }

double to_double(std::string_view v) { return parse_double(v); }

long long to_integer(std::string_view v) {
  v = trim(v);
  long long out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size() || v.empty()) bad_value("expected an integer");
  return out;
}

std::uint64_t to_u64(std::string_view v) {
  v = trim(v);
  std::uint64_t out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size() || v.empty()) {
    bad_value("expected a non-negative integer");
  }
  return out;
}

bool to_bool(std::string_view v) {
  v = trim(v);
  if (v == "true" || v == "on" || v == "1") return true;
  if (v == "false" || v == "off" || v == "0") return false;
  bad_value("expected true/false");
}

std::string from_bool(bool b) { return b ? "true" : "false"; }

Eigen::Vector3d to_vec3(std::string_view v) {
  const auto d = parse_doubles(v);
  if (d.size() != 3) bad_value("expected three comma-separated numbers");
  return {d[0], d[1], d[2]};
}

std::string from_vec3(const Eigen::Vector3d& v) { return join_doubles({v.x(), v.y(), v.z()}); }

std::vector<std::string_view> list_items(std::string_view v) {
  std::vector<std::string_view> out;
  if (trim(v).empty() || trim(v) == "none") return out;
  for (auto item : split(v, ';')) out.push_back(trim(item));
  return out;
}

template <typename T>
std::string join_items(const std::vector<T>& items, std::function<std::string(const T&)> f) {
  if (items.empty()) return "none";
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += "; ";
    out += f(items[i]);
  }
  return out;
}

template <typename Field>
Entry number(std::string key, Field field) {
  return {std::move(key), [field](RunConfig& c, std::string_view v) { field(c) = to_double(v); },
          [field](const RunConfig& c) { return format_double(field(c)); }};
}

template <typename Field>
Entry integer(std::string key, Field field) {
  return {std::move(key),
          [field](RunConfig& c, std::string_view v) { field(c) = static_cast<int>(to_integer(v)); },
          [field](const RunConfig& c) { return std::to_string(field(c)); }};
}

template <typename Field>
Entry boolean(std::string key, Field field) {
  return {std::move(key), [field](RunConfig& c, std::string_view v) { field(c) = to_bool(v); },
          [field](const RunConfig& c) { return from_bool(field(c)); }};
}

template <typename Field>
Entry vec3(std::string key, Field field) {
  return {std::move(key), [field](RunConfig& c, std::string_view v) { field(c) = to_vec3(v); },
          [field](const RunConfig& c) { return from_vec3(field(c)); }};
}

#define FIELD(expr) [](auto& c) -> decltype(auto) { return (expr); }

const std::vector<Entry>& entries() {
  static const std::vector<Entry> table = [] {
    std::vector<Entry> t;
    t.push_back({"seed", [](RunConfig& c, std::string_view v) { c.seed = to_u64(v); },
                 [](const RunConfig& c) { return std::to_string(c.seed); }});

    t.push_back(number("smoother.s", FIELD(c.pipeline.smoother.s)));
    t.push_back(number("smoother.t_x_seconds", FIELD(c.pipeline.smoother.t_x)));

    t.push_back(boolean("gps.enabled", FIELD(c.gps_enabled)));
    t.push_back({"gps.weighting.mode",
                 [](RunConfig& c, std::string_view v) {
                   c.pipeline.solver.gps.mode = graph::parse_weighting_mode(trim(v));
                 },
                 [](const RunConfig& c) { return graph::to_string(c.pipeline.solver.gps.mode); }});
    t.push_back(number("gps.weighting.a", FIELD(c.pipeline.solver.gps.a)));
    t.push_back(number("gps.weighting.b", FIELD(c.pipeline.solver.gps.b)));
    t.push_back({"gps.huber_delta",
                 [](RunConfig& c, std::string_view v) {
                   if (trim(v) == "none") {
                     c.pipeline.solver.gps.huber_delta.reset();
                   } else {
                     c.pipeline.solver.gps.huber_delta = to_double(v);
                   }
                 },
                 [](const RunConfig& c) {
                   const auto& d = c.pipeline.solver.gps.huber_delta;
                   return d ? format_double(*d) : std::string("none");
                 }});
    t.push_back({"gps.axis_mask",
                 [](RunConfig& c, std::string_view v) {
                   const auto parts = split(v, ',');
                   if (parts.size() != 3) bad_value("expected three comma-separated booleans");
                   for (int i = 0; i < 3; ++i) c.pipeline.solver.gps.axis_mask[i] = to_bool(parts[i]);
                 },
                 [](const RunConfig& c) {
                   const auto& m = c.pipeline.solver.gps.axis_mask;
                   return from_bool(m[0]) + "," + from_bool(m[1]) + "," + from_bool(m[2]);
                 }});

    t.push_back(number("solver.initial_lambda", FIELD(c.pipeline.solver.initial_lambda)));
    t.push_back(integer("solver.max_iterations", FIELD(c.pipeline.solver.max_iterations)));
    t.push_back(number("solver.relative_tolerance", FIELD(c.pipeline.solver.relative_tolerance)));
    t.push_back(boolean("solver.final_optimization", FIELD(c.pipeline.final_optimization)));
    t.push_back(integer("solver.completion_delay_ticks", FIELD(c.pipeline.completion_delay_ticks)));
    t.push_back(boolean("solver.threaded", FIELD(c.pipeline.threaded_optimizer)));
    t.push_back(number("solver.odom_translation_weight", FIELD(c.pipeline.odom_translation_weight)));
    t.push_back(number("solver.odom_rotation_weight", FIELD(c.pipeline.odom_rotation_weight)));
    t.push_back(number("solver.loop_translation_weight", FIELD(c.pipeline.loop_translation_weight)));
    t.push_back(number("solver.loop_rotation_weight", FIELD(c.pipeline.loop_rotation_weight)));
    t.push_back(boolean("solver.initial_orientation", FIELD(c.pipeline.use_initial_orientation)));
    t.push_back(number("solver.initial_orientation_weight", FIELD(c.pipeline.initial_orientation_weight)));
    t.push_back(number("solver.gauge_translation_weight", FIELD(c.pipeline.solver.gauge_translation_weight)));
    t.push_back(number("solver.gauge_rotation_weight", FIELD(c.pipeline.solver.gauge_rotation_weight)));
    t.push_back(number("solver.weak_position_weight", FIELD(c.pipeline.solver.weak_position_weight)));

    t.push_back(number("map.high_res_edge", FIELD(c.pipeline.submap.high_res_edge)));
    t.push_back(number("map.low_res_edge", FIELD(c.pipeline.submap.low_res_edge)));
    t.push_back(integer("map.scans_per_submap", FIELD(c.pipeline.submap.scans_per_submap)));
    t.push_back(number("map.hit_probability", FIELD(c.map_hit_probability)));
    t.push_back(number("map.cloud_threshold", FIELD(c.pipeline.cloud_threshold)));
    t.push_back(number("map.octree_resolution", FIELD(c.pipeline.octree.resolution)));
    t.push_back(number("map.octree_hit", FIELD(c.pipeline.octree.hit)));
    t.push_back(number("map.octree_miss", FIELD(c.pipeline.octree.miss)));
    t.push_back(number("map.octree_clamp_min", FIELD(c.pipeline.octree.clamp_min)));
    t.push_back(number("map.octree_clamp_max", FIELD(c.pipeline.octree.clamp_max)));
    t.push_back(boolean("map.carve_free_space", FIELD(c.pipeline.octree.carve_free_space)));

    t.push_back(number("planner.clearance", FIELD(c.planner.clearance)));
    t.push_back(number("planner.step", FIELD(c.planner.step)));
    t.push_back(integer("planner.max_iterations", FIELD(c.planner.max_iterations)));
    t.push_back(number("planner.goal_bias", FIELD(c.planner.goal_bias)));
    t.push_back(number("planner.goal_tolerance", FIELD(c.planner.goal_tolerance)));
    t.push_back(boolean("planner.allow_unknown", FIELD(c.planner.allow_unknown)));
    t.push_back(boolean("planner.shortcut", FIELD(c.planner.shortcut)));
    t.push_back(integer("planner.shortcut_attempts", FIELD(c.planner.shortcut_attempts)));

    t.push_back({"sim.trajectory",
                 [](RunConfig& c, std::string_view v) {
                   v = trim(v);
                   if (v == "circle") {
                     c.sim.trajectory = sim::SimConfig::TrajectoryKind::circle;
                   } else if (v == "waypoints") {
                     c.sim.trajectory = sim::SimConfig::TrajectoryKind::waypoints;
                   } else {
                     bad_value("expected circle or waypoints");
                   }
                 },
                 [](const RunConfig& c) {
                   return std::string(c.sim.trajectory == sim::SimConfig::TrajectoryKind::circle
                                          ? "circle"
                                          : "waypoints");
                 }});
    t.push_back(number("sim.circle.radius", FIELD(c.sim.circle.radius)));
    t.push_back(number("sim.circle.height", FIELD(c.sim.circle.height)));
    t.push_back(number("sim.circle.angular_rate", FIELD(c.sim.circle.angular_rate)));
    t.push_back(number("sim.circle.laps", FIELD(c.sim.circle.laps)));
    t.push_back({"sim.circle.center",
                 [](RunConfig& c, std::string_view v) {
                   const auto d = parse_doubles(v);
                   if (d.size() != 2) bad_value("expected two comma-separated numbers");
                   c.sim.circle.center = {d[0], d[1]};
                 },
                 [](const RunConfig& c) {
                   return join_doubles({c.sim.circle.center.x(), c.sim.circle.center.y()});
                 }});
    t.push_back({"sim.waypoints",
                 [](RunConfig& c, std::string_view v) {
                   c.sim.waypoints.clear();
                   for (auto item : list_items(v)) c.sim.waypoints.push_back(to_vec3(item));
                 },
                 [](const RunConfig& c) {
                   return join_items<Eigen::Vector3d>(c.sim.waypoints, from_vec3);
                 }});
    t.push_back(number("sim.speed", FIELD(c.sim.speed)));
    t.push_back(number("sim.odom_rate", FIELD(c.sim.odom_rate)));
    t.push_back(number("sim.gps_rate", FIELD(c.sim.gps_rate)));
    t.push_back(vec3("sim.gps_sigma", FIELD(c.sim.gps_sigma)));
    t.push_back(vec3("sim.gps_reported_sigma", FIELD(c.sim.gps_reported_sigma)));
    t.push_back(number("sim.gps_altitude_drift", FIELD(c.sim.gps_altitude_drift)));
    t.push_back({"sim.gps_dropout",
                 [](RunConfig& c, std::string_view v) {
                   c.sim.gps_dropout.clear();
                   for (auto item : list_items(v)) {
                     const auto parts = split(item, ':');
                     if (parts.size() != 2) bad_value("expected begin:end windows separated by ';'");
                     c.sim.gps_dropout.push_back({to_double(parts[0]), to_double(parts[1])});
                   }
                 },
                 [](const RunConfig& c) {
                   return join_items<sim::TimeWindow>(c.sim.gps_dropout, [](const sim::TimeWindow& w) {
                     return format_double(w.begin) + ":" + format_double(w.end);
                   });
                 }});
    t.push_back(number("sim.odom_drift_translation", FIELD(c.sim.odom_drift_translation)));
    t.push_back(vec3("sim.odom_drift_direction", FIELD(c.sim.odom_drift_direction)));
    t.push_back(number("sim.odom_drift_yaw", FIELD(c.sim.odom_drift_yaw)));
    t.push_back(number("sim.odom_noise_translation", FIELD(c.sim.odom_noise_translation)));
    t.push_back(number("sim.odom_noise_yaw", FIELD(c.sim.odom_noise_yaw)));
    t.push_back(number("sim.loop_radius", FIELD(c.sim.loop_radius)));
    t.push_back(number("sim.loop_min_gap", FIELD(c.sim.loop_min_gap)));
    t.push_back(integer("sim.loop_every_n", FIELD(c.sim.loop_every_n)));
    t.push_back(number("sim.loop_noise_translation", FIELD(c.sim.loop_noise_translation)));
    t.push_back(number("sim.loop_noise_rotation_deg", FIELD(c.sim.loop_noise_rotation_deg)));
    t.push_back(number("sim.optimization_period", FIELD(c.sim.optimization_period)));
    t.push_back({"sim.environment",
                 [](RunConfig& c, std::string_view v) {
                   c.sim.environment.clear();
                   for (auto item : list_items(v)) {
                     const auto d = parse_doubles(item);
                     if (d.size() != 6) bad_value("expected boxes x0,y0,z0,x1,y1,z1 separated by ';'");
                     c.sim.environment.push_back({{d[0], d[1], d[2]}, {d[3], d[4], d[5]}});
                   }
                 },
                 [](const RunConfig& c) {
                   return join_items<sim::AxisBox>(c.sim.environment, [](const sim::AxisBox& b) {
                     return from_vec3(b.min) + "," + from_vec3(b.max);
                   });
                 }});
    t.push_back(number("sim.lidar_range", FIELD(c.sim.lidar_range)));
    t.push_back(integer("sim.scan_every_n", FIELD(c.sim.scan_every_n)));
    t.push_back(number("sim.scan_spacing", FIELD(c.sim.scan_spacing)));
    t.push_back(vec3("sim.local_offset", FIELD(c.sim.local_offset)));
    t.push_back(number("sim.local_yaw_deg", FIELD(c.sim.local_yaw_deg)));
    t.push_back({"sim.geo_origin",
                 [](RunConfig& c, std::string_view v) {
                   const auto p = to_vec3(v);
                   c.sim.geo_origin = {p.x(), p.y(), p.z()};
                 },
                 [](const RunConfig& c) {
                   const auto& g = c.sim.geo_origin;
                   return join_doubles({g.latitude_deg, g.longitude_deg, g.altitude_m});
                 }});
    t.push_back(number("sim.heading_noise_deg", FIELD(c.sim.heading_noise_deg)));
    return t;
  }();
  return table;
}

#undef FIELD

}  // namespace

sim::SimConfig RunConfig::sim_config() const {
  sim::SimConfig out = sim;
  out.seed = seed;
  return out;
}

sim::PipelineSettings RunConfig::pipeline_settings() const {
  sim::PipelineSettings out = pipeline;
  out.use_gps = gps_enabled;
  out.optimization_period = sim.optimization_period;
  out.submap.grid.hit_log_odds = mapping::logit(map_hit_probability);
  return out;
}

void RunConfig::validate() const {
  auto check = [](auto&& f) {
    try {
      f();
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  };
  if (!(map_hit_probability > 0.5 && map_hit_probability < 1.0)) {
    throw ConfigError("map.hit_probability: must be in (0.5, 1)");
  }
  if (!(pipeline.cloud_threshold > 0.0 && pipeline.cloud_threshold < 1.0)) {
    throw ConfigError("map.cloud_threshold: must be in (0, 1)");
  }
  if (pipeline.completion_delay_ticks < 0) throw ConfigError("solver.completion_delay_ticks: must be >= 0");
  for (const auto& [key, w] : {std::pair{"solver.odom_translation_weight", pipeline.odom_translation_weight},
                               {"solver.odom_rotation_weight", pipeline.odom_rotation_weight},
                               {"solver.loop_translation_weight", pipeline.loop_translation_weight},
                               {"solver.loop_rotation_weight", pipeline.loop_rotation_weight},
                               {"solver.initial_orientation_weight", pipeline.initial_orientation_weight}}) {
    if (!(w > 0.0)) throw ConfigError(std::string(key) + ": must be > 0");
  }
  if (!(planner.clearance >= 0.0)) throw ConfigError("planner.clearance: must be >= 0");
  if (!(planner.step > 0.0)) throw ConfigError("planner.step: must be > 0");
  if (planner.max_iterations < 1) throw ConfigError("planner.max_iterations: must be >= 1");
  if (!(planner.goal_bias >= 0.0 && planner.goal_bias <= 1.0)) {
    throw ConfigError("planner.goal_bias: must be in [0, 1]");
  }
  if (!(planner.goal_tolerance >= 0.0)) throw ConfigError("planner.goal_tolerance: must be >= 0");
  if (planner.shortcut_attempts < 0) throw ConfigError("planner.shortcut_attempts: must be >= 0");

  const auto settings = pipeline_settings();
  check([&] { settings.smoother.validate(); });
  check([&] { settings.solver.validate(); });
  check([&] { settings.submap.validate(); });
  check([&] { settings.octree.validate(); });
  check([&] { sim_config().validate(); });
}

void set_config_value(RunConfig& config, std::string_view key, std::string_view value) {
  for (const auto& e : entries()) {
    if (e.key != key) continue;
    try {
      e.set(config, value);
    } catch (const std::exception& ex) {
      throw ConfigError(std::string(key) + ": invalid value '" + std::string(trim(value)) + "' (" +
                        ex.what() + ")");
    }
    return;
  }
  throw ConfigError(std::string(key) + ": unknown key");
}

RunConfig parse_run_config(std::istream& is) {
  RunConfig config;
  std::string line;
  int number = 0;
  while (std::getline(is, line)) {
    ++number;
    std::string_view view(line);
    if (const auto hash = view.find('#'); hash != std::string_view::npos) view = view.substr(0, hash);
    view = trim(view);
    if (view.empty()) continue;
    const auto eq = view.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("line " + std::to_string(number) + ": expected 'key = value'");
    }
    set_config_value(config, trim(view.substr(0, eq)), trim(view.substr(eq + 1)));
  }
  config.validate();
  return config;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config '" + path + "'");
  return parse_run_config(in);
}

std::vector<std::string> config_keys() {
  std::vector<std::string> out;
  for (const auto& e : entries()) out.push_back(e.key);
  return out;
}

std::string effective_config_text(const RunConfig& config) {
  std::string out;
  for (const auto& e : entries()) out += e.key + " = " + e.get(config) + "\n";
  return out;
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : bytes) h = (h ^ c) * 1099511628211ull;
  return h;
}

std::uint64_t config_hash(const RunConfig& config) { return fnv1a64(effective_config_text(config)); }

}  // namespace skyloop
