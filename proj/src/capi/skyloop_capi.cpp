#include "skyloop/skyloop.h"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <iostream>
#include <new>
#include <optional>
#include <sstream>
#include <string>

#include "skyloop/commands.hpp"
#include "skyloop/smoothing.hpp"

struct sk_config {
  skyloop::RunConfig value;
};

struct sk_smoother {
  explicit sk_smoother(const skyloop::Pose& initial, const skyloop::smoothing::SmootherParams& p)
      : value(initial, p) {}
  skyloop::smoothing::CorrectionSmoother value;
};

struct sk_octree {
  skyloop::mapping::OccupancyOctree value;
};

namespace {

thread_local std::string g_last_error;

sk_status fail(sk_status code, const std::string& message) {
  g_last_error = message;
  return code;
}

/// Runs `fn`, translating exceptions into status codes.
template <typename Fn>
sk_status guarded(Fn&& fn) {
  try {
    fn();
    g_last_error.clear();
    return SK_OK;
  } catch (const skyloop::planning::EndpointError& e) {
    return fail(SK_ERROR_ENDPOINT, e.what());
  } catch (const skyloop::NoPathError& e) {
    return fail(SK_ERROR_NO_PATH, e.what());
  } catch (const skyloop::graph::GaugeError& e) {
    return fail(SK_ERROR_GAUGE, e.what());
  } catch (const skyloop::WriteError& e) {
    return fail(SK_ERROR_IO, e.what());
  } catch (const std::invalid_argument& e) {
    return fail(SK_ERROR_INVALID_ARGUMENT, e.what());
  } catch (const std::out_of_range& e) {
    return fail(SK_ERROR_INVALID_ARGUMENT, e.what());
  } catch (const std::bad_alloc&) {
    return fail(SK_ERROR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(SK_ERROR_INTERNAL, e.what());
  } catch (...) {
    return fail(SK_ERROR_INTERNAL, "unknown error");
  }
}

void require(bool ok, const char* what) {
  if (!ok) throw std::invalid_argument(what);
}

skyloop::Pose pose_in(const double* p) {
  return skyloop::Pose(skyloop::Rotation(p[3], p[4], p[5], p[6]), {p[0], p[1], p[2]});
}

void pose_out(const skyloop::Pose& pose, double* out) {
  const auto& t = pose.translation;
  const auto& q = pose.rotation;
  const double v[7] = {t.x(), t.y(), t.z(), q.w(), q.x(), q.y(), q.z()};
  std::memcpy(out, v, sizeof v);
}

}  // namespace

extern "C" {

const char* sk_last_error(void) { return g_last_error.c_str(); }

const char* sk_version(void) { return "1.0.0"; }

sk_status sk_config_new(sk_config** out) {
  return guarded([&] {
    require(out != nullptr, "null output handle");
    *out = new sk_config();
  });
}

sk_status sk_config_load(const char* path, sk_config** out) {
  return guarded([&] {
    require(path && out, "null argument");
    *out = nullptr;
    auto cfg = skyloop::load_run_config(path);
    *out = new sk_config{std::move(cfg)};
  });
}

sk_status sk_config_set(sk_config* config, const char* key, const char* value) {
  return guarded([&] {
    require(config && key && value, "null argument");
    skyloop::set_config_value(config->value, key, value);
  });
}

sk_status sk_config_validate(const sk_config* config) {
  return guarded([&] {
    require(config != nullptr, "null config");
    config->value.validate();
  });
}

sk_status sk_config_effective(const sk_config* config, char* buffer, size_t capacity, size_t* length) {
  return guarded([&] {
    require(config != nullptr, "null config");
    const auto text = skyloop::effective_config_text(config->value);
    if (length) *length = text.size();
    if (buffer && capacity > 0) {
      const auto n = std::min(capacity - 1, text.size());
      std::memcpy(buffer, text.data(), n);
      buffer[n] = '\0';
    }
  });
}

void sk_config_free(sk_config* config) { delete config; }

sk_status sk_simulate(const sk_config* config, const char* out_dir) {
  return guarded([&] {
    require(config && out_dir, "null argument");
    skyloop::simulate_command(config->value, out_dir);
  });
}

sk_status sk_run(const sk_config* config, const char* trace_dir, const char* out_dir) {
  return guarded([&] {
    require(config && trace_dir && out_dir, "null argument");
    skyloop::run_command(config->value, trace_dir, out_dir);
  });
}

sk_status sk_plan(const sk_config* config, const char* octree_path, const double start[3],
                  const double goal[3], const double* bounds, const char* out_csv, double* length,
                  size_t* waypoint_count) {
  return guarded([&] {
    require(config && octree_path && start && goal && out_csv, "null argument");
    std::optional<skyloop::planning::Box> box;
    if (bounds) box = skyloop::planning::Box{{bounds[0], bounds[1], bounds[2]}, {bounds[3], bounds[4], bounds[5]}};
    const auto r = skyloop::plan_command(config->value, octree_path, {start[0], start[1], start[2]},
                                         {goal[0], goal[1], goal[2]}, box, out_csv);
    if (length) *length = r.length;
    if (waypoint_count) *waypoint_count = r.path.waypoints.size();
  });
}

sk_status sk_compare(const char* const* run_dirs, size_t count, const char* series, const char* out_path) {
  return guarded([&] {
    require(run_dirs != nullptr || count == 0, "null run list");
    std::vector<std::filesystem::path> dirs;
    for (size_t i = 0; i < count; ++i) {
      require(run_dirs[i] != nullptr, "null run directory");
      dirs.emplace_back(run_dirs[i]);
    }
    const std::string which = series ? series : "pose_smoothed";
    if (!out_path) {
      skyloop::compare_command(dirs, std::cout, which);
      std::cout.flush();
      return;
    }
    std::ostringstream buffer;
    skyloop::compare_command(dirs, buffer, which);
    std::ofstream out(out_path, std::ios::trunc);
    if (!out) throw skyloop::WriteError(std::string("cannot open '") + out_path + "' for writing");
    out << buffer.str();
    out.flush();
    if (!out) throw skyloop::WriteError(std::string("write failed for '") + out_path + "'");
  });
}

sk_status sk_alpha(double t, double s, double t_x, double* out) {
  return guarded([&] {
    require(out != nullptr, "null output");
    const skyloop::smoothing::SmootherParams p{s, t_x};
    p.validate();
    *out = skyloop::smoothing::alpha(t, p);
  });
}

sk_status sk_smoother_new(double s, double t_x, const double initial_correction[7], sk_smoother** out) {
  return guarded([&] {
    require(out != nullptr, "null output handle");
    const skyloop::smoothing::SmootherParams p{s, t_x};
    p.validate();
    const auto initial = initial_correction ? pose_in(initial_correction) : skyloop::Pose::identity();
    *out = new sk_smoother(initial, p);
  });
}

sk_status sk_smoother_event(sk_smoother* smoother, const double correction[7], double now) {
  return guarded([&] {
    require(smoother && correction, "null argument");
    smoother->value.on_optimization_event(pose_in(correction), skyloop::Timestamp(now));
  });
}

sk_status sk_smoother_global_pose(const sk_smoother* smoother, const double local_pose[7], double now,
                                  double out_pose[7]) {
  return guarded([&] {
    require(smoother && local_pose && out_pose, "null argument");
    pose_out(smoother->value.global_pose(pose_in(local_pose), skyloop::Timestamp(now)), out_pose);
  });
}

void sk_smoother_free(sk_smoother* smoother) { delete smoother; }

sk_status sk_octree_new(double resolution, sk_octree** out) {
  return guarded([&] {
    require(out != nullptr, "null output handle");
    skyloop::mapping::OccupancyOctree::Params p;
    p.resolution = resolution;
    p.validate();
    *out = new sk_octree{skyloop::mapping::OccupancyOctree(p)};
  });
}

sk_status sk_octree_load(const char* path, sk_octree** out) {
  return guarded([&] {
    require(path && out, "null argument");
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::invalid_argument(std::string("cannot read '") + path + "'");
    skyloop::mapping::OccupancyOctree tree;
    try {
      tree = skyloop::mapping::OccupancyOctree::read_binary(in);
    } catch (const std::runtime_error& e) {
      throw std::invalid_argument(e.what());
    }
    *out = new sk_octree{std::move(tree)};
  });
}

sk_status sk_octree_save(const sk_octree* octree, const char* path) {
  return guarded([&] {
    require(octree && path, "null argument");
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw skyloop::WriteError(std::string("cannot open '") + path + "' for writing");
    octree->value.write_binary(out);
    out.flush();
    if (!out) throw skyloop::WriteError(std::string("write failed for '") + path + "'");
  });
}

sk_status sk_octree_insert_cloud(sk_octree* octree, const double* points, size_t count,
                                 const double sensor_origin[3]) {
  return guarded([&] {
    require(octree && sensor_origin && (points || count == 0), "null argument");
    skyloop::mapping::SubmapCloud cloud;
    cloud.points.reserve(count);
    for (size_t i = 0; i < count; ++i) cloud.points.emplace_back(points[3 * i], points[3 * i + 1], points[3 * i + 2]);
    octree->value.insert_cloud(cloud, {sensor_origin[0], sensor_origin[1], sensor_origin[2]});
  });
}

sk_status sk_octree_query(const sk_octree* octree, const double point[3], int* occupancy) {
  return guarded([&] {
    require(octree && point && occupancy, "null argument");
    switch (octree->value.query(Eigen::Vector3d(point[0], point[1], point[2]))) {
      case skyloop::mapping::Occupancy::unknown: *occupancy = SK_UNKNOWN; break;
      case skyloop::mapping::Occupancy::free: *occupancy = SK_FREE; break;
      case skyloop::mapping::Occupancy::occupied: *occupancy = SK_OCCUPIED; break;
    }
  });
}

sk_status sk_octree_prune(sk_octree* octree) {
  return guarded([&] {
    require(octree != nullptr, "null octree");
    octree->value.prune();
  });
}

sk_status sk_octree_leaf_count(const sk_octree* octree, size_t* count) {
  return guarded([&] {
    require(octree && count, "null argument");
    *count = octree->value.leaves().size();
  });
}

void sk_octree_free(sk_octree* octree) { delete octree; }

}  // extern "C"
