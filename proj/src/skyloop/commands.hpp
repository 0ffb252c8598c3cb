#pragma once

#include <array>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "skyloop/config.hpp"
#include "skyloop/planning.hpp"
#include "skyloop/simulator.hpp"

namespace skyloop {

inline constexpr int kBundleFormatVersion = 1;

/// Output could not be written.
class WriteError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input files are missing or malformed.
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// The planner exhausted its iteration budget.
class NoPathError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bundle files: ground_truth.csv, odometry.csv, gps.csv, loops.csv, scan_index.csv,
/// scan_points.csv, initial_orientation.csv, geo_origin.csv and manifest.txt.
void write_trace_bundle(const std::filesystem::path& dir, const sim::SimTrace& trace,
                        const RunConfig& config);
sim::SimTrace read_trace_bundle(const std::filesystem::path& dir);

/// Manifest: `#` metadata lines followed by the effective config, so the file itself
/// loads as a config.
std::string manifest_text(const RunConfig& config, const std::vector<std::string>& metadata);

void write_run_outputs(const std::filesystem::path& dir, const sim::RunArtifacts& run,
                       const RunConfig& config);
std::string report_text(const sim::RunArtifacts& run);

/// Generates a trace from the config and writes the bundle to `out_dir`.
void simulate_command(const RunConfig& config, const std::filesystem::path& out_dir);
/// Replays a bundle through the pipeline and writes the run outputs. Propagates graph::GaugeError.
sim::RunArtifacts run_command(const RunConfig& config, const std::filesystem::path& trace_dir,
                              const std::filesystem::path& out_dir);

struct PlanOutcome {
  planning::Path path;
  double length = 0.0;
};

/// Plans over an AOK1 octree file. Without explicit bounds the search box spans the
/// known map and both endpoints plus a 2 m margin. Throws EndpointError or NoPathError.
PlanOutcome plan_command(const RunConfig& config, const std::filesystem::path& octree_file,
                         const Eigen::Vector3d& start, const Eigen::Vector3d& goal,
                         const std::optional<planning::Box>& bounds,
                         const std::filesystem::path& out_csv);

/// Long-format `variant,t,x,y,z` from `series` (pose_smoothed or pose_raw)
/// of each run directory. Throws InputError on fewer than two runs or mismatched series.
void compare_command(const std::vector<std::filesystem::path>& run_dirs, std::ostream& out,
                     const std::string& series = "pose_smoothed");

}  // namespace skyloop
