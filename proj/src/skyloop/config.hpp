#pragma once

#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "skyloop/simulator.hpp"

namespace skyloop {

/// Invalid configuration; the message starts with the offending key when there is one.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct PlannerSettings {
  double clearance = 0.2;
  double step = 0.5;
  int max_iterations = 10000;
  double goal_bias = 0.1;
  double goal_tolerance = 0.25;
  bool allow_unknown = false;
  bool shortcut = true;
  int shortcut_attempts = 100;
};

/// Every tunable of a simulate/run/plan invocation.
struct RunConfig {
  std::uint64_t seed = 42;
  bool gps_enabled = true;
  double map_hit_probability = 0.65;
  sim::SimConfig sim;
  sim::PipelineSettings pipeline;
  PlannerSettings planner;

  /// Simulator settings with the run seed applied.
  sim::SimConfig sim_config() const;
  /// Pipeline settings with derived fields filled in.
  sim::PipelineSettings pipeline_settings() const;

  /// Throws ConfigError.
  void validate() const;
};

/// Assigns `value` to `key`. Throws ConfigError for unknown keys or unparsable values.
void set_config_value(RunConfig& config, std::string_view key, std::string_view value);

/// Parses `key = value` lines; `#` starts a comment. Later assignments win.
RunConfig parse_run_config(std::istream& is);
RunConfig load_run_config(const std::string& path);

/// All keys with their current values, one `key = value` per line, fixed order.
std::string effective_config_text(const RunConfig& config);
std::vector<std::string> config_keys();

/// FNV-1a 64 of the effective config text.
std::uint64_t config_hash(const RunConfig& config);
std::uint64_t fnv1a64(std::string_view bytes);

}  // namespace skyloop
