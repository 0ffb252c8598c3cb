// skyloop command-line tool. Talks to the library through the C API only.

#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "skyloop/skyloop.h"

namespace {

enum Exit : int {
  kOk = 0,
  kInternal = 1,
  kInvalid = 2,
  kWriteFailure = 3,
  kGauge = 4,
  kNoPath = 5,
};

int exit_code(sk_status s) {
  switch (s) {
    case SK_OK: return kOk;
    case SK_ERROR_INVALID_ARGUMENT: return kInvalid;
    case SK_ERROR_IO: return kWriteFailure;
    case SK_ERROR_GAUGE: return kGauge;
    case SK_ERROR_NO_PATH:
    case SK_ERROR_ENDPOINT: return kNoPath;
    default: return kInternal;
  }
}

int report(sk_status s) {
  if (s != SK_OK) std::cerr << "error: " << sk_last_error() << '\n';
  return exit_code(s);
}

struct ConfigDeleter {
  void operator()(sk_config* c) const { sk_config_free(c); }
};
using ConfigPtr = std::unique_ptr<sk_config, ConfigDeleter>;

/// Loads the config file (or defaults) and applies `key=value` overrides.
sk_status make_config(const std::string& path, const std::vector<std::string>& overrides, ConfigPtr& out) {
  sk_config* raw = nullptr;
  sk_status s = path.empty() ? sk_config_new(&raw) : sk_config_load(path.c_str(), &raw);
  if (s != SK_OK) return s;
  out.reset(raw);
  for (const auto& kv : overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) {
      std::cerr << "error: --set expects key=value, got '" << kv << "'\n";
      return SK_ERROR_INVALID_ARGUMENT;
    }
    s = sk_config_set(out.get(), kv.substr(0, eq).c_str(), kv.substr(eq + 1).c_str());
    if (s != SK_OK) return s;
  }
  return sk_config_validate(out.get());
}

bool parse_triplet(const std::string& text, std::size_t count, double* out) {
  std::stringstream ss(text);
  std::string item;
  std::size_t n = 0;
  while (std::getline(ss, item, ',')) {
    if (n == count) return false;
    char* end = nullptr;
    out[n] = std::strtod(item.c_str(), &end);
    if (end == item.c_str() || *end != '\0') return false;
    ++n;
  }
  return n == count;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"skyloop: pose-graph backend simulation, mapping and planning"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(sk_version()));

  std::string config_path, out_dir, trace_dir, octree_path, start_text, goal_text, bounds_text;
  std::string gps = "on", series = "smoothed", path_csv = "path.csv", compare_out;
  std::vector<std::string> overrides, run_dirs;

  auto* simulate = app.add_subcommand("simulate", "generate a synthetic flight trace bundle");
  simulate->add_option("-c,--config", config_path, "run config file")->required();
  simulate->add_option("-o,--out", out_dir, "output directory")->required();
  simulate->add_option("--set", overrides, "override a config entry (key=value)");

  auto* run = app.add_subcommand("run", "replay a trace bundle through the pipeline");
  run->add_option("-c,--config", config_path, "run config file")->required();
  run->add_option("-t,--trace", trace_dir, "trace bundle directory")->required();
  run->add_option("-o,--out", out_dir, "output directory")->required();
  run->add_option("--gps", gps, "use GPS constraints")->check(CLI::IsMember({"on", "off"}));
  run->add_option("--set", overrides, "override a config entry (key=value)");

  auto* plan = app.add_subcommand("plan", "plan a collision-free path in an octree");
  plan->add_option("-m,--octree", octree_path, "AOK1 octree file")->required();
  plan->add_option("--start", start_text, "start x,y,z")->required();
  plan->add_option("--goal", goal_text, "goal x,y,z")->required();
  plan->add_option("--bounds", bounds_text, "search box x0,y0,z0,x1,y1,z1");
  plan->add_option("-c,--config", config_path, "run config file");
  plan->add_option("-o,--out", path_csv, "path CSV")->capture_default_str();
  plan->add_option("--set", overrides, "override a config entry (key=value)");

  auto* compare = app.add_subcommand("compare", "merge runs into one long-format CSV");
  compare->add_option("runs", run_dirs, "run output directories")->required();
  compare->add_option("--series", series, "pose series")->check(CLI::IsMember({"smoothed", "raw"}));
  compare->add_option("-o,--out", compare_out, "output CSV (default stdout)");

  auto* show = app.add_subcommand("config", "print the effective config");
  show->add_option("-c,--config", config_path, "run config file");
  show->add_option("--set", overrides, "override a config entry (key=value)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kInvalid;
  }

  ConfigPtr config;
  if (*simulate) {
    if (sk_status s = make_config(config_path, overrides, config); s != SK_OK) return report(s);
    return report(sk_simulate(config.get(), out_dir.c_str()));
  }
  if (*run) {
    if (gps == "off") overrides.emplace_back("gps.enabled=false");
    if (sk_status s = make_config(config_path, overrides, config); s != SK_OK) return report(s);
    return report(sk_run(config.get(), trace_dir.c_str(), out_dir.c_str()));
  }
  if (*plan) {
    double start[3], goal[3], bounds[6];
    if (!parse_triplet(start_text, 3, start)) {
      std::cerr << "error: --start expects x,y,z\n";
      return kInvalid;
    }
    if (!parse_triplet(goal_text, 3, goal)) {
      std::cerr << "error: --goal expects x,y,z\n";
      return kInvalid;
    }
    if (!bounds_text.empty() && !parse_triplet(bounds_text, 6, bounds)) {
      std::cerr << "error: --bounds expects x0,y0,z0,x1,y1,z1\n";
      return kInvalid;
    }
    if (sk_status s = make_config(config_path, overrides, config); s != SK_OK) return report(s);
    double length = 0.0;
    std::size_t waypoints = 0;
    const sk_status s = sk_plan(config.get(), octree_path.c_str(), start, goal,
                                bounds_text.empty() ? nullptr : bounds, path_csv.c_str(), &length,
                                &waypoints);
    if (s != SK_OK) return report(s);
    std::printf("length = %.6f\nwaypoints = %zu\n", length, waypoints);
    return kOk;
  }
  if (*compare) {
    std::vector<const char*> dirs;
    for (const auto& d : run_dirs) dirs.push_back(d.c_str());
    const std::string which = series == "raw" ? "pose_raw" : "pose_smoothed";
    return report(sk_compare(dirs.data(), dirs.size(), which.c_str(),
                             compare_out.empty() ? nullptr : compare_out.c_str()));
  }
  if (*show) {
    if (sk_status s = make_config(config_path, overrides, config); s != SK_OK) return report(s);
    std::size_t length = 0;
    sk_config_effective(config.get(), nullptr, 0, &length);
    std::string text(length + 1, '\0');
    sk_config_effective(config.get(), text.data(), text.size(), nullptr);
    text.resize(length);
    std::cout << text;
    return kOk;
  }
  return kInvalid;
}
