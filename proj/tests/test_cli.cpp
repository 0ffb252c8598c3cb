// Runs the skyloop binary and checks exit codes and outputs.
#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include "fixtures.hpp"

namespace fs = std::filesystem;

namespace {

const fs::path kRoot = fixtures::temp_dir("cli");

int cli(const std::string& args) {
  const std::string cmd = std::string(SKYLOOP_CLI) + " " + args + " > " + (kRoot / "stdout.txt").string() +
                          " 2> " + (kRoot / "stderr.txt").string();
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string out() { return fixtures::read_file(kRoot / "stdout.txt"); }
std::string err() { return fixtures::read_file(kRoot / "stderr.txt"); }

std::string scenario(const std::string& name) { return std::string(SKYLOOP_SCENARIO_DIR) + "/" + name + ".conf"; }

std::string p(const fs::path& path) { return "'" + path.string() + "'"; }

}  // namespace

TEST_CASE("simulate, run and compare") {
  const auto conf = scenario("circle_loops");
  REQUIRE(cli("simulate -c " + conf + " -o " + p(kRoot / "trace")) == 0);
  REQUIRE(cli("simulate -c " + conf + " -o " + p(kRoot / "trace2")) == 0);
  for (const auto& e : fs::directory_iterator(kRoot / "trace")) {
    CHECK(fixtures::read_file(e.path()) == fixtures::read_file(kRoot / "trace2" / e.path().filename()));
  }

  REQUIRE(cli("run -c " + conf + " -t " + p(kRoot / "trace") + " -o " + p(kRoot / "off")) == 0);
  CHECK_FALSE(fs::exists(kRoot / "off" / "gps.csv"));
  const std::string report = fixtures::read_file(kRoot / "off" / "report.txt");
  const auto pos = report.find("loop_gap_reduction_pct = ");
  REQUIRE(pos != std::string::npos);
  CHECK(std::stod(report.substr(pos + 25)) >= 90.0);

  REQUIRE(cli("run -c " + conf + " -t " + p(kRoot / "trace") + " -o " + p(kRoot / "on") +
              " --set gps.enabled=true") == 0);
  CHECK(fs::exists(kRoot / "on" / "gps.csv"));
  REQUIRE(cli("run -c " + conf + " -t " + p(kRoot / "trace") + " -o " + p(kRoot / "off2") + " --gps off") == 0);
  CHECK(fixtures::read_file(kRoot / "off2" / "pose_smoothed.csv") ==
        fixtures::read_file(kRoot / "off" / "pose_smoothed.csv"));

  REQUIRE(cli("compare " + p(kRoot / "off") + " " + p(kRoot / "on")) == 0);
  CHECK(out().rfind("variant,t,x,y,z\n", 0) == 0);
  CHECK(out().find("\non,") != std::string::npos);
  REQUIRE(cli("compare " + p(kRoot / "off") + " " + p(kRoot / "on") + " " + p(kRoot / "off2") + " --series raw -o " +
              p(kRoot / "three.csv")) == 0);
  const std::string three = fixtures::read_file(kRoot / "three.csv");
  CHECK(three.find("\noff2,") != std::string::npos);
  CHECK(cli("compare " + p(kRoot / "off")) == 2);
}

TEST_CASE("invalid input exits 2") {
  CHECK(cli("simulate -c " + scenario("circle_loops") + " -o " + p(kRoot / "x") + " --set sim.gps_rate=50") == 2);
  CHECK(err().find("sim.gps_rate") != std::string::npos);
  CHECK(cli("simulate -c " + scenario("circle_loops") + " -o " + p(kRoot / "x") + " --set sim.nope=1") == 2);
  CHECK(err().find("sim.nope") != std::string::npos);
  CHECK(cli("simulate -c /nonexistent.conf -o " + p(kRoot / "x")) == 2);
  CHECK(cli("frobnicate") == 2);
  CHECK(cli("run -c " + scenario("circle_loops") + " -t " + p(kRoot / "missing") + " -o " + p(kRoot / "y")) == 2);
}

TEST_CASE("write failure exits 3") {
  { std::ofstream(kRoot / "file") << "x"; }
  CHECK(cli("simulate -c " + scenario("circle_loops") + " -o " + p(kRoot / "file" / "sub")) == 3);
}

TEST_CASE("gauge failure exits 4") {
  // One GPS fix and no heading leaves yaw free.
  REQUIRE(cli("simulate -c " + scenario("georef") + " -o " + p(kRoot / "georef") + " --set sim.gps_rate=0.001") == 0);
  CHECK(cli("run -c " + scenario("georef") + " -t " + p(kRoot / "georef") + " -o " + p(kRoot / "g") +
            " --set solver.initial_orientation=false") == 4);
}

TEST_CASE("plan") {
  const auto tree = fixtures::wall_with_gap();
  {
    std::ofstream os(kRoot / "wall.aok", std::ios::binary);
    tree.write_binary(os);
  }
  REQUIRE(cli("plan -m " + p(kRoot / "wall.aok") + " --start 2,2,2 --goal 8,8,8 --bounds 0.1,0.1,0.1,9.9,9.9,9.9 -o " +
              p(kRoot / "path.csv")) == 0);
  CHECK(out().rfind("length = ", 0) == 0);
  std::ifstream in(kRoot / "path.csv");
  std::string line;
  std::getline(in, line);
  CHECK(line == "x,y,z");
  skyloop::planning::Path path;
  while (std::getline(in, line)) {
    double x, y, z;
    REQUIRE(std::sscanf(line.c_str(), "%lf,%lf,%lf", &x, &y, &z) == 3);
    path.waypoints.emplace_back(x, y, z);
  }
  REQUIRE(path.waypoints.size() >= 2);
  CHECK(fixtures::oracle_path_ok(tree, path, 0.2));

  CHECK(cli("plan -m " + p(kRoot / "wall.aok") + " --start 2,2,2 --goal 5.1,1.1,1.1 -o " + p(kRoot / "p.csv")) == 5);
  CHECK(err().find("goal not free") != std::string::npos);
  CHECK(cli("plan -m " + p(kRoot / "wall.aok") + " --start 2,2,2 --goal 8,8,8 -o " + p(kRoot / "p.csv") +
            " --set planner.max_iterations=3 --set planner.goal_bias=0") == 5);
  CHECK(cli("plan -m " + p(kRoot / "wall.aok") + " --start 2,2 --goal 8,8,8") == 2);

  // A map that is free everywhere it was observed.
  skyloop::mapping::OccupancyOctree open;
  fixtures::fill_free(open, {0.1, 0.1, 0.1}, {4.9, 4.9, 4.9});
  open.prune();
  {
    std::ofstream os(kRoot / "open.aok", std::ios::binary);
    open.write_binary(os);
  }
  CHECK(cli("plan -m " + p(kRoot / "open.aok") + " --start 1,1,1 --goal 4,4,4 -o " + p(kRoot / "open.csv")) == 0);
}

TEST_CASE("config prints the effective config") {
  REQUIRE(cli("config -c " + scenario("circle_loops") + " --set seed=99") == 0);
  CHECK(out().rfind("seed = 99\n", 0) == 0);
  CHECK(out().find("gps.enabled = false\n") != std::string::npos);
}
