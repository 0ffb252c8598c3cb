#include "skyloop/planning.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include "skyloop/random.hpp"
#include "skyloop/text.hpp"

namespace skyloop::planning {

void PlanRequest::validate() const {
  if (!(bounds.min.array() < bounds.max.array()).all()) {
    throw std::invalid_argument("planner bounds must have positive extent");
  }
  if (!bounds.contains(start)) throw std::invalid_argument("start outside planner bounds");
  if (!bounds.contains(goal)) throw std::invalid_argument("goal outside planner bounds");
  if (!(clearance >= 0.0)) throw std::invalid_argument("planner.clearance must be >= 0");
  if (!(step > 0.0)) throw std::invalid_argument("planner.step must be > 0");
  if (!(goal_tolerance >= 0.0)) throw std::invalid_argument("planner.goal_tolerance must be >= 0");
  if (!(goal_bias >= 0.0 && goal_bias <= 1.0)) {
    throw std::invalid_argument("planner.goal_bias must be in [0, 1]");
  }
  if (max_iterations < 1) throw std::invalid_argument("planner.max_iterations must be >= 1");
}

double Path::length() const {
  double total = 0.0;
  for (std::size_t i = 1; i < waypoints.size(); ++i) {
    total += (waypoints[i] - waypoints[i - 1]).norm();
  }
  return total;
}

namespace {

double point_segment_distance(const Eigen::Vector3d& p, const Eigen::Vector3d& a,
                              const Eigen::Vector3d& b) {
  const Eigen::Vector3d ab = b - a;
  const double len2 = ab.squaredNorm();
  if (len2 == 0.0) return (p - a).norm();
  const double t = std::clamp((p - a).dot(ab) / len2, 0.0, 1.0);
  return (a + t * ab - p).norm();
}

/// Closed box [lo, hi] against segment a->b, slab method.
bool segment_hits_box(const Eigen::Vector3d& a, const Eigen::Vector3d& b,
                      const Eigen::Vector3d& lo, const Eigen::Vector3d& hi) {
  double t0 = 0.0, t1 = 1.0;
  const Eigen::Vector3d d = b - a;
  for (int i = 0; i < 3; ++i) {
    if (d[i] == 0.0) {
      if (a[i] < lo[i] || a[i] > hi[i]) return false;
      continue;
    }
    double ta = (lo[i] - a[i]) / d[i];
    double tb = (hi[i] - a[i]) / d[i];
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
    if (t0 > t1) return false;
  }
  return true;
}

}  // namespace

CollisionChecker::CollisionChecker(const mapping::OccupancyOctree& octree, double clearance,
                                   bool allow_unknown)
    : octree_(octree), clearance_(clearance), allow_unknown_(allow_unknown) {
  if (!(clearance >= 0.0)) throw std::invalid_argument("clearance must be >= 0");
}

bool CollisionChecker::segment_free(const Eigen::Vector3d& a, const Eigen::Vector3d& b) const {
  const double res = octree_.resolution();
  if (!octree_.in_range(a) || !octree_.in_range(b)) return false;

  const Eigen::Vector3d margin = Eigen::Vector3d::Constant(clearance_ + res);
  const Eigen::Vector3d lo = a.cwiseMin(b) - margin;
  const Eigen::Vector3d hi = a.cwiseMax(b) + margin;
  const Eigen::Vector3d half = Eigen::Vector3d::Constant(0.5 * res);
  bool blocked = false;
  octree_.for_each_occupied_in_box(lo, hi, [&](const mapping::OctreeKey& k) {
    if (blocked) return;
    const Eigen::Vector3d c = octree_.center_of(k);
    if (point_segment_distance(c, a, b) <= clearance_ || segment_hits_box(a, b, c - half, c + half)) {
      blocked = true;
    }
  });
  if (blocked) return false;

  if (!allow_unknown_) {
    const double len = (b - a).norm();
    const int n = std::max(1, static_cast<int>(std::ceil(len / (0.5 * res))));
    for (int i = 0; i <= n; ++i) {
      const Eigen::Vector3d p = a + (b - a) * (static_cast<double>(i) / n);
      if (octree_.query(p) == mapping::Occupancy::unknown) return false;
    }
  }
  return true;
}

bool validate_segment(const mapping::OccupancyOctree& octree, const Eigen::Vector3d& a,
                      const Eigen::Vector3d& b, double clearance, bool allow_unknown) {
  return CollisionChecker(octree, clearance, allow_unknown).segment_free(a, b);
}

std::optional<Path> plan_rrt(const mapping::OccupancyOctree& octree, const PlanRequest& request) {
  request.validate();
  const CollisionChecker checker(octree, request.clearance, request.allow_unknown);
  if (!checker.point_free(request.start)) throw EndpointError("start not free");
  if (!checker.point_free(request.goal)) throw EndpointError("goal not free");

  if ((request.goal - request.start).norm() <= request.step &&
      checker.segment_free(request.start, request.goal)) {
    return Path{{request.start, request.goal}};
  }

  // Bidirectional: one tree grows from the start, one from the goal. Each iteration
  // extends one tree a single step toward a sample, then lets the other tree chase the
  // new vertex greedily. The trees swap roles every iteration.
  struct Tree {
    std::vector<Eigen::Vector3d> vertices;
    std::vector<std::size_t> parent;

    std::size_t nearest(const Eigen::Vector3d& p) const {
      std::size_t best_i = 0;
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < vertices.size(); ++i) {
        const double d2 = (vertices[i] - p).squaredNorm();
        if (d2 < best) {
          best = d2;
          best_i = i;
        }
      }
      return best_i;
    }
    std::size_t add(const Eigen::Vector3d& p, std::size_t from) {
      vertices.push_back(p);
      parent.push_back(from);
      return vertices.size() - 1;
    }
    // Root first.
    std::vector<Eigen::Vector3d> branch(std::size_t leaf) const {
      std::vector<Eigen::Vector3d> out;
      for (std::size_t i = leaf;; i = parent[i]) {
        out.push_back(vertices[i]);
        if (i == 0) break;
      }
      std::reverse(out.begin(), out.end());
      return out;
    }
  };

  const double step = request.step;
  auto steer = [step](const Eigen::Vector3d& from, const Eigen::Vector3d& target) {
    const Eigen::Vector3d dir = target - from;
    const double dist = dir.norm();
    return dist > step ? Eigen::Vector3d(from + dir * (step / dist)) : target;
  };

  Tree trees[2] = {{{request.start}, {0}}, {{request.goal}, {0}}};
  RandomStream rng(request.seed, "planner");
  const Box& box = request.bounds;
  for (int it = 0; it < request.max_iterations; ++it) {
    const int a = it % 2, b = 1 - a;
    Tree& grow = trees[a];
    Tree& chase = trees[b];

    Eigen::Vector3d sample;
    if (rng.uniform() < request.goal_bias) {
      sample = chase.vertices.front();
    } else {
      for (int d = 0; d < 3; ++d) sample[d] = rng.uniform(box.min[d], box.max[d]);
    }
    const std::size_t near = grow.nearest(sample);
    const Eigen::Vector3d to = steer(grow.vertices[near], sample);
    if ((to - grow.vertices[near]).norm() < 1e-12 || !checker.segment_free(grow.vertices[near], to)) continue;
    const std::size_t added = grow.add(to, near);

    std::size_t cur = chase.nearest(to);
    while (true) {
      const Eigen::Vector3d& from = chase.vertices[cur];
      const Eigen::Vector3d next = steer(from, to);
      if (!checker.segment_free(from, next)) break;
      if (next == to) {
        auto first = trees[0].branch(a == 0 ? added : cur);
        auto second = trees[1].branch(a == 1 ? added : cur);
        first.insert(first.end(), second.rbegin(), second.rend());
        return Path{std::move(first)};
      }
      cur = chase.add(next, cur);
    }
  }
  return std::nullopt;
}

Path shortcut(const Path& path, const mapping::OccupancyOctree& octree, double clearance,
              std::uint64_t seed, bool allow_unknown, int attempts) {
  if (path.waypoints.size() <= 2) return path;
  const CollisionChecker checker(octree, clearance, allow_unknown);
  RandomStream rng(seed, "shortcut");
  std::vector<Eigen::Vector3d> pts = path.waypoints;

  for (int k = 0; k < attempts && pts.size() > 2; ++k) {
    const auto n = pts.size();
    auto i = static_cast<std::size_t>(rng.uniform() * static_cast<double>(n));
    auto j = static_cast<std::size_t>(rng.uniform() * static_cast<double>(n));
    if (i > j) std::swap(i, j);
    if (j >= n || j < i + 2) continue;
    if (checker.segment_free(pts[i], pts[j])) {
      pts.erase(pts.begin() + static_cast<std::ptrdiff_t>(i + 1),
                pts.begin() + static_cast<std::ptrdiff_t>(j));
    }
  }

  // Greedy pass: from each kept waypoint jump to the farthest directly reachable one.
  std::vector<Eigen::Vector3d> out{pts.front()};
  std::size_t i = 0;
  while (i + 1 < pts.size()) {
    std::size_t next = i + 1;
    for (std::size_t j = pts.size() - 1; j > i + 1; --j) {
      if (checker.segment_free(pts[i], pts[j])) {
        next = j;
        break;
      }
    }
    out.push_back(pts[next]);
    i = next;
  }
  return Path{std::move(out)};
}

void write_path_csv(std::ostream& os, const Path& path) {
  os << "x,y,z\n";
  for (const auto& p : path.waypoints) os << join_doubles({p.x(), p.y(), p.z()}) << '\n';
}

}  // namespace skyloop::planning
