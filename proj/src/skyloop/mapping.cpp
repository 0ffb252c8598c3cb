#include "skyloop/mapping.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <istream>
#include <limits>
#include <ostream>
#include <stdexcept>

#include "skyloop/text.hpp"

namespace skyloop::mapping {

std::size_t VoxelIndexHash::operator()(const VoxelIndex& i) const noexcept {
  std::size_t h = static_cast<std::uint32_t>(i.x);
  h = h * 0x9E3779B97F4A7C15ull ^ static_cast<std::uint32_t>(i.y);
  h = h * 0x9E3779B97F4A7C15ull ^ static_cast<std::uint32_t>(i.z);
  return h;
}

double logit(double p) { return std::log(p / (1.0 - p)); }
double sigmoid(double log_odds) { return 1.0 / (1.0 + std::exp(-log_odds)); }

// ---------------------------------------------------------------------------
// ProbabilityGrid

ProbabilityGrid::ProbabilityGrid(double edge, Params params) : edge_(edge), params_(params) {
  if (!(edge > 0.0)) throw std::invalid_argument("grid edge length must be > 0");
}

VoxelIndex ProbabilityGrid::index_of(const Eigen::Vector3d& p) const {
  const Eigen::Vector3d s = p / edge_;
  return {static_cast<std::int32_t>(std::floor(s.x())), static_cast<std::int32_t>(std::floor(s.y())),
          static_cast<std::int32_t>(std::floor(s.z()))};
}

Eigen::Vector3d ProbabilityGrid::center_of(const VoxelIndex& i) const {
  // Dividing by voxels-per-meter keeps decimal edges exact: (1 + 0.5) / 2.5 == 0.6.
  const double per_meter = 1.0 / edge_;
  return {(i.x + 0.5) / per_meter, (i.y + 0.5) / per_meter, (i.z + 0.5) / per_meter};
}

double ProbabilityGrid::probability(const VoxelIndex& i) const {
  const auto it = cells_.find(i);
  return it == cells_.end() ? 0.5 : it->second;
}

void ProbabilityGrid::set_probability(const VoxelIndex& i, double p) {
  if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("probability must be in [0, 1]");
  cells_[i] = p;
}

void ProbabilityGrid::apply_hit(const VoxelIndex& i) {
  const double lo = std::clamp(logit(probability(i)) + params_.hit_log_odds, params_.clamp_min,
                               params_.clamp_max);
  cells_[i] = sigmoid(lo);
}

std::vector<std::pair<VoxelIndex, double>> ProbabilityGrid::sorted_cells() const {
  std::vector<std::pair<VoxelIndex, double>> out(cells_.begin(), cells_.end());
  std::sort(out.begin(), out.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  return out;
}

std::pair<VoxelIndex, VoxelIndex> ProbabilityGrid::bounds() const {
  if (cells_.empty()) throw std::logic_error("bounds of an empty grid");
  VoxelIndex lo = cells_.begin()->first, hi = lo;
  for (const auto& [i, p] : cells_) {
    lo = {std::min(lo.x, i.x), std::min(lo.y, i.y), std::min(lo.z, i.z)};
    hi = {std::max(hi.x, i.x), std::max(hi.y, i.y), std::max(hi.z, i.z)};
  }
  return {lo, hi};
}

// ---------------------------------------------------------------------------
// SubmapGrid

void SubmapGrid::Params::validate() const {
  if (!(high_res_edge > 0.0) || !(low_res_edge > 0.0)) {
    throw std::invalid_argument("map grid edges must be > 0");
  }
  const double ratio = low_res_edge / high_res_edge;
  if (ratio < 1.0 || std::abs(ratio - std::round(ratio)) > 1e-9) {
    throw std::invalid_argument("map.low_res_edge must be an integer multiple of map.high_res_edge");
  }
  if (scans_per_submap < 1) throw std::invalid_argument("map.scans_per_submap must be >= 1");
}

SubmapGrid::SubmapGrid(int id, const Pose& origin, Params params)
    : id_(id),
      origin_(origin),
      params_(params),
      high_(params.high_res_edge, params.grid),
      low_(params.low_res_edge, params.grid) {
  params_.validate();
}

void SubmapGrid::insert_scan(const std::vector<Eigen::Vector3d>& points) {
  if (finished()) throw std::logic_error("submap " + std::to_string(id_) + " is finished");
  for (ProbabilityGrid* grid : {&high_, &low_}) {
    std::vector<VoxelIndex> hit;
    hit.reserve(points.size());
    for (const auto& p : points) hit.push_back(grid->index_of(p));
    std::sort(hit.begin(), hit.end());
    hit.erase(std::unique(hit.begin(), hit.end()), hit.end());
    for (const auto& i : hit) grid->apply_hit(i);
  }
  ++scans_;
}

SubmapCloud extract_cloud(const SubmapGrid& submap, const Pose& submap_global_pose,
                          double threshold, bool require_finished) {
  if (require_finished && !submap.finished()) {
    throw std::logic_error("extract_cloud: submap is not finished");
  }
  SubmapCloud cloud;
  cloud.submap_id = submap.id();
  const auto& grid = submap.low_res();
  for (const auto& [index, p] : grid.sorted_cells()) {
    if (p > threshold) cloud.points.push_back(submap_global_pose.transform(grid.center_of(index)));
  }
  return cloud;
}

void write_clouds_csv(std::ostream& os, const std::vector<SubmapCloud>& clouds) {
  os << "submap_id,x,y,z\n";
  for (const auto& c : clouds) {
    for (const auto& p : c.points) {
      os << c.submap_id << ',' << join_doubles({p.x(), p.y(), p.z()}) << '\n';
    }
  }
}

const char* to_string(Occupancy o) {
  switch (o) {
    case Occupancy::free: return "free";
    case Occupancy::occupied: return "occupied";
    case Occupancy::unknown: return "unknown";
  }
  return "unknown";
}

// ---------------------------------------------------------------------------
// OccupancyOctree

struct OccupancyOctree::Node {
  double log_odds = 0.0;
  bool known = false;
  std::unique_ptr<std::array<Node, 8>> children;

  Node() = default;
  Node(const Node& o) : log_odds(o.log_odds), known(o.known) {
    if (o.children) children = std::make_unique<std::array<Node, 8>>(*o.children);
  }
  Node& operator=(const Node& o) {
    if (this != &o) {
      Node tmp(o);
      log_odds = tmp.log_odds;
      known = tmp.known;
      children = std::move(tmp.children);
    }
    return *this;
  }
  Node(Node&&) noexcept = default;
  Node& operator=(Node&&) noexcept = default;

  void expand() {
    children = std::make_unique<std::array<Node, 8>>();
    for (auto& c : *children) {
      c.known = known;
      c.log_odds = log_odds;
    }
    known = false;
  }
};

namespace {

constexpr std::uint32_t kKeyOffset = 1u << 15;

int child_index(const OctreeKey& k, int depth) {
  const int bit = OccupancyOctree::kDepth - 1 - depth;
  return ((k.x >> bit) & 1) | (((k.y >> bit) & 1) << 1) | (((k.z >> bit) & 1) << 2);
}

}  // namespace

void OccupancyOctree::Params::validate() const {
  if (!(resolution > 0.0)) throw std::invalid_argument("map.octree_resolution must be > 0");
  if (!(hit > 0.0)) throw std::invalid_argument("map.octree_hit must be > 0");
  if (!(miss < 0.0)) throw std::invalid_argument("map.octree_miss must be < 0");
  if (!(clamp_min < clamp_max)) throw std::invalid_argument("octree clamp_min must be < clamp_max");
  if (free_threshold > occupied_threshold) {
    throw std::invalid_argument("octree free threshold must not exceed occupied threshold");
  }
}

OccupancyOctree::OccupancyOctree(Params params)
    : params_(params), root_(std::make_unique<Node>()) {
  params_.validate();
}

OccupancyOctree::OccupancyOctree(const OccupancyOctree& other)
    : params_(other.params_), root_(std::make_unique<Node>(*other.root_)) {}

OccupancyOctree& OccupancyOctree::operator=(const OccupancyOctree& other) {
  if (this != &other) {
    params_ = other.params_;
    root_ = std::make_unique<Node>(*other.root_);
  }
  return *this;
}

OccupancyOctree::OccupancyOctree(OccupancyOctree&&) noexcept = default;
OccupancyOctree& OccupancyOctree::operator=(OccupancyOctree&&) noexcept = default;
OccupancyOctree::~OccupancyOctree() = default;

bool OccupancyOctree::in_range(const Eigen::Vector3d& p) const {
  for (int i = 0; i < 3; ++i) {
    const double k = std::floor(p[i] / params_.resolution) + kKeyOffset;
    if (!(k >= 0.0 && k < 65536.0)) return false;
  }
  return true;
}

OctreeKey OccupancyOctree::key_of(const Eigen::Vector3d& p) const {
  if (!in_range(p)) throw std::out_of_range("point outside the octree's addressable volume");
  auto conv = [&](double v) {
    return static_cast<std::uint16_t>(std::floor(v / params_.resolution) + kKeyOffset);
  };
  return {conv(p.x()), conv(p.y()), conv(p.z())};
}

Eigen::Vector3d OccupancyOctree::center_of(const OctreeKey& k) const {
  const double per_meter = 1.0 / params_.resolution;
  return {(static_cast<double>(k.x) - kKeyOffset + 0.5) / per_meter,
          (static_cast<double>(k.y) - kKeyOffset + 0.5) / per_meter,
          (static_cast<double>(k.z) - kKeyOffset + 0.5) / per_meter};
}

Occupancy OccupancyOctree::classify(double lo) const {
  if (lo > params_.occupied_threshold) return Occupancy::occupied;
  if (lo < params_.free_threshold) return Occupancy::free;
  return Occupancy::unknown;
}

std::optional<double> OccupancyOctree::log_odds(const OctreeKey& k) const {
  const Node* n = root_.get();
  for (int d = 0; d < kDepth && n->children; ++d) n = &(*n->children)[child_index(k, d)];
  if (!n->known) return std::nullopt;
  return n->log_odds;
}

Occupancy OccupancyOctree::query(const OctreeKey& k) const {
  const auto lo = log_odds(k);
  return lo ? classify(*lo) : Occupancy::unknown;
}

Occupancy OccupancyOctree::query(const Eigen::Vector3d& p) const {
  if (!in_range(p)) return Occupancy::unknown;
  return query(key_of(p));
}

void OccupancyOctree::update(const OctreeKey& k, double delta) {
  Node* n = root_.get();
  for (int d = 0; d < kDepth; ++d) {
    if (!n->children) n->expand();
    n = &(*n->children)[child_index(k, d)];
  }
  const double base = n->known ? n->log_odds : 0.0;
  n->log_odds = std::clamp(base + delta, params_.clamp_min, params_.clamp_max);
  n->known = true;
}

void OccupancyOctree::set_log_odds(const OctreeKey& k, double value) {
  Node* n = root_.get();
  for (int d = 0; d < kDepth; ++d) {
    if (!n->children) n->expand();
    n = &(*n->children)[child_index(k, d)];
  }
  n->log_odds = std::clamp(value, params_.clamp_min, params_.clamp_max);
  n->known = true;
}

std::vector<OctreeKey> OccupancyOctree::ray_keys(const Eigen::Vector3d& origin,
                                                 const Eigen::Vector3d& end) const {
  std::vector<OctreeKey> keys;
  const OctreeKey start_key = key_of(origin);
  const OctreeKey end_key = key_of(end);
  if (start_key == end_key) return keys;

  const Eigen::Vector3d diff = end - origin;
  const double length = diff.norm();
  const Eigen::Vector3d dir = diff / length;
  const double res = params_.resolution;
  int current[3] = {start_key.x, start_key.y, start_key.z};
  const int target[3] = {end_key.x, end_key.y, end_key.z};
  int step[3];
  double t_max[3], t_delta[3];
  const Eigen::Vector3d c = center_of(start_key);
  for (int i = 0; i < 3; ++i) {
    if (dir[i] > 0.0) {
      step[i] = 1;
    } else if (dir[i] < 0.0) {
      step[i] = -1;
    } else {
      step[i] = 0;
    }
    if (step[i] != 0) {
      const double border = c[i] + step[i] * 0.5 * res;
      t_max[i] = (border - origin[i]) / dir[i];
      t_delta[i] = res / std::abs(dir[i]);
    } else {
      t_max[i] = std::numeric_limits<double>::infinity();
      t_delta[i] = std::numeric_limits<double>::infinity();
    }
  }

  keys.push_back(start_key);
  const std::size_t max_steps = 3u * 65536u;
  for (std::size_t s = 0; s < max_steps; ++s) {
    int dim = 0;
    if (t_max[1] < t_max[dim]) dim = 1;
    if (t_max[2] < t_max[dim]) dim = 2;
    if (t_max[dim] > length + 1e-9 * res) break;  // numerically past the endpoint
    current[dim] += step[dim];
    t_max[dim] += t_delta[dim];
    if (current[0] == target[0] && current[1] == target[1] && current[2] == target[2]) break;
    if (current[dim] < 0 || current[dim] > 65535) break;
    keys.push_back({static_cast<std::uint16_t>(current[0]), static_cast<std::uint16_t>(current[1]),
                    static_cast<std::uint16_t>(current[2])});
  }
  return keys;
}

void OccupancyOctree::insert_cloud(const SubmapCloud& cloud, const Eigen::Vector3d& sensor_origin) {
  std::vector<OctreeKey> occupied;
  occupied.reserve(cloud.points.size());
  for (const auto& p : cloud.points) occupied.push_back(key_of(p));
  std::sort(occupied.begin(), occupied.end());
  occupied.erase(std::unique(occupied.begin(), occupied.end()), occupied.end());

  if (params_.carve_free_space) {
    std::vector<OctreeKey> free;
    for (const auto& p : cloud.points) {
      auto ray = ray_keys(sensor_origin, p);
      free.insert(free.end(), ray.begin(), ray.end());
    }
    std::sort(free.begin(), free.end());
    free.erase(std::unique(free.begin(), free.end()), free.end());
    std::vector<OctreeKey> carve;
    std::set_difference(free.begin(), free.end(), occupied.begin(), occupied.end(),
                        std::back_inserter(carve));
    for (const auto& k : carve) update(k, params_.miss);
  }
  for (const auto& k : occupied) update(k, params_.hit);
}

void OccupancyOctree::prune() {
  struct Pruner {
    static void run(Node& n) {
      if (!n.children) return;
      for (auto& c : *n.children) run(c);
      const auto& ch = *n.children;
      bool all_leaves = true;
      for (const auto& c : ch) all_leaves = all_leaves && !c.children;
      if (!all_leaves) return;
      const bool all_known_equal = std::all_of(ch.begin(), ch.end(), [&](const Node& c) {
        return c.known && c.log_odds == ch[0].log_odds;
      });
      const bool all_unknown =
          std::all_of(ch.begin(), ch.end(), [](const Node& c) { return !c.known; });
      if (all_known_equal) {
        n.known = true;
        n.log_odds = ch[0].log_odds;
        n.children.reset();
      } else if (all_unknown) {
        n.known = false;
        n.children.reset();
      }
    }
  };
  Pruner::run(*root_);
}

std::vector<OccupancyOctree::Leaf> OccupancyOctree::leaves() const {
  std::vector<Leaf> out;
  struct Walker {
    std::vector<Leaf>& out;
    void run(const Node& n, int depth, std::uint32_t x, std::uint32_t y, std::uint32_t z) {
      if (!n.children) {
        if (n.known) {
          out.push_back({{static_cast<std::uint16_t>(x), static_cast<std::uint16_t>(y),
                          static_cast<std::uint16_t>(z)},
                         depth,
                         n.log_odds});
        }
        return;
      }
      const std::uint32_t half = 1u << (kDepth - depth - 1);
      for (int i = 0; i < 8; ++i) {
        run((*n.children)[static_cast<std::size_t>(i)], depth + 1, x + ((i & 1) ? half : 0),
            y + ((i & 2) ? half : 0), z + ((i & 4) ? half : 0));
      }
    }
  };
  Walker{out}.run(*root_, 0, 0, 0, 0);
  std::sort(out.begin(), out.end(), [](const Leaf& a, const Leaf& b) {
    return a.key != b.key ? a.key < b.key : a.depth < b.depth;
  });
  return out;
}

std::size_t OccupancyOctree::node_count() const {
  struct Counter {
    static std::size_t run(const Node& n) {
      std::size_t c = 1;
      if (n.children) {
        for (const auto& ch : *n.children) c += run(ch);
      }
      return c;
    }
  };
  return Counter::run(*root_);
}

void OccupancyOctree::for_each_occupied_in_box(
    const Eigen::Vector3d& lo, const Eigen::Vector3d& hi,
    const std::function<void(const OctreeKey&)>& fn) const {
  auto to_key = [&](double v) {
    const double k = std::floor(v / params_.resolution) + kKeyOffset;
    return static_cast<std::int64_t>(std::clamp(k, 0.0, 65535.0));
  };
  const std::int64_t qlo[3] = {to_key(lo.x()), to_key(lo.y()), to_key(lo.z())};
  const std::int64_t qhi[3] = {to_key(hi.x()), to_key(hi.y()), to_key(hi.z())};

  struct Walker {
    const OccupancyOctree& tree;
    const std::int64_t* qlo;
    const std::int64_t* qhi;
    const std::function<void(const OctreeKey&)>& fn;

    void run(const Node& n, int depth, std::int64_t x, std::int64_t y, std::int64_t z) {
      const std::int64_t span = std::int64_t{1} << (kDepth - depth);
      const std::int64_t org[3] = {x, y, z};
      std::int64_t a[3], b[3];
      for (int i = 0; i < 3; ++i) {
        a[i] = std::max(org[i], qlo[i]);
        b[i] = std::min(org[i] + span - 1, qhi[i]);
        if (a[i] > b[i]) return;
      }
      if (!n.children) {
        if (!n.known || tree.classify(n.log_odds) != Occupancy::occupied) return;
        for (std::int64_t kx = a[0]; kx <= b[0]; ++kx)
          for (std::int64_t ky = a[1]; ky <= b[1]; ++ky)
            for (std::int64_t kz = a[2]; kz <= b[2]; ++kz)
              fn({static_cast<std::uint16_t>(kx), static_cast<std::uint16_t>(ky),
                  static_cast<std::uint16_t>(kz)});
        return;
      }
      const std::int64_t half = span / 2;
      for (int i = 0; i < 8; ++i) {
        run((*n.children)[static_cast<std::size_t>(i)], depth + 1, x + ((i & 1) ? half : 0),
            y + ((i & 2) ? half : 0), z + ((i & 4) ? half : 0));
      }
    }
  };
  Walker{*this, qlo, qhi, fn}.run(*root_, 0, 0, 0, 0);
}

void OccupancyOctree::write_text(std::ostream& os) const {
  struct Row {
    OctreeKey key;
    double lo;
  };
  std::vector<Row> rows;
  for (const auto& leaf : leaves()) {
    const std::uint32_t s = leaf.span();
    for (std::uint32_t dx = 0; dx < s; ++dx)
      for (std::uint32_t dy = 0; dy < s; ++dy)
        for (std::uint32_t dz = 0; dz < s; ++dz)
          rows.push_back({{static_cast<std::uint16_t>(leaf.key.x + dx),
                           static_cast<std::uint16_t>(leaf.key.y + dy),
                           static_cast<std::uint16_t>(leaf.key.z + dz)},
                          leaf.log_odds});
  }
  std::sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) { return a.key < b.key; });
  for (const auto& r : rows) {
    const Eigen::Vector3d c = center_of(r.key);
    os << "OCC " << join_doubles({c.x(), c.y(), c.z()}, ' ') << ' ' << to_string(classify(r.lo))
       << ' ' << format_double(r.lo) << '\n';
  }
}

namespace {

constexpr char kMagic[4] = {'A', 'O', 'K', '1'};
constexpr std::uint32_t kFormatVersion = 1;

template <typename T>
void put_le(std::ostream& os, T v) {
  unsigned char bytes[sizeof(T)];
  std::uint64_t bits = 0;
  if constexpr (std::is_floating_point_v<T>) {
    static_assert(sizeof(T) == 8);
    std::memcpy(&bits, &v, 8);
  } else {
    bits = static_cast<std::uint64_t>(v);
  }
  for (std::size_t i = 0; i < sizeof(T); ++i) bytes[i] = static_cast<unsigned char>(bits >> (8 * i));
  os.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <typename T>
T get_le(std::istream& is) {
  unsigned char bytes[sizeof(T)];
  if (!is.read(reinterpret_cast<char*>(bytes), sizeof(T))) {
    throw std::runtime_error("truncated octree file");
  }
  std::uint64_t bits = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) bits |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
  if constexpr (std::is_floating_point_v<T>) {
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
  } else {
    return static_cast<T>(bits);
  }
}

}  // namespace

void OccupancyOctree::write_binary(std::ostream& os) const {
  os.write(kMagic, 4);
  put_le<std::uint32_t>(os, kFormatVersion);
  put_le<double>(os, params_.resolution);
  put_le<double>(os, params_.hit);
  put_le<double>(os, params_.miss);
  put_le<double>(os, params_.clamp_min);
  put_le<double>(os, params_.clamp_max);
  put_le<double>(os, params_.occupied_threshold);
  put_le<double>(os, params_.free_threshold);
  const auto all = leaves();
  put_le<std::uint64_t>(os, all.size());
  for (const auto& l : all) {
    put_le<std::uint16_t>(os, l.key.x);
    put_le<std::uint16_t>(os, l.key.y);
    put_le<std::uint16_t>(os, l.key.z);
    put_le<std::uint8_t>(os, static_cast<std::uint8_t>(l.depth));
    put_le<double>(os, l.log_odds);
  }
}

OccupancyOctree OccupancyOctree::read_binary(std::istream& is) {
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) {
    throw std::runtime_error("not an AOK1 octree file");
  }
  const auto version = get_le<std::uint32_t>(is);
  if (version != kFormatVersion) {
    throw std::runtime_error("unsupported octree format version " + std::to_string(version));
  }
  Params p;
  p.resolution = get_le<double>(is);
  p.hit = get_le<double>(is);
  p.miss = get_le<double>(is);
  p.clamp_min = get_le<double>(is);
  p.clamp_max = get_le<double>(is);
  p.occupied_threshold = get_le<double>(is);
  p.free_threshold = get_le<double>(is);
  OccupancyOctree tree(p);
  const auto count = get_le<std::uint64_t>(is);
  for (std::uint64_t i = 0; i < count; ++i) {
    OctreeKey k{get_le<std::uint16_t>(is), get_le<std::uint16_t>(is), get_le<std::uint16_t>(is)};
    const int depth = get_le<std::uint8_t>(is);
    const double lo = get_le<double>(is);
    if (depth > kDepth) throw std::runtime_error("corrupt octree leaf depth");
    Node* n = tree.root_.get();
    for (int d = 0; d < depth; ++d) {
      if (!n->children) n->expand();
      n = &(*n->children)[child_index(k, d)];
    }
    n->known = true;
    n->log_odds = lo;
  }
  return tree;
}

// ---------------------------------------------------------------------------

OctreePublisher::OctreePublisher(OccupancyOctree initial)
    : current_(std::make_shared<const OccupancyOctree>(std::move(initial))) {}

std::shared_ptr<const OccupancyOctree> OctreePublisher::snapshot() const {
  std::lock_guard lock(mutex_);
  return current_;
}

void OctreePublisher::publish(OccupancyOctree next) {
  auto ptr = std::make_shared<const OccupancyOctree>(std::move(next));
  std::lock_guard lock(mutex_);
  current_ = std::move(ptr);
}

}  // namespace skyloop::mapping
