#include "skyloop/graph.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>

#include "skyloop/text.hpp"

namespace skyloop::graph {

// ---------------------------------------------------------------------------
// PoseGraph

NodeId PoseGraph::add_node(Timestamp time, const Pose& local_pose, const Pose& global_pose) {
  if (!nodes_.empty() && !(time > nodes_.back().time)) {
    throw std::invalid_argument("node timestamps must be strictly increasing");
  }
  const NodeId id = nodes_.empty() ? 0 : nodes_.back().id + 1;
  nodes_.push_back({id, time, local_pose, global_pose});
  return id;
}

std::size_t PoseGraph::index_of(NodeId id) const {
  // ids are contiguous from the first node's id
  if (nodes_.empty()) throw std::out_of_range("empty graph");
  const NodeId offset = id - nodes_.front().id;
  if (offset < 0 || static_cast<std::size_t>(offset) >= nodes_.size() ||
      nodes_[static_cast<std::size_t>(offset)].id != id) {
    throw std::out_of_range("unknown node id " + std::to_string(id));
  }
  return static_cast<std::size_t>(offset);
}

void PoseGraph::add_relative(const RelativeConstraint& c) {
  if (c.from_id == c.to_id) throw std::invalid_argument("relative constraint to itself");
  if (!(c.translation_weight > 0.0) || !(c.rotation_weight > 0.0)) {
    throw std::invalid_argument("relative constraint weights must be > 0");
  }
  index_of(c.from_id);
  index_of(c.to_id);
  relative_.push_back(c);
}

void PoseGraph::add_gps(const GpsConstraint& c) {
  if (!(c.measurement.sigma_enu.array() > 0.0).all()) {
    throw std::invalid_argument("GPS sigmas must be > 0");
  }
  if (c.beta < 0.0 || c.beta > 1.0) throw std::invalid_argument("GPS beta outside [0, 1]");
  index_of(c.node_before);
  index_of(c.node_after);
  gps_.push_back(c);
}

// ---------------------------------------------------------------------------
// GPS constraints

void GpsWeighting::validate() const {
  if (a < 0.0 || b < 0.0 || !std::isfinite(a) || !std::isfinite(b)) {
    throw std::invalid_argument("gps.weighting.a and gps.weighting.b must be >= 0");
  }
  if (mode == GpsWeightingMode::affine && a == 0.0 && b == 0.0) {
    throw std::invalid_argument("gps.weighting.a and gps.weighting.b cannot both be 0");
  }
  if (huber_delta && !(*huber_delta > 0.0)) {
    throw std::invalid_argument("gps.huber_delta must be > 0");
  }
}

std::optional<GpsConstraint> attach_gps(const PoseGraph& graph, const GpsMeasurement& m) {
  const auto& nodes = graph.nodes();
  if (nodes.size() < 2) return std::nullopt;
  if (m.time < nodes.front().time || m.time > nodes.back().time) return std::nullopt;

  // first node with time > m.time
  auto upper = std::upper_bound(nodes.begin(), nodes.end(), m.time,
                                [](Timestamp t, const TrajectoryNode& n) { return t < n.time; });
  std::size_t after = upper == nodes.end() ? nodes.size() - 1
                                           : static_cast<std::size_t>(upper - nodes.begin());
  std::size_t before = after - 1;
  GpsConstraint c;
  c.measurement = m;
  c.node_before = nodes[before].id;
  c.node_after = nodes[after].id;
  if (upper == nodes.end()) {
    c.beta = 1.0;  // exactly at the last node
  } else {
    c.beta = (m.time - nodes[before].time) / (nodes[after].time - nodes[before].time);
  }
  return c;
}

Eigen::Vector3d gps_residual(const Pose& pose_n, const Pose& pose_n1, const GpsConstraint& c) {
  // position(slerp(T_n, T_n1, beta)) only depends on the translations
  const double b = c.beta;
  return (1.0 - b) * pose_n.translation + b * pose_n1.translation - c.measurement.position_enu;
}

Eigen::Vector3d gps_axis_weights(const Eigen::Vector3d& sigma, const GpsWeighting& w) {
  Eigen::Vector3d out;
  switch (w.mode) {
    case GpsWeightingMode::inverse_diagonal:
      out = sigma.cwiseInverse();
      break;
    case GpsWeightingMode::isotropic_max:
      out = Eigen::Vector3d::Constant(1.0 / sigma.maxCoeff());
      break;
    case GpsWeightingMode::affine:
      out = w.a * sigma.cwiseInverse() + Eigen::Vector3d::Constant(w.b);
      break;
  }
  for (int i = 0; i < 3; ++i) {
    if (!w.axis_mask[static_cast<std::size_t>(i)]) out[i] = 0.0;
  }
  return out;
}

Eigen::Vector3d gps_weighted_cost(const Eigen::Vector3d& residual, const Eigen::Vector3d& sigma,
                                  const GpsWeighting& w) {
  return gps_axis_weights(sigma, w).cwiseProduct(residual);
}

HuberValue huber_loss(double squared_norm, double delta) {
  if (squared_norm < 0.0 || !(delta > 0.0)) {
    throw std::invalid_argument("huber_loss: squared_norm >= 0 and delta > 0 required");
  }
  if (squared_norm <= delta * delta) return {squared_norm, 1.0};
  const double r = std::sqrt(squared_norm);
  return {2.0 * delta * r - delta * delta, delta / r};
}

// ---------------------------------------------------------------------------
// Relative constraints and priors

RelativeLinearization linearize_relative(const Pose& pose_i, const Pose& pose_j,
                                         const RelativeConstraint& c) {
  const Eigen::Matrix3d ri_t = pose_i.rotation.matrix().transpose();
  const Eigen::Vector3d dt = ri_t * (pose_j.translation - pose_i.translation);
  const Rotation rel_rot = pose_i.rotation.inverse() * pose_j.rotation;
  const Eigen::Vector3d rot_err = (c.measured.rotation.inverse() * rel_rot).log();
  const Eigen::Matrix3d jr_inv = so3::right_jacobian_inverse(rot_err);

  RelativeLinearization out;
  out.residual.head<3>() = c.translation_weight * (dt - c.measured.translation);
  out.residual.tail<3>() = c.rotation_weight * rot_err;

  out.jacobian_i.setZero();
  out.jacobian_j.setZero();
  out.jacobian_i.block<3, 3>(0, 0) = -c.translation_weight * ri_t;
  out.jacobian_i.block<3, 3>(0, 3) = c.translation_weight * so3::skew(dt);
  out.jacobian_i.block<3, 3>(3, 3) =
      -c.rotation_weight * jr_inv * rel_rot.matrix().transpose();
  out.jacobian_j.block<3, 3>(0, 0) = c.translation_weight * ri_t;
  out.jacobian_j.block<3, 3>(3, 3) = c.rotation_weight * jr_inv;
  return out;
}

Vector6d relative_residual(const Pose& pose_i, const Pose& pose_j, const RelativeConstraint& c) {
  return linearize_relative(pose_i, pose_j, c).residual;
}

GpsLinearization linearize_gps(const Pose& pose_n, const Pose& pose_n1, const GpsConstraint& c) {
  GpsLinearization out;
  out.residual = gps_residual(pose_n, pose_n1, c);
  out.jacobian_n.setZero();
  out.jacobian_n1.setZero();
  out.jacobian_n.leftCols<3>() = (1.0 - c.beta) * Eigen::Matrix3d::Identity();
  out.jacobian_n1.leftCols<3>() = c.beta * Eigen::Matrix3d::Identity();
  return out;
}

Eigen::Vector3d orientation_prior_residual(const Pose& pose, const Rotation& q0) {
  return (q0.inverse() * pose.rotation).log();
}

OrientationPriorLinearization linearize_orientation_prior(const Pose& pose, const Rotation& q0) {
  OrientationPriorLinearization out;
  out.residual = orientation_prior_residual(pose, q0);
  out.jacobian.setZero();
  out.jacobian.rightCols<3>() = so3::right_jacobian_inverse(out.residual);
  return out;
}

void set_initial_orientation(PoseGraph& graph, const Rotation& q0, double weight) {
  if (graph.empty()) throw std::invalid_argument("set_initial_orientation: graph has no nodes");
  if (!(weight > 0.0)) throw std::invalid_argument("orientation prior weight must be > 0");
  graph.initial_orientation_prior = OrientationPrior{q0, weight};
}

Pose retract(const Pose& p, const Vector6d& delta) {
  return Pose(p.rotation * Rotation::exp(delta.tail<3>()), p.translation + delta.head<3>());
}

// ---------------------------------------------------------------------------
// Solver

void SolverSettings::validate() const {
  if (!(initial_lambda > 0.0)) throw std::invalid_argument("solver.initial_lambda must be > 0");
  if (!(lambda_increase > 1.0) || !(lambda_decrease > 1.0)) {
    throw std::invalid_argument("solver lambda factors must be > 1");
  }
  if (max_iterations < 1) throw std::invalid_argument("solver.max_iterations must be >= 1");
  if (!(relative_tolerance > 0.0)) {
    throw std::invalid_argument("solver.relative_tolerance must be > 0");
  }
  if (!(gauge_translation_weight > 0.0) || !(gauge_rotation_weight > 0.0) ||
      !(weak_position_weight > 0.0)) {
    throw std::invalid_argument("solver prior weights must be > 0");
  }
  gps.validate();
}

namespace {

/// Which anchor the solver adds on node 0 besides user priors.
struct GaugePrior {
  bool position = false;
  bool rotation = false;
  Pose target;
  double translation_weight = 0.0;
  double rotation_weight = 0.0;
};

GaugePrior choose_gauge(const PoseGraph& graph, const SolverSettings& s) {
  GaugePrior g;
  if (graph.empty() || !graph.gps_constraints().empty()) return g;
  g.target = graph.nodes().front().global_pose;
  g.position = true;
  if (graph.initial_orientation_prior) {
    g.translation_weight = s.weak_position_weight;
  } else {
    g.rotation = true;
    g.translation_weight = s.gauge_translation_weight;
    g.rotation_weight = s.gauge_rotation_weight;
  }
  return g;
}

/// One residual block touching one or two nodes. Jacobians already carry weights and
/// robust scaling so that cost contributions are `cost` and gradients J^T r.
struct Block {
  std::size_t a = 0;
  std::size_t b = 0;
  bool two = false;
  Eigen::VectorXd r;
  Eigen::MatrixXd ja;
  Eigen::MatrixXd jb;
};

struct Problem {
  const PoseGraph& graph;
  const SolverSettings& settings;
  GaugePrior gauge;
  std::vector<std::size_t> rel_from, rel_to, gps_n, gps_n1;

  Problem(const PoseGraph& g, const SolverSettings& s)
      : graph(g), settings(s), gauge(choose_gauge(g, s)) {
    for (const auto& c : g.relative_constraints()) {
      rel_from.push_back(g.index_of(c.from_id));
      rel_to.push_back(g.index_of(c.to_id));
    }
    for (const auto& c : g.gps_constraints()) {
      gps_n.push_back(g.index_of(c.node_before));
      gps_n1.push_back(g.index_of(c.node_after));
    }
  }

  /// Total cost; when `blocks` is non-null also emits linearized blocks.
  double evaluate(const std::vector<Pose>& x, std::vector<Block>* blocks) const {
    double cost = 0.0;
    const auto& rel = graph.relative_constraints();
    for (std::size_t k = 0; k < rel.size(); ++k) {
      const std::size_t i = rel_from[k], j = rel_to[k];
      if (blocks) {
        auto lin = linearize_relative(x[i], x[j], rel[k]);
        cost += lin.residual.squaredNorm();
        blocks->push_back({i, j, true, lin.residual, lin.jacobian_i, lin.jacobian_j});
      } else {
        cost += relative_residual(x[i], x[j], rel[k]).squaredNorm();
      }
    }

    const auto& gps = graph.gps_constraints();
    const auto& w = settings.gps;
    for (std::size_t k = 0; k < gps.size(); ++k) {
      const std::size_t n = gps_n[k], n1 = gps_n1[k];
      const auto lin = linearize_gps(x[n], x[n1], gps[k]);
      const Eigen::Vector3d weights = gps_axis_weights(gps[k].measurement.sigma_enu, w);
      const Eigen::Vector3d e = weights.cwiseProduct(lin.residual);
      const double sq = e.squaredNorm();
      double scale = 1.0;
      if (w.huber_delta) {
        const auto h = huber_loss(sq, *w.huber_delta);
        cost += h.value;
        scale = std::sqrt(h.derivative);
      } else {
        cost += sq;
      }
      if (blocks) {
        const Eigen::Matrix3d wd = (scale * weights).asDiagonal();
        blocks->push_back({n, n1, n != n1, scale * e, wd * lin.jacobian_n, wd * lin.jacobian_n1});
        if (n == n1) blocks->back().ja += blocks->back().jb;
      }
    }

    if (graph.initial_orientation_prior && !x.empty()) {
      const auto& prior = *graph.initial_orientation_prior;
      const auto lin = linearize_orientation_prior(x[0], prior.orientation);
      cost += prior.weight * prior.weight * lin.residual.squaredNorm();
      if (blocks) {
        blocks->push_back({0, 0, false, prior.weight * lin.residual, prior.weight * lin.jacobian,
                           Eigen::MatrixXd()});
      }
    }

    if (gauge.position) {
      const Eigen::Vector3d r = gauge.translation_weight * (x[0].translation - gauge.target.translation);
      cost += r.squaredNorm();
      if (blocks) {
        Matrix36d j = Matrix36d::Zero();
        j.leftCols<3>() = gauge.translation_weight * Eigen::Matrix3d::Identity();
        blocks->push_back({0, 0, false, r, j, Eigen::MatrixXd()});
      }
    }
    if (gauge.rotation) {
      const auto lin = linearize_orientation_prior(x[0], gauge.target.rotation);
      cost += gauge.rotation_weight * gauge.rotation_weight * lin.residual.squaredNorm();
      if (blocks) {
        blocks->push_back({0, 0, false, gauge.rotation_weight * lin.residual,
                           gauge.rotation_weight * lin.jacobian, Eigen::MatrixXd()});
      }
    }
    return cost;
  }
};

using SparseMatrix = Eigen::SparseMatrix<double>;

void add_block(std::vector<Eigen::Triplet<double>>& trip, std::size_t row, std::size_t col,
               const Eigen::MatrixXd& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      trip.emplace_back(static_cast<int>(6 * row + static_cast<std::size_t>(r)),
                        static_cast<int>(6 * col + static_cast<std::size_t>(c)), m(r, c));
    }
  }
}

void build_normal_equations(const std::vector<Block>& blocks, std::size_t n_nodes,
                            SparseMatrix& h, Eigen::VectorXd& g) {
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(blocks.size() * 36 * 4);
  g = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(6 * n_nodes));
  for (const auto& b : blocks) {
    add_block(trip, b.a, b.a, b.ja.transpose() * b.ja);
    g.segment<6>(static_cast<Eigen::Index>(6 * b.a)) += b.ja.transpose() * b.r;
    if (b.two) {
      add_block(trip, b.b, b.b, b.jb.transpose() * b.jb);
      const Eigen::MatrixXd ab = b.ja.transpose() * b.jb;
      add_block(trip, b.a, b.b, ab);
      add_block(trip, b.b, b.a, ab.transpose());
      g.segment<6>(static_cast<Eigen::Index>(6 * b.b)) += b.jb.transpose() * b.r;
    }
  }
  const auto dim = static_cast<Eigen::Index>(6 * n_nodes);
  h.resize(dim, dim);
  h.setFromTriplets(trip.begin(), trip.end());
}

void check_gauge(const SparseMatrix& h) {
  Eigen::SimplicialLDLT<SparseMatrix> ldlt(h);
  if (ldlt.info() != Eigen::Success) {
    throw GaugeError("singular normal equations: graph gauge is not fixed");
  }
  const Eigen::VectorXd d = ldlt.vectorD();
  const double max_pivot = d.cwiseAbs().maxCoeff();
  if (!(d.minCoeff() > 1e-12 * max_pivot)) {
    throw GaugeError(
        "singular normal equations: add a pose prior, orientation prior or GPS constraints");
  }
}

}  // namespace

double total_cost(const PoseGraph& graph, const std::vector<Pose>& poses,
                  const SolverSettings& settings) {
  return Problem(graph, settings).evaluate(poses, nullptr);
}

OptimizationResult optimize(const PoseGraph& graph, const SolverSettings& settings) {
  settings.validate();
  if (graph.empty()) throw std::invalid_argument("optimize: empty graph");

  const Problem problem(graph, settings);
  const std::size_t n = graph.nodes().size();
  std::vector<Pose> x;
  x.reserve(n);
  for (const auto& node : graph.nodes()) x.push_back(node.global_pose);

  OptimizationResult out;
  auto& rep = out.report;
  double cost = problem.evaluate(x, nullptr);
  rep.initial_cost = cost;
  rep.cost_history.push_back(cost);

  double lambda = settings.initial_lambda;
  std::vector<Block> blocks;
  SparseMatrix h;
  Eigen::VectorXd g;
  Eigen::SimplicialLDLT<SparseMatrix> solver;
  bool done = false;

  for (int it = 0; it < settings.max_iterations && !done; ++it) {
    blocks.clear();
    problem.evaluate(x, &blocks);
    build_normal_equations(blocks, n, h, g);
    if (it == 0) check_gauge(h);
    rep.iterations = it + 1;
    if (cost == 0.0 || g.cwiseAbs().maxCoeff() == 0.0) {
      rep.converged = true;
      break;
    }

    const Eigen::VectorXd diag = h.diagonal().cwiseMax(1e-12);
    while (true) {
      SparseMatrix damped = h;
      for (Eigen::Index k = 0; k < damped.rows(); ++k) damped.coeffRef(k, k) += lambda * diag[k];
      solver.compute(damped);
      bool accepted = false;
      if (solver.info() == Eigen::Success) {
        const Eigen::VectorXd step = solver.solve(-g);
        std::vector<Pose> candidate(n);
        for (std::size_t i = 0; i < n; ++i) {
          candidate[i] = retract(x[i], step.segment<6>(static_cast<Eigen::Index>(6 * i)));
        }
        const double new_cost = problem.evaluate(candidate, nullptr);
        if (std::isfinite(new_cost) && new_cost < cost) {
          const double rel_decrease = (cost - new_cost) / cost;
          x = std::move(candidate);
          cost = new_cost;
          rep.cost_history.push_back(cost);
          lambda = std::max(lambda / settings.lambda_decrease, 1e-12);
          accepted = true;
          if (rel_decrease < settings.relative_tolerance || step.cwiseAbs().maxCoeff() < 1e-12) {
            rep.converged = true;
            done = true;
          }
        }
      }
      if (accepted) break;
      lambda *= settings.lambda_increase;
      if (lambda > 1e12) {
        // No descent left at working precision: the current iterate is a minimum.
        rep.converged = true;
        done = true;
        break;
      }
    }
  }

  rep.final_cost = cost;
  out.global_poses = std::move(x);
  const auto& last = graph.nodes().back();
  out.correction = compose(out.global_poses.back(), inverse(last.local_pose));
  return out;
}

Pose merge_result(PoseGraph& live, const OptimizationResult& result,
                  std::size_t snapshot_node_count) {
  auto& nodes = live.mutable_nodes();
  if (snapshot_node_count > nodes.size() || result.global_poses.size() != snapshot_node_count) {
    throw std::invalid_argument("merge_result: snapshot does not match live graph");
  }
  for (std::size_t i = 0; i < snapshot_node_count; ++i) nodes[i].global_pose = result.global_poses[i];
  for (std::size_t i = snapshot_node_count; i < nodes.size(); ++i) {
    nodes[i].global_pose = compose(result.correction, nodes[i].local_pose);
  }
  return result.correction;
}

// ---------------------------------------------------------------------------
// BackgroundOptimizer

BackgroundOptimizer::BackgroundOptimizer(SolverSettings settings, Mode mode,
                                         int completion_delay_polls)
    : settings_(std::move(settings)), mode_(mode), delay_(std::max(0, completion_delay_polls)) {}

void BackgroundOptimizer::start(PoseGraph snapshot) {
  if (busy_) throw std::logic_error("an optimization is already in flight");
  auto task = [settings = settings_, graph = std::move(snapshot)]() {
    return Outcome{graph.nodes().size(), optimize(graph, settings)};
  };
  if (mode_ == Mode::threaded) {
    future_ = std::async(std::launch::async, std::move(task));
  } else {
    std::promise<Outcome> promise;
    try {
      promise.set_value(task());
    } catch (...) {
      promise.set_exception(std::current_exception());
    }
    future_ = promise.get_future();
  }
  polls_left_ = delay_;
  busy_ = true;
}

std::optional<BackgroundOptimizer::Outcome> BackgroundOptimizer::poll() {
  if (!busy_) return std::nullopt;
  if (mode_ == Mode::deferred) {
    if (polls_left_ > 0) {
      --polls_left_;
      return std::nullopt;
    }
  } else if (future_.wait_for(std::chrono::seconds(0)) != std::future_status::ready) {
    return std::nullopt;
  }
  busy_ = false;
  return future_.get();
}

std::optional<BackgroundOptimizer::Outcome> BackgroundOptimizer::wait() {
  if (!busy_) return std::nullopt;
  busy_ = false;
  return future_.get();
}

// ---------------------------------------------------------------------------
// Text format

std::string to_string(ConstraintKind kind) {
  return kind == ConstraintKind::odometry ? "odometry" : "loop_closure";
}

std::string to_string(GpsWeightingMode mode) {
  switch (mode) {
    case GpsWeightingMode::inverse_diagonal: return "inverse_diagonal";
    case GpsWeightingMode::isotropic_max: return "isotropic_max";
    case GpsWeightingMode::affine: return "affine";
  }
  return "";
}

GpsWeightingMode parse_weighting_mode(std::string_view s) {
  if (s == "inverse_diagonal") return GpsWeightingMode::inverse_diagonal;
  if (s == "isotropic_max") return GpsWeightingMode::isotropic_max;
  if (s == "affine") return GpsWeightingMode::affine;
  throw std::invalid_argument("unknown GPS weighting mode '" + std::string(s) + "'");
}

namespace {

std::string pose_fields(const Pose& p) {
  const auto& q = p.rotation;
  return join_doubles({p.translation.x(), p.translation.y(), p.translation.z(), q.w(), q.x(),
                       q.y(), q.z()},
                      ' ');
}

Pose read_pose(std::istringstream& in) {
  double v[7];
  for (double& d : v) {
    std::string tok;
    if (!(in >> tok)) throw std::invalid_argument("truncated pose record");
    d = parse_double(tok);
  }
  return Pose(Rotation(v[3], v[4], v[5], v[6]), Eigen::Vector3d(v[0], v[1], v[2]));
}

double read_number(std::istringstream& in) {
  std::string tok;
  if (!(in >> tok)) throw std::invalid_argument("truncated graph record");
  return parse_double(tok);
}

}  // namespace

void write_graph_text(std::ostream& os, const PoseGraph& graph) {
  for (const auto& n : graph.nodes()) {
    os << "NODE " << n.id << ' ' << format_double(n.time.seconds) << ' '
       << pose_fields(n.global_pose) << '\n';
  }
  for (const auto& c : graph.relative_constraints()) {
    os << "EDGE_REL " << c.from_id << ' ' << c.to_id << ' ' << pose_fields(c.measured) << ' '
       << format_double(c.translation_weight) << ' ' << format_double(c.rotation_weight) << ' '
       << to_string(c.kind) << '\n';
  }
  for (const auto& c : graph.gps_constraints()) {
    const auto& m = c.measurement;
    os << "EDGE_GPS " << format_double(m.time.seconds) << ' '
       << join_doubles({m.position_enu.x(), m.position_enu.y(), m.position_enu.z(),
                        m.sigma_enu.x(), m.sigma_enu.y(), m.sigma_enu.z()},
                       ' ')
       << '\n';
  }
}

PoseGraph read_graph_text(std::istream& is) {
  PoseGraph graph;
  std::vector<GpsMeasurement> gps;
  std::string line;
  while (std::getline(is, line)) {
    if (trim(line).empty()) continue;
    std::istringstream in(line);
    std::string tag;
    in >> tag;
    if (tag == "NODE") {
      const auto id = static_cast<NodeId>(read_number(in));
      const Timestamp t(read_number(in));
      const Pose p = read_pose(in);
      const NodeId assigned = graph.add_node(t, p, p);
      if (assigned != id && !(graph.nodes().size() == 1)) {
        throw std::invalid_argument("NODE ids must be contiguous");
      }
      if (graph.nodes().size() == 1) graph.mutable_nodes().front().id = id;
    } else if (tag == "EDGE_REL") {
      RelativeConstraint c;
      c.from_id = static_cast<NodeId>(read_number(in));
      c.to_id = static_cast<NodeId>(read_number(in));
      c.measured = read_pose(in);
      c.translation_weight = read_number(in);
      c.rotation_weight = read_number(in);
      std::string kind;
      in >> kind;
      if (kind == "odometry") {
        c.kind = ConstraintKind::odometry;
      } else if (kind == "loop_closure") {
        c.kind = ConstraintKind::loop_closure;
      } else {
        throw std::invalid_argument("unknown constraint kind '" + kind + "'");
      }
      graph.add_relative(c);
    } else if (tag == "EDGE_GPS") {
      GpsMeasurement m;
      m.time = Timestamp(read_number(in));
      for (int i = 0; i < 3; ++i) m.position_enu[i] = read_number(in);
      for (int i = 0; i < 3; ++i) m.sigma_enu[i] = read_number(in);
      gps.push_back(m);
    } else {
      throw std::invalid_argument("unknown graph record '" + tag + "'");
    }
  }
  for (const auto& m : gps) {
    if (auto c = attach_gps(graph, m)) graph.add_gps(*c);
  }
  return graph;
}

}  // namespace skyloop::graph
