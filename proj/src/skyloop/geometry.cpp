#include "skyloop/geometry.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "skyloop/text.hpp"

namespace skyloop {

namespace {

Eigen::Quaterniond canonical(Eigen::Quaterniond q) {
  const double n = q.norm();
  if (!(n > 0.0) || !std::isfinite(n)) {
    throw std::invalid_argument("rotation quaternion must be finite and non-zero");
  }
  // Already-unit input is kept bit-for-bit so CSV round trips are exact.
  if (std::abs(n - 1.0) > 4 * std::numeric_limits<double>::epsilon()) q.coeffs() /= n;
  if (q.w() < 0.0) q.coeffs() = -q.coeffs();
  return q;
}

}  // namespace

Rotation::Rotation(double w, double x, double y, double z)
    : q_(canonical(Eigen::Quaterniond(w, x, y, z))) {}

Rotation::Rotation(const Eigen::Quaterniond& q) : q_(canonical(q)) {}

Rotation Rotation::from_axis_angle(const Eigen::Vector3d& axis, double angle_rad) {
  return Rotation(Eigen::Quaterniond(Eigen::AngleAxisd(angle_rad, axis.normalized())));
}

Rotation Rotation::from_yaw(double yaw_rad) {
  return Rotation(std::cos(0.5 * yaw_rad), 0.0, 0.0, std::sin(0.5 * yaw_rad));
}

Rotation Rotation::exp(const Eigen::Vector3d& v) {
  const double theta = v.norm();
  const double half = 0.5 * theta;
  // sin(theta/2)/theta, series below 1e-4 to avoid cancellation
  const double k = theta < 1e-4 ? 0.5 - theta * theta / 48.0 : std::sin(half) / theta;
  return Rotation(std::cos(half), k * v.x(), k * v.y(), k * v.z());
}

Eigen::Vector3d Rotation::log() const {
  const Eigen::Vector3d v = q_.vec();
  const double n = v.norm();
  const double w = q_.w();  // >= 0 by construction
  if (n < 1e-8) {
    // 2 atan(n/w)/n ~ 2/w (1 - n^2 / (3 w^2))
    return (2.0 / w) * (1.0 - n * n / (3.0 * w * w)) * v;
  }
  const double angle = 2.0 * std::atan2(n, w);
  return (angle / n) * v;
}

double Rotation::yaw() const {
  const Eigen::Vector3d fwd = rotate(Eigen::Vector3d::UnitX());
  return std::atan2(fwd.y(), fwd.x());
}

double angular_distance(const Rotation& a, const Rotation& b) {
  return (a.inverse() * b).angle();
}

Rotation slerp(const Rotation& q0, const Rotation& q1, double u) {
  const double dot = q0.quaternion().dot(q1.quaternion());
  if (std::abs(dot) < 1e-6) {
    throw std::domain_error("slerp: endpoints are antipodal (180 degree separation)");
  }
  if (u == 0.0) return q0;
  if (u == 1.0) return q1;
  // q0^-1 q1 is canonicalized to w >= 0, which selects the shorter arc.
  const Rotation delta = q0.inverse() * q1;
  return q0 * Rotation::exp(u * delta.log());
}

Pose compose(const Pose& a, const Pose& b) {
  return Pose(a.rotation * b.rotation, a.rotation.rotate(b.translation) + a.translation);
}

Pose inverse(const Pose& p) {
  const Rotation inv = p.rotation.inverse();
  return Pose(inv, -inv.rotate(p.translation));
}

Pose interpolate_pose(const Pose& p0, const Pose& p1, double u) {
  if (u == 0.0) return p0;
  if (u == 1.0) return p1;
  return Pose(slerp(p0.rotation, p1.rotation, u),
              (1.0 - u) * p0.translation + u * p1.translation);
}

std::string format_pose_row(Timestamp t, const Pose& p) {
  const auto& q = p.rotation;
  return join_doubles({t.seconds, p.translation.x(), p.translation.y(), p.translation.z(),
                       q.w(), q.x(), q.y(), q.z()});
}

StampedPose parse_pose_row(std::string_view row) {
  const auto v = parse_doubles(row);
  if (v.size() != 8) {
    throw std::invalid_argument("pose row must have 8 columns: " + std::string(row));
  }
  return {Timestamp(v[0]), Pose(Rotation(v[4], v[5], v[6], v[7]),
                                Eigen::Vector3d(v[1], v[2], v[3]))};
}

namespace so3 {

Eigen::Matrix3d skew(const Eigen::Vector3d& v) {
  Eigen::Matrix3d m;
  m << 0.0, -v.z(), v.y(),
       v.z(), 0.0, -v.x(),
       -v.y(), v.x(), 0.0;
  return m;
}

Eigen::Matrix3d right_jacobian_inverse(const Eigen::Vector3d& phi) {
  const double theta = phi.norm();
  const Eigen::Matrix3d k = skew(phi);
  double c;
  if (theta < 1e-5) {
    c = 1.0 / 12.0 + theta * theta / 720.0;
  } else {
    c = 1.0 / (theta * theta) - (1.0 + std::cos(theta)) / (2.0 * theta * std::sin(theta));
  }
  return Eigen::Matrix3d::Identity() + 0.5 * k + c * k * k;
}

}  // namespace so3

}  // namespace skyloop
