#pragma once

#include <compare>
#include <string>
#include <string_view>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace skyloop {

/// Time in seconds since the start of a run. Trajectories keep these strictly increasing.
struct Timestamp {
  double seconds = 0.0;

  constexpr Timestamp() = default;
  constexpr explicit Timestamp(double s) : seconds(s) {}

  friend constexpr auto operator<=>(const Timestamp&, const Timestamp&) = default;
};

inline constexpr double operator-(Timestamp a, Timestamp b) { return a.seconds - b.seconds; }

/// Unit quaternion rotation. Always normalized and canonicalized to w >= 0.
class Rotation {
 public:
  Rotation() : q_(Eigen::Quaterniond::Identity()) {}
  Rotation(double w, double x, double y, double z);
  explicit Rotation(const Eigen::Quaterniond& q);

  static Rotation identity() { return Rotation(); }
  static Rotation from_axis_angle(const Eigen::Vector3d& axis, double angle_rad);
  static Rotation from_yaw(double yaw_rad);
  /// Exponential map of a rotation vector (axis * angle).
  static Rotation exp(const Eigen::Vector3d& rotation_vector);

  /// Rotation vector (axis * angle), angle in [0, pi].
  Eigen::Vector3d log() const;
  double angle() const { return log().norm(); }
  /// Heading about +z, extracted from the rotated x axis.
  double yaw() const;

  Rotation inverse() const { return Rotation(q_.conjugate()); }
  Eigen::Matrix3d matrix() const { return q_.toRotationMatrix(); }
  Eigen::Vector3d rotate(const Eigen::Vector3d& v) const { return q_ * v; }

  double w() const { return q_.w(); }
  double x() const { return q_.x(); }
  double y() const { return q_.y(); }
  double z() const { return q_.z(); }
  const Eigen::Quaterniond& quaternion() const { return q_; }

  friend Rotation operator*(const Rotation& a, const Rotation& b) {
    return Rotation(a.q_ * b.q_);
  }

 private:
  Eigen::Quaterniond q_;
};

/// Angle in radians between two rotations.
double angular_distance(const Rotation& a, const Rotation& b);

/// Spherical linear interpolation along the shorter arc. u = 0 gives q0, u = 1 gives q1.
/// Throws std::domain_error when the two rotations are 180 degrees apart.
Rotation slerp(const Rotation& q0, const Rotation& q1, double u);

/// Rigid transform: rotation followed by translation (meters).
struct Pose {
  Rotation rotation;
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  Pose() = default;
  Pose(const Rotation& r, const Eigen::Vector3d& t) : rotation(r), translation(t) {}

  static Pose identity() { return Pose(); }
  static Pose from_translation(const Eigen::Vector3d& t) { return Pose(Rotation(), t); }

  Eigen::Vector3d transform(const Eigen::Vector3d& p) const {
    return rotation.rotate(p) + translation;
  }
};

/// a * b: applies b, then a.
Pose compose(const Pose& a, const Pose& b);
Pose inverse(const Pose& p);
/// Translation lerped, rotation slerped with the same factor.
Pose interpolate_pose(const Pose& p0, const Pose& p1, double u);

inline Pose operator*(const Pose& a, const Pose& b) { return compose(a, b); }

/// CSV row `t,px,py,pz,qw,qx,qy,qz` in round-trippable precision.
std::string format_pose_row(Timestamp t, const Pose& p);
inline constexpr std::string_view kPoseCsvHeader = "t,px,py,pz,qw,qx,qy,qz";

struct StampedPose {
  Timestamp time;
  Pose pose;
};

/// Parses a pose CSV row. Throws std::invalid_argument on malformed input.
StampedPose parse_pose_row(std::string_view row);

namespace so3 {

Eigen::Matrix3d skew(const Eigen::Vector3d& v);
/// Inverse of the right Jacobian of SO(3): d log(R exp(d)) / d d at d = 0.
Eigen::Matrix3d right_jacobian_inverse(const Eigen::Vector3d& phi);

}  // namespace so3

}  // namespace skyloop
