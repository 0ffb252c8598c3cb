#pragma once

#include <Eigen/Core>

namespace skyloop::geodesy {

/// WGS84 defining constants.
inline constexpr double kSemiMajorAxis = 6378137.0;
inline constexpr double kFlattening = 1.0 / 298.257223563;

/// Latitude/longitude in degrees, altitude in meters above the ellipsoid.
struct GeoPoint {
  double latitude_deg = 0.0;
  double longitude_deg = 0.0;
  double altitude_m = 0.0;

  void validate() const;
};

Eigen::Vector3d geodetic_to_ecef(const GeoPoint& g);
/// Iterative inverse, converged to well below a millimeter.
GeoPoint ecef_to_geodetic(const Eigen::Vector3d& ecef);

/// East-north-up tangent frame anchored at a geodetic origin.
class EnuFrame {
 public:
  explicit EnuFrame(const GeoPoint& origin);

  const GeoPoint& origin() const { return origin_; }
  const Eigen::Vector3d& origin_ecef() const { return origin_ecef_; }
  /// Rows are the east, north and up unit vectors in ECEF.
  const Eigen::Matrix3d& ecef_to_enu() const { return rotation_; }

  Eigen::Vector3d enu_of(const GeoPoint& g) const;
  GeoPoint geodetic_of(const Eigen::Vector3d& enu) const;

 private:
  GeoPoint origin_;
  Eigen::Vector3d origin_ecef_;
  Eigen::Matrix3d rotation_;
};

}  // namespace skyloop::geodesy
