#include "skyloop/geodesy.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace skyloop::geodesy {

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;
constexpr double kE2 = kFlattening * (2.0 - kFlattening);

}  // namespace

void GeoPoint::validate() const {
  if (!std::isfinite(latitude_deg) || std::abs(latitude_deg) > 90.0) {
    throw std::invalid_argument("latitude must be within [-90, 90] degrees");
  }
  if (!std::isfinite(longitude_deg) || std::abs(longitude_deg) > 180.0) {
    throw std::invalid_argument("longitude must be within [-180, 180] degrees");
  }
  if (!std::isfinite(altitude_m)) throw std::invalid_argument("altitude must be finite");
}

Eigen::Vector3d geodetic_to_ecef(const GeoPoint& g) {
  g.validate();
  const double lat = g.latitude_deg * kDeg;
  const double lon = g.longitude_deg * kDeg;
  const double sin_lat = std::sin(lat);
  const double cos_lat = std::cos(lat);
  const double n = kSemiMajorAxis / std::sqrt(1.0 - kE2 * sin_lat * sin_lat);
  return {(n + g.altitude_m) * cos_lat * std::cos(lon),
          (n + g.altitude_m) * cos_lat * std::sin(lon),
          (n * (1.0 - kE2) + g.altitude_m) * sin_lat};
}

GeoPoint ecef_to_geodetic(const Eigen::Vector3d& ecef) {
  const double x = ecef.x(), y = ecef.y(), z = ecef.z();
  const double p = std::hypot(x, y);
  const double lon = std::atan2(y, x);
  // Fixed-point iteration on latitude; converges in a handful of steps near the surface.
  double lat = std::atan2(z, p * (1.0 - kE2));
  for (int i = 0; i < 20; ++i) {
    const double s = std::sin(lat);
    const double n = kSemiMajorAxis / std::sqrt(1.0 - kE2 * s * s);
    const double next = std::atan2(z + kE2 * n * s, p);
    const bool done = std::abs(next - lat) < 1e-15;
    lat = next;
    if (done) break;
  }
  const double s = std::sin(lat);
  const double n = kSemiMajorAxis / std::sqrt(1.0 - kE2 * s * s);
  const double h = p * std::cos(lat) + (z + kE2 * n * s) * s - n;
  return {lat / kDeg, lon / kDeg, h};
}

EnuFrame::EnuFrame(const GeoPoint& origin)
    : origin_(origin), origin_ecef_(geodetic_to_ecef(origin)) {
  const double lat = origin.latitude_deg * kDeg;
  const double lon = origin.longitude_deg * kDeg;
  const double sl = std::sin(lat), cl = std::cos(lat);
  const double so = std::sin(lon), co = std::cos(lon);
  rotation_ << -so, co, 0.0,
               -sl * co, -sl * so, cl,
               cl * co, cl * so, sl;
}

Eigen::Vector3d EnuFrame::enu_of(const GeoPoint& g) const {
  return rotation_ * (geodetic_to_ecef(g) - origin_ecef_);
}

GeoPoint EnuFrame::geodetic_of(const Eigen::Vector3d& enu) const {
  return ecef_to_geodetic(origin_ecef_ + rotation_.transpose() * enu);
}

}  // namespace skyloop::geodesy
