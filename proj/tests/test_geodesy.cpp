#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "skyloop/geodesy.hpp"

using namespace skyloop::geodesy;

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

// Meridian radius of curvature M = a(1-e^2) / (1 - e^2 sin^2 lat)^1.5.
double meridian_radius(double lat_rad) {
  const double a = 6378137.0, f = 1.0 / 298.257223563;
  const double e2 = f * (2 - f);
  const double s = std::sin(lat_rad);
  return a * (1 - e2) / std::pow(1 - e2 * s * s, 1.5);
}

}  // namespace

TEST_CASE("geodetic to ecef reference points") {
  const auto eq = geodetic_to_ecef({0, 0, 0});
  CHECK(eq.x() == 6378137.0);
  CHECK(std::abs(eq.y()) < 1e-9);
  CHECK(std::abs(eq.z()) < 1e-9);

  const double b = 6378137.0 * (1 - 1.0 / 298.257223563);
  const auto pole = geodetic_to_ecef({90, 0, 0});
  CHECK(std::abs(pole.x()) < 1e-6);
  CHECK(std::abs(pole.z() - b) < 1e-3);
  CHECK(std::abs(b - 6356752.314245) < 1e-3);

  CHECK(geodetic_to_ecef({0, 0, 100}).x() - eq.x() == 100.0);
  CHECK(geodetic_to_ecef({0, 90, 0}).y() == doctest::Approx(6378137.0));
}

TEST_CASE("ecef round trip") {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> lat(-89.9, 89.9), lon(-180, 180), alt(-100, 5000);
  for (int i = 0; i < 200; ++i) {
    const GeoPoint g{lat(rng), lon(rng), alt(rng)};
    const GeoPoint back = ecef_to_geodetic(geodetic_to_ecef(g));
    CHECK(std::abs(back.latitude_deg - g.latitude_deg) < 1e-9);
    CHECK(std::abs(std::remainder(back.longitude_deg - g.longitude_deg, 360.0)) < 1e-9);
    CHECK(std::abs(back.altitude_m - g.altitude_m) < 1e-6);
  }
}

TEST_CASE("enu frame") {
  const GeoPoint origin{45.0, 16.0, 120.0};
  const EnuFrame f(origin);
  CHECK(f.enu_of(origin).norm() < 1e-9);

  const auto north = f.enu_of({45.0 + 1e-5, 16.0, 120.0});
  const double oracle = meridian_radius(45.0 * kDeg) * 1e-5 * kDeg;
  CHECK(std::abs(north.y() - oracle) < 0.01 * oracle);
  CHECK(north.y() == doctest::Approx(1.11).epsilon(0.01));
  CHECK(std::abs(north.x()) < 1e-6);

  CHECK(std::abs(f.enu_of({45.0, 16.0, 121.0}).z() - 1.0) < 1e-6);
  CHECK(f.enu_of({45.0, 16.0 + 1e-5, 120.0}).x() > 0.0);

  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-500, 500);
  for (int i = 0; i < 50; ++i) {
    const Eigen::Vector3d p(u(rng), u(rng), u(rng) * 0.1);
    CHECK((f.enu_of(f.geodetic_of(p)) - p).norm() < 1e-6);
  }
  const Eigen::Matrix3d r = f.ecef_to_enu();
  CHECK((r * r.transpose() - Eigen::Matrix3d::Identity()).norm() < 1e-12);
}

TEST_CASE("invalid geodetic input") {
  CHECK_THROWS(GeoPoint{91, 0, 0}.validate());
  CHECK_THROWS(GeoPoint{0, 0, NAN}.validate());
  CHECK_NOTHROW(GeoPoint{45, 16, 0}.validate());
}
