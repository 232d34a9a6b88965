#pragma once

#include "urbanpos/types.hpp"

namespace urbanpos {

namespace wgs84 {
inline constexpr double kA = 6378137.0;
inline constexpr double kF = 1.0 / 298.257223563;
inline constexpr double kB = kA * (1.0 - kF);
inline constexpr double kE2 = kF * (2.0 - kF);
inline constexpr double kEp2 = kE2 / (1.0 - kE2);
inline constexpr double kGM = 3.986004418e14;
}  // namespace wgs84

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kDeg = kPi / 180.0;

struct Geodetic {
  double lat = 0.0;     // rad
  double lon = 0.0;     // rad
  double height = 0.0;  // m above ellipsoid
};

/// Bowring's parametric-latitude iteration, converged to 1e-9 m.
Geodetic ecef_to_geodetic(const Vec3& ecef);
Vec3 geodetic_to_ecef(const Geodetic& g);

/// Rows are the east, north and up unit vectors at (lat, lon).
Mat3 enu_rotation(double lat, double lon);
Vec3 ecef_to_enu(const Vec3& ecef, const Vec3& ref_ecef);
Vec3 enu_to_ecef(const Vec3& enu, const Vec3& ref_ecef);

struct ElevationAzimuth {
  double el = 0.0;  // deg
  double az = 0.0;  // deg, [0, 360), clockwise from north
};

inline constexpr double kUserRadiusMin = 6.3e6;
inline constexpr double kUserRadiusMax = 6.5e6;

/// Throws Error(DegenerateGeometry) when the user is not near the Earth's
/// surface or coincides with the satellite.
ElevationAzimuth elevation_azimuth(const Vec3& user, const Vec3& sat);

/// Unit line-of-sight vector from user to satellite.
inline Vec3 line_of_sight(const Vec3& user, const Vec3& sat) { return (sat - user).normalized(); }

}  // namespace urbanpos
