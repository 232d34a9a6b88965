#include "urbanpos/geodesy.hpp"

#include <algorithm>
#include <cmath>

#include "urbanpos/error.hpp"

namespace urbanpos {

Geodetic ecef_to_geodetic(const Vec3& r) {
  using namespace wgs84;
  const double p = std::hypot(r.x(), r.y());
  const double lon = std::atan2(r.y(), r.x());
  if (p < 1e-9) {
    const double lat = r.z() >= 0 ? kPi / 2 : -kPi / 2;
    return {lat, lon, std::abs(r.z()) - kB};
  }
  double beta = std::atan2(r.z(), (1.0 - kF) * p);
  double lat = 0.0;
  double height = 0.0;
  for (int i = 0; i < 10; ++i) {
    const double sb = std::sin(beta);
    const double cb = std::cos(beta);
    lat = std::atan2(r.z() + kEp2 * kB * sb * sb * sb, p - kE2 * kA * cb * cb * cb);
    const double sl = std::sin(lat);
    const double h_new = p * std::cos(lat) + r.z() * sl - kA * std::sqrt(1.0 - kE2 * sl * sl);
    const double beta_new = std::atan2((1.0 - kF) * sl, std::cos(lat));
    const bool done = i > 0 && std::abs(h_new - height) < 1e-9 &&
                      std::abs(beta_new - beta) * kA < 1e-9;
    height = h_new;
    beta = beta_new;
    if (done) break;
  }
  return {lat, lon, height};
}

Vec3 geodetic_to_ecef(const Geodetic& g) {
  using namespace wgs84;
  const double sl = std::sin(g.lat);
  const double n = kA / std::sqrt(1.0 - kE2 * sl * sl);
  return {(n + g.height) * std::cos(g.lat) * std::cos(g.lon),
          (n + g.height) * std::cos(g.lat) * std::sin(g.lon),
          (n * (1.0 - kE2) + g.height) * sl};
}

Mat3 enu_rotation(double lat, double lon) {
  const double sl = std::sin(lat), cl = std::cos(lat);
  const double so = std::sin(lon), co = std::cos(lon);
  Mat3 r;
  r << -so, co, 0.0,
       -sl * co, -sl * so, cl,
       cl * co, cl * so, sl;
  return r;
}

Vec3 ecef_to_enu(const Vec3& ecef, const Vec3& ref_ecef) {
  const Geodetic g = ecef_to_geodetic(ref_ecef);
  return enu_rotation(g.lat, g.lon) * (ecef - ref_ecef);
}

Vec3 enu_to_ecef(const Vec3& enu, const Vec3& ref_ecef) {
  const Geodetic g = ecef_to_geodetic(ref_ecef);
  return ref_ecef + enu_rotation(g.lat, g.lon).transpose() * enu;
}

ElevationAzimuth elevation_azimuth(const Vec3& user, const Vec3& sat) {
  const double ru = user.norm();
  if (ru < kUserRadiusMin || ru > kUserRadiusMax) {
    throw Error(ErrorCode::DegenerateGeometry, "user position not near the Earth's surface");
  }
  const Vec3 d = sat - user;
  const double range = d.norm();
  if (range < 1.0) {
    throw Error(ErrorCode::DegenerateGeometry, "satellite coincides with user");
  }
  const Geodetic g = ecef_to_geodetic(user);
  const Vec3 enu = enu_rotation(g.lat, g.lon) * d;
  const double el = std::asin(std::clamp(enu.z() / range, -1.0, 1.0)) / kDeg;
  double az = std::atan2(enu.x(), enu.y()) / kDeg;
  if (az < 0.0) az += 360.0;
  if (az >= 360.0) az -= 360.0;
  return {el, az};
}

}  // namespace urbanpos
