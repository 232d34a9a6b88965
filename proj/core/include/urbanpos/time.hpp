#pragma once

#include <compare>
#include <string>

namespace urbanpos {

inline constexpr double kSecondsPerWeek = 604800.0;

/// GPS week and seconds-of-week. Always expressed in the GPSTime scale;
/// sow is kept in [0, 604800).
struct GnssTime {
  int week = 0;
  double sow = 0.0;

  static GnssTime normalized(int week, double sow);
  /// Civil date/time interpreted in the GPS time scale (no leap seconds).
  static GnssTime from_calendar(int year, int month, int day, int hour, int minute,
                                double second);

  GnssTime operator+(double seconds) const { return normalized(week, sow + seconds); }

  friend auto operator<=>(const GnssTime&, const GnssTime&) = default;
  friend bool operator==(const GnssTime&, const GnssTime&) = default;
};

/// Signed difference a - b in seconds.
inline double operator-(const GnssTime& a, const GnssTime& b) {
  return (a.week - b.week) * kSecondsPerWeek + (a.sow - b.sow);
}

/// True when two epoch stamps denote the same measurement epoch.
inline bool same_epoch(const GnssTime& a, const GnssTime& b, double tol = 1e-6) {
  const double d = a - b;
  return d < tol && d > -tol;
}

std::string to_string(const GnssTime& t);

}  // namespace urbanpos
