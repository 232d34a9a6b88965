#include "urbanpos/time.hpp"

#include <cmath>

#include <fmt/format.h>

namespace urbanpos {

namespace {

// Days since 1970-01-01 of a proleptic Gregorian date.
long days_from_civil(long y, unsigned m, unsigned d) {
  y -= m <= 2;
  const long era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<long>(doe) - 719468;
}

constexpr long kGpsEpochDays = 3657;  // 1980-01-06

}  // namespace

GnssTime GnssTime::normalized(int week, double sow) {
  if (sow >= kSecondsPerWeek || sow < 0.0) {
    const double shift = std::floor(sow / kSecondsPerWeek);
    week += static_cast<int>(shift);
    sow -= shift * kSecondsPerWeek;
    if (sow >= kSecondsPerWeek) {  // rounding at the boundary
      sow -= kSecondsPerWeek;
      ++week;
    }
  }
  return {week, sow};
}

GnssTime GnssTime::from_calendar(int year, int month, int day, int hour, int minute,
                                 double second) {
  const long days = days_from_civil(year, static_cast<unsigned>(month),
                                    static_cast<unsigned>(day)) -
                    kGpsEpochDays;
  const long week = days >= 0 ? days / 7 : (days - 6) / 7;
  const long dow = days - week * 7;
  return normalized(static_cast<int>(week),
                    dow * 86400.0 + hour * 3600.0 + minute * 60.0 + second);
}

std::string to_string(const GnssTime& t) { return fmt::format("{}:{:.3f}", t.week, t.sow); }

}  // namespace urbanpos
