#include "urbanpos/error_models.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "urbanpos/error.hpp"
#include "urbanpos/geodesy.hpp"

namespace urbanpos {

namespace {
constexpr double kSeaLevelPressureHpa = 1013.25;
constexpr double kSeaLevelTempC = 15.0;
constexpr double kRelativeHumidity = 0.5;
}  // namespace

double saastamoinen_zenith(double height_m, double lat_deg) {
  const double h = std::max(height_m, 0.0);
  const double pressure = kSeaLevelPressureHpa * std::pow(1.0 - 2.2557e-5 * h, 5.2568);
  const double temp_k = kSeaLevelTempC - 6.5e-3 * h + 273.16;
  const double e_wv =
      6.108 * kRelativeHumidity * std::exp((17.15 * temp_k - 4684.0) / (temp_k - 38.45));
  const double hydro =
      0.0022768 * pressure / (1.0 - 0.00266 * std::cos(2.0 * lat_deg * kDeg) - 0.00028 * h / 1e3);
  const double wet = 0.002277 * (1255.0 / temp_k + 0.05) * e_wv;
  return hydro + wet;
}

double saastamoinen_tropo(double el_deg, double height_m, double lat_deg) {
  if (el_deg < kDefaultElevationCutoffDeg) {
    throw Error(ErrorCode::LowElevation, fmt::format("elevation {:.3f} deg below 5 deg", el_deg));
  }
  return saastamoinen_zenith(height_m, lat_deg) / std::sin(el_deg * kDeg);
}

SigmaModel sigma_models(double el_deg) {
  SigmaModel s;
  s.sigma_m = 0.15 + 0.43 * std::exp(-el_deg / 6.9);
  s.sigma_n = 0.13 + 0.53 * std::exp(-el_deg / 7.5);
  s.sigma_dgnss = std::sqrt(s.sigma_m * s.sigma_m + 2.0 * s.sigma_n * s.sigma_n);
  return s;
}

double rover_code_sigma(double el_deg) {
  const SigmaModel s = sigma_models(el_deg);
  return std::hypot(s.sigma_m, s.sigma_n);
}

double iono_free_code_sigma(double el_deg, double gamma) {
  return rover_code_sigma(el_deg) * std::sqrt(gamma * gamma + 1.0) / (gamma - 1.0);
}

TropoModel default_tropo_model() {
  return [](double el_deg, double height_m) { return saastamoinen_tropo(el_deg, height_m); };
}

}  // namespace urbanpos
