#pragma once

#include <functional>

namespace urbanpos {

inline constexpr double kDefaultElevationCutoffDeg = 5.0;

/// Saastamoinen zenith delay (hydrostatic + wet) under a standard
/// atmosphere: 1013.25 hPa, 15 degC, 50 % relative humidity at sea level,
/// lapse-adjusted to `height`. Negative heights are clamped to zero.
double saastamoinen_zenith(double height_m, double lat_deg = 45.0);

/// Zenith delay mapped by 1/sin(el). Throws Error(LowElevation) below 5 deg.
double saastamoinen_tropo(double el_deg, double height_m, double lat_deg = 45.0);

/// Elevation-dependent error sigmas (m) of the normal-conditions models:
/// multipath, receiver noise and the resulting DGNSS range sigma (rover
/// multipath plus rover and reference noise).
struct SigmaModel {
  double sigma_m = 0.0;
  double sigma_n = 0.0;
  double sigma_dgnss = 0.0;
};

SigmaModel sigma_models(double el_deg);

/// One-band rover code error: sqrt(sigma_m^2 + sigma_n^2).
double rover_code_sigma(double el_deg);

/// Rover code error after the ionosphere-free combination, which amplifies
/// band-independent noise by sqrt(gamma^2 + 1)/(gamma - 1).
double iono_free_code_sigma(double el_deg, double gamma);

/// Troposphere model used by the estimators: delay (m) for an elevation
/// (deg) seen from an ellipsoidal height (m).
using TropoModel = std::function<double(double el_deg, double height_m)>;

TropoModel default_tropo_model();

}  // namespace urbanpos
