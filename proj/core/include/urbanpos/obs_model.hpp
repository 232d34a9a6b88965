#pragma once

// Linear measurement combinations. All inputs are in range units (m, m/s).

#include "urbanpos/types.hpp"

namespace urbanpos {

/// First-order dispersive delay cancels: (code1*gamma - code2)/(gamma - 1).
inline double iono_free_code(double code1, double code2, double gamma) {
  return (code1 * gamma - code2) / (gamma - 1.0);
}

/// Same mixing as the code combination; the phase advance (-I, -gamma*I)
/// cancels the same way.
inline double iono_free_phase(double phase1, double phase2, double gamma) {
  return (phase1 * gamma - phase2) / (gamma - 1.0);
}

/// Code-minus-carrier: multipath minus ambiguity plus noise.
inline double cmc(double code_if, double phase_if) { return code_if - phase_if; }

/// Time-differenced geometry-free phase scaled to L1 ionospheric rate (m/s).
/// A nonzero ambiguity change shows up as a wavelength-scale jump.
inline double iono_rate_metric(double dphase1, double dphase2, double gamma, double dt) {
  return ((dphase1 - dphase2) / (gamma - 1.0)) / dt;
}

inline double iono_free_doppler(double dopp1, double dopp2, double gamma) {
  return (dopp1 * gamma - dopp2) / (gamma - 1.0);
}

/// Trapezoidal propagation of the ionosphere-free phase with range-rates.
inline double extend_phase(double phase_if_prev, double dopp_if_now, double dopp_if_prev,
                           double dt) {
  return phase_if_prev + dt * (dopp_if_now + dopp_if_prev) / 2.0;
}

/// Convenience wrappers over an Observation; callers check validity first.
double iono_free_code(const Observation& obs, const FrequencyPair& f);
double iono_free_phase(const Observation& obs, const FrequencyPair& f);
double iono_free_doppler(const Observation& obs, const FrequencyPair& f);

}  // namespace urbanpos
