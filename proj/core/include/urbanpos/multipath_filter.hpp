#pragma once

// Per-satellite code multipath tracking referenced to GPS time.
//
// Each track is initialised from a trusted receiver state and then follows
// the code multipath by accumulating time differences of the
// ionosphere-free code-minus-carrier. Non-GPS tracks are initialised with
// the GPS receiver clock, so their estimate carries the inter-system time
// offset; applying the estimate therefore aligns every constellation to a
// single receiver clock.

#include <map>
#include <optional>
#include <vector>

#include "urbanpos/error_models.hpp"
#include "urbanpos/types.hpp"

namespace urbanpos {

enum class TrackStatus { Active, DopplerPropagated, Slipped, Stale };
enum class UpdateSource { Carrier, Doppler };

std::string_view to_string(TrackStatus s);

struct FilterConfig {
  double sigma_dcmc_carrier = 0.03;  // m/s, CMC rate noise with carrier
  double sigma_dcmc_doppler = 0.30;  // m/s, inflated for Doppler-extended phase
  double slip_threshold_rate = 0.05; // m/s on |iono_rate_metric|
  double stale_gap = 5.0;            // s
  double elevation_cutoff_deg = kDefaultElevationCutoffDeg;

  /// Throws Error(ConfigInvalid) unless doppler > carrier > 0, etc.
  void validate() const;
  double sigma_dcmc(UpdateSource source) const {
    return source == UpdateSource::Carrier ? sigma_dcmc_carrier : sigma_dcmc_doppler;
  }
};

/// Receiver state trusted enough to initialise tracks: position, GPS-time
/// receiver clock, and their joint covariance (x, y, z, clock).
struct TrustedState {
  Vec3 pos = Vec3::Zero();
  double clock = 0.0;
  Mat4 cov = Mat4::Zero();
};

struct MultipathTrack {
  SatId sat;
  double m_hat = 0.0;          // GPS-time referenced code multipath (m)
  double var = 0.0;            // m^2
  double var_init = 0.0;       // variance at the last initialisation
  double phase_if_last = 0.0;  // last ionosphere-free phase, real or extended (m)
  double cmc_last = 0.0;       // CMC formed with phase_if_last (m)
  bool carrier_anchor = false; // phase_if_last came from a tracked carrier
  std::optional<double> doppler_if_last;
  Observation obs_last;
  GnssTime time_last;
  GnssTime time_init;
  TrackStatus status = TrackStatus::Active;
  // Geometry row (LOS, -1) and trusted covariance at initialisation. Tracks
  // sharing both were seeded by one fix and carry its error in common.
  Eigen::Vector4d init_h = Eigen::Vector4d::Zero();
  Mat4 init_cov = Mat4::Zero();

  bool usable() const {
    return status == TrackStatus::Active || status == TrackStatus::DopplerPropagated;
  }
};

using TrackSet = std::map<SatId, MultipathTrack>;

/// Initial multipath from a trusted state:
///   m_hat = code_if - |sat - pos| - (clock - sat_clock) - tropo.
/// The variance is the trusted covariance projected on the (LOS, -1) row
/// plus the ionosphere-free code noise at the satellite's elevation.
/// Throws MissingDualFrequency / NoTrustedPosition.
MultipathTrack init_track(const SatEntry& entry, const std::optional<TrustedState>& trusted,
                          double tropo, const GnssTime& time);

/// Adds the CMC variation and grows the variance by (sigma_dcmc * dt)^2.
/// Throws SlippedTrack, StaleTrack (dt beyond stale_gap) or InvalidArgument.
MultipathTrack update_track(const MultipathTrack& track, double cmc_now, double cmc_prev,
                            double dt, UpdateSource source, const FilterConfig& cfg);

/// Cycle slip between two epochs: the ionospheric-rate metric exceeds the
/// threshold, lock was lost on either band, or data is missing.
bool detect_slip(const Observation& prev, const Observation& now, double dt,
                 const FrequencyPair& freq, const FilterConfig& cfg);

/// code_if - m_hat - tropo + sat_clock: geometric range plus the GPS-time
/// receiver clock, for every constellation. Throws SlippedTrack.
double apply_correction(double code_if, const MultipathTrack& track, double tropo,
                        double sat_clock);

enum class SatFlag {
  Current,         // track already stamped at this epoch
  CarrierUpdated,  // consecutive carrier, no slip
  DopplerUpdated,  // carrier missing, bridged with Doppler
  SlipBridged,     // slip detected, bridged with Doppler
  Slipped,         // excluded until re-initialised
  NeedsInit,       // dual-frequency satellite without a track
  Stale,           // gap beyond stale_gap
  Ineligible,      // no ionosphere-free observables
};

std::string_view to_string(SatFlag f);

/// True for flags whose satellite should be (re)initialised once a
/// position for the epoch is available. Doppler-bridged slips keep their
/// track.
bool wants_reinit(SatFlag f);

struct StepResult {
  TrackSet tracks;
  std::map<SatId, SatFlag> flags;
};

/// Advances every track by one epoch. Satellites are independent; a flag is
/// produced for each satellite present in the epoch.
StepResult step_epoch(const TrackSet& tracks, const EpochRecord& epoch, const FilterConfig& cfg);

/// GPS-time receiver clock at a known position from the GPS ionosphere-free
/// pseudoranges (weighted mean of range residuals), with the joint
/// (position, clock) covariance. nullopt without usable GPS satellites.
std::optional<TrustedState> gpst_clock_fix(const EpochRecord& epoch, const Vec3& pos,
                                           const Mat3& pos_cov, const TropoModel& tropo,
                                           const FilterConfig& cfg);

/// Fresh track set: every dual-frequency satellite above the cutoff is
/// initialised from `trusted`; all previous tracks are dropped.
TrackSet reinit_all(const EpochRecord& epoch, const TrustedState& trusted,
                    const TropoModel& tropo, const FilterConfig& cfg);

/// (Re)initialises only `sats`, leaving other tracks untouched. Returns the
/// satellites actually initialised.
std::vector<SatId> reinit_satellites(TrackSet& tracks, const EpochRecord& epoch,
                                     const TrustedState& trusted,
                                     const std::vector<SatId>& sats, const TropoModel& tropo,
                                     const FilterConfig& cfg);

}  // namespace urbanpos
