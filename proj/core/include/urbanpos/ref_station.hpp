#pragma once

#include <string>
#include <vector>

#include "urbanpos/error_models.hpp"
#include "urbanpos/types.hpp"

namespace urbanpos {

inline constexpr double kMaxPrcMagnitude = 1000.0;  // m

/// corrected = measured + prc. Every correction of one station epoch
/// carries the same unestimated reference receiver clock.
struct PseudorangeCorrection {
  SatId sat;
  double prc = 0.0;  // m
  GnssTime time;
  std::string ref_id;
};

struct PrcEpoch {
  GnssTime time;
  std::string ref_id;
  std::vector<PseudorangeCorrection> corrections;
};

/// prc = (|sat - ref| - sat_clock + tropo_ref) - code1. Satellites without
/// band-1 code, below the cutoff, or with |prc| above the sanity bound are
/// skipped.
std::vector<PseudorangeCorrection> generate_prc(
    const EpochRecord& ref_obs, const Vec3& ref_pos, const TropoModel& tropo,
    const std::string& ref_id = "REF0",
    double elevation_cutoff_deg = kDefaultElevationCutoffDeg);

PrcEpoch generate_prc_epoch(const EpochRecord& ref_obs, const Vec3& ref_pos,
                            const TropoModel& tropo, const std::string& ref_id = "REF0",
                            double elevation_cutoff_deg = kDefaultElevationCutoffDeg);

}  // namespace urbanpos
