#include "urbanpos/ref_station.hpp"

#include <cmath>

#include "urbanpos/geodesy.hpp"

namespace urbanpos {

std::vector<PseudorangeCorrection> generate_prc(const EpochRecord& ref_obs, const Vec3& ref_pos,
                                                const TropoModel& tropo,
                                                const std::string& ref_id,
                                                double elevation_cutoff_deg) {
  const double height = ecef_to_geodetic(ref_pos).height;
  std::vector<PseudorangeCorrection> out;
  for (const SatEntry& e : ref_obs.entries) {
    const auto& code = e.obs.code1;
    if (!code || *code <= kMinPseudorange || *code >= kMaxPseudorange) continue;
    const double el = elevation_azimuth(ref_pos, e.state.pos).el;
    if (el < elevation_cutoff_deg) continue;
    const double predicted =
        (e.state.pos - ref_pos).norm() - e.state.clock_bias + tropo(el, height);
    const double prc = predicted - *code;
    if (!(std::abs(prc) < kMaxPrcMagnitude)) continue;
    out.push_back({e.sat, prc, ref_obs.time, ref_id});
  }
  return out;
}

PrcEpoch generate_prc_epoch(const EpochRecord& ref_obs, const Vec3& ref_pos,
                            const TropoModel& tropo, const std::string& ref_id,
                            double elevation_cutoff_deg) {
  return {ref_obs.time, ref_id,
          generate_prc(ref_obs, ref_pos, tropo, ref_id, elevation_cutoff_deg)};
}

}  // namespace urbanpos
