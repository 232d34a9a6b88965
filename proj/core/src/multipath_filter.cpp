#include "urbanpos/multipath_filter.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "urbanpos/error.hpp"
#include "urbanpos/geodesy.hpp"
#include "urbanpos/obs_model.hpp"

namespace urbanpos {

std::string_view to_string(TrackStatus s) {
  switch (s) {
    case TrackStatus::Active: return "Active";
    case TrackStatus::DopplerPropagated: return "DopplerPropagated";
    case TrackStatus::Slipped: return "Slipped";
    case TrackStatus::Stale: return "Stale";
  }
  return "?";
}

std::string_view to_string(SatFlag f) {
  switch (f) {
    case SatFlag::Current: return "Current";
    case SatFlag::CarrierUpdated: return "CarrierUpdated";
    case SatFlag::DopplerUpdated: return "DopplerUpdated";
    case SatFlag::SlipBridged: return "SlipBridged";
    case SatFlag::Slipped: return "Slipped";
    case SatFlag::NeedsInit: return "NeedsInit";
    case SatFlag::Stale: return "Stale";
    case SatFlag::Ineligible: return "Ineligible";
  }
  return "?";
}

bool wants_reinit(SatFlag f) {
  return f == SatFlag::Slipped || f == SatFlag::NeedsInit || f == SatFlag::Stale;
}

void FilterConfig::validate() const {
  std::vector<std::string> problems;
  if (!(sigma_dcmc_carrier > 0.0)) problems.push_back("sigma_dcmc_carrier must be > 0");
  if (!(sigma_dcmc_doppler > sigma_dcmc_carrier)) {
    problems.push_back("sigma_dcmc_doppler must exceed sigma_dcmc_carrier");
  }
  if (!(slip_threshold_rate > 0.0)) problems.push_back("slip_threshold_rate must be > 0");
  if (!(stale_gap > 0.0)) problems.push_back("stale_gap must be > 0");
  if (!(elevation_cutoff_deg >= 0.0 && elevation_cutoff_deg < 90.0)) {
    problems.push_back("elevation_cutoff_deg must be in [0, 90)");
  }
  if (!problems.empty()) {
    throw Error(ErrorCode::ConfigInvalid, fmt::format("filter: {}", fmt::join(problems, "; ")));
  }
}

MultipathTrack init_track(const SatEntry& entry, const std::optional<TrustedState>& trusted,
                          double tropo, const GnssTime& time) {
  if (!trusted) {
    throw Error(ErrorCode::NoTrustedPosition, entry.sat.str());
  }
  if (!entry.obs.dual_frequency_valid()) {
    throw Error(ErrorCode::MissingDualFrequency, entry.sat.str());
  }
  const FrequencyPair f = frequencies(entry.sat);
  const double code_if = iono_free_code(entry.obs, f);
  const double phase_if = iono_free_phase(entry.obs, f);

  const Vec3 los = line_of_sight(trusted->pos, entry.state.pos);
  const double range = (entry.state.pos - trusted->pos).norm();
  Eigen::Vector4d h;
  h << los, -1.0;
  const double el = std::max(0.0, elevation_azimuth(trusted->pos, entry.state.pos).el);
  const double sigma_code = iono_free_code_sigma(el, f.gamma);

  MultipathTrack t;
  t.sat = entry.sat;
  t.m_hat = code_if - range - (trusted->clock - entry.state.clock_bias) - tropo;
  t.var = h.dot(trusted->cov * h) + sigma_code * sigma_code;
  t.var_init = t.var;
  t.phase_if_last = phase_if;
  t.cmc_last = cmc(code_if, phase_if);
  t.carrier_anchor = true;
  if (entry.obs.has_dopplers()) t.doppler_if_last = iono_free_doppler(entry.obs, f);
  t.obs_last = entry.obs;
  t.time_last = time;
  t.time_init = time;
  t.status = TrackStatus::Active;
  t.init_h = h;
  t.init_cov = trusted->cov;
  return t;
}

MultipathTrack update_track(const MultipathTrack& track, double cmc_now, double cmc_prev,
                            double dt, UpdateSource source, const FilterConfig& cfg) {
  if (track.status == TrackStatus::Slipped) {
    throw Error(ErrorCode::SlippedTrack, track.sat.str());
  }
  if (track.status == TrackStatus::Stale) {
    throw Error(ErrorCode::StaleTrack, track.sat.str());
  }
  if (!(dt > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, fmt::format("non-positive dt {}", dt));
  }
  if (dt > cfg.stale_gap) {
    throw Error(ErrorCode::StaleTrack,
                fmt::format("{} gap {:.3f} s exceeds {:.3f} s", track.sat.str(), dt, cfg.stale_gap));
  }
  MultipathTrack t = track;
  t.m_hat += cmc_now - cmc_prev;
  const double s = cfg.sigma_dcmc(source) * dt;
  t.var += s * s;
  t.status = source == UpdateSource::Doppler ? TrackStatus::DopplerPropagated : TrackStatus::Active;
  t.time_last = track.time_last + dt;
  return t;
}

bool detect_slip(const Observation& prev, const Observation& now, double dt,
                 const FrequencyPair& freq, const FilterConfig& cfg) {
  if (!prev.has_phases() || !now.has_phases() || !(dt > 0.0)) return true;
  if (now.lock_loss[0] || now.lock_loss[1]) return true;
  const double metric =
      iono_rate_metric(*now.phase1 - *prev.phase1, *now.phase2 - *prev.phase2, freq.gamma, dt);
  // Below one second the phase noise no longer averages down with dt, so
  // the threshold is held at a fixed range change.
  const double threshold = cfg.slip_threshold_rate * std::max(1.0, 1.0 / dt);
  return std::abs(metric) > threshold;
}

double apply_correction(double code_if, const MultipathTrack& track, double tropo,
                        double sat_clock) {
  if (!track.usable()) {
    throw Error(ErrorCode::SlippedTrack, track.sat.str());
  }
  return code_if - track.m_hat - tropo + sat_clock;
}

namespace {

// One satellite's step. Mutates `t` and returns the flag.
SatFlag step_track(MultipathTrack& t, const SatEntry& entry, const GnssTime& now,
                   const FilterConfig& cfg) {
  const Observation& obs = entry.obs;
  if (same_epoch(t.time_last, now)) return SatFlag::Current;

  const double dt = now - t.time_last;
  if (t.status == TrackStatus::Stale || dt > cfg.stale_gap) {
    t.status = TrackStatus::Stale;
    return SatFlag::Stale;
  }
  if (t.status == TrackStatus::Slipped || !obs.has_codes()) {
    t.status = TrackStatus::Slipped;
    t.obs_last = obs;
    t.time_last = now;
    return SatFlag::Slipped;
  }

  const FrequencyPair f = frequencies(entry.sat);
  const double code_if = iono_free_code(obs, f);
  const bool carrier_now = obs.has_phases();
  const bool carrier_continuous = carrier_now && t.carrier_anchor;
  const bool slip = carrier_continuous && detect_slip(t.obs_last, obs, dt, f, cfg);
  std::optional<double> dopp_now;
  if (obs.has_dopplers()) dopp_now = iono_free_doppler(obs, f);

  SatFlag flag;
  if (carrier_continuous && !slip) {
    const double phase_if = iono_free_phase(obs, f);
    const double cmc_now = cmc(code_if, phase_if);
    t = update_track(t, cmc_now, t.cmc_last, dt, UpdateSource::Carrier, cfg);
    t.phase_if_last = phase_if;
    t.cmc_last = cmc_now;
    t.carrier_anchor = true;
    flag = SatFlag::CarrierUpdated;
  } else if (dopp_now && t.doppler_if_last) {
    const double phase_ext = extend_phase(t.phase_if_last, *dopp_now, *t.doppler_if_last, dt);
    const double cmc_now = cmc(code_if, phase_ext);
    t = update_track(t, cmc_now, t.cmc_last, dt, UpdateSource::Doppler, cfg);
    if (carrier_now) {
      // Re-anchor on the (possibly new) carrier arc.
      const double phase_if = iono_free_phase(obs, f);
      t.phase_if_last = phase_if;
      t.cmc_last = cmc(code_if, phase_if);
      t.carrier_anchor = true;
    } else {
      t.phase_if_last = phase_ext;
      t.cmc_last = cmc_now;
      t.carrier_anchor = false;
    }
    flag = slip ? SatFlag::SlipBridged : SatFlag::DopplerUpdated;
  } else {
    t.status = TrackStatus::Slipped;
    flag = SatFlag::Slipped;
  }
  t.obs_last = obs;
  t.doppler_if_last = dopp_now;
  t.time_last = now;
  return flag;
}

}  // namespace

StepResult step_epoch(const TrackSet& tracks, const EpochRecord& epoch, const FilterConfig& cfg) {
  StepResult out;
  out.tracks = tracks;
  for (const SatEntry& entry : epoch.entries) {
    auto it = out.tracks.find(entry.sat);
    if (it == out.tracks.end()) {
      out.flags[entry.sat] =
          entry.obs.dual_frequency_valid() ? SatFlag::NeedsInit : SatFlag::Ineligible;
      continue;
    }
    SatFlag flag = step_track(it->second, entry, epoch.time, cfg);
    if (flag == SatFlag::Stale && !entry.obs.dual_frequency_valid()) flag = SatFlag::Ineligible;
    out.flags[entry.sat] = flag;
  }
  // Tracks whose satellite is absent this epoch only age.
  for (auto& [sat, t] : out.tracks) {
    if (!epoch.find(sat) && epoch.time - t.time_last > cfg.stale_gap) {
      t.status = TrackStatus::Stale;
    }
  }
  return out;
}

std::optional<TrustedState> gpst_clock_fix(const EpochRecord& epoch, const Vec3& pos,
                                           const Mat3& pos_cov, const TropoModel& tropo,
                                           const FilterConfig& cfg) {
  const double height = ecef_to_geodetic(pos).height;
  double sum_w = 0.0;
  double sum_wr = 0.0;
  Vec3 sum_wu = Vec3::Zero();
  for (const SatEntry& e : epoch.entries) {
    if (e.sat.system() != Constellation::Gps || !e.obs.has_codes()) continue;
    const double el = elevation_azimuth(pos, e.state.pos).el;
    if (el < cfg.elevation_cutoff_deg) continue;
    const FrequencyPair f = frequencies(e.sat);
    const double sigma = iono_free_code_sigma(el, f.gamma);
    const double w = 1.0 / (sigma * sigma);
    const double r = iono_free_code(e.obs, f) - (e.state.pos - pos).norm() +
                     e.state.clock_bias - tropo(el, height);
    sum_w += w;
    sum_wr += w * r;
    sum_wu += w * line_of_sight(pos, e.state.pos);
  }
  if (sum_w <= 0.0) return std::nullopt;

  // clock_hat - clock = g.(pos_hat - pos) + noise, g the weighted mean LOS.
  const Vec3 g = sum_wu / sum_w;
  TrustedState s;
  s.pos = pos;
  s.clock = sum_wr / sum_w;
  s.cov.setZero();
  s.cov.topLeftCorner<3, 3>() = pos_cov;
  s.cov.topRightCorner<3, 1>() = pos_cov * g;
  s.cov.bottomLeftCorner<1, 3>() = (pos_cov * g).transpose();
  s.cov(3, 3) = g.dot(pos_cov * g) + 1.0 / sum_w;
  return s;
}

namespace {

std::optional<MultipathTrack> try_init(const SatEntry& e, const TrustedState& trusted,
                                       double height, const TropoModel& tropo,
                                       const GnssTime& time, const FilterConfig& cfg) {
  if (!e.obs.dual_frequency_valid()) return std::nullopt;
  const double el = elevation_azimuth(trusted.pos, e.state.pos).el;
  if (el < cfg.elevation_cutoff_deg) return std::nullopt;
  return init_track(e, trusted, tropo(el, height), time);
}

}  // namespace

TrackSet reinit_all(const EpochRecord& epoch, const TrustedState& trusted,
                    const TropoModel& tropo, const FilterConfig& cfg) {
  const double height = ecef_to_geodetic(trusted.pos).height;
  TrackSet out;
  for (const SatEntry& e : epoch.entries) {
    if (auto t = try_init(e, trusted, height, tropo, epoch.time, cfg)) out[e.sat] = *t;
  }
  return out;
}

std::vector<SatId> reinit_satellites(TrackSet& tracks, const EpochRecord& epoch,
                                     const TrustedState& trusted,
                                     const std::vector<SatId>& sats, const TropoModel& tropo,
                                     const FilterConfig& cfg) {
  const double height = ecef_to_geodetic(trusted.pos).height;
  std::vector<SatId> done;
  for (const SatId& sat : sats) {
    const SatEntry* e = epoch.find(sat);
    if (!e) continue;
    if (auto t = try_init(*e, trusted, height, tropo, epoch.time, cfg)) {
      tracks[sat] = *t;
      done.push_back(sat);
    }
  }
  return done;
}

}  // namespace urbanpos
