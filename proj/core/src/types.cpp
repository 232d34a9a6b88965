#include "urbanpos/types.hpp"

#include <algorithm>
#include <charconv>

#include <fmt/format.h>

#include "urbanpos/error.hpp"
#include "urbanpos/obs_model.hpp"

namespace urbanpos {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::InvalidSatId: return "InvalidSatId";
    case ErrorCode::MissingDualFrequency: return "MissingDualFrequency";
    case ErrorCode::NoTrustedPosition: return "NoTrustedPosition";
    case ErrorCode::SlippedTrack: return "SlippedTrack";
    case ErrorCode::StaleTrack: return "StaleTrack";
    case ErrorCode::DegenerateGeometry: return "DegenerateGeometry";
    case ErrorCode::LowElevation: return "LowElevation";
    case ErrorCode::Underdetermined: return "Underdetermined";
    case ErrorCode::SingularGeometry: return "SingularGeometry";
    case ErrorCode::NoConvergence: return "NoConvergence";
    case ErrorCode::InsufficientSatellites: return "InsufficientSatellites";
    case ErrorCode::InsufficientTracks: return "InsufficientTracks";
    case ErrorCode::InvalidDof: return "InvalidDof";
    case ErrorCode::NonPsdCovariance: return "NonPsdCovariance";
    case ErrorCode::MissingObservable: return "MissingObservable";
    case ErrorCode::ConfigInvalid: return "ConfigInvalid";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::HeaderMalformed: return "HeaderMalformed";
    case ErrorCode::UnsupportedVersion: return "UnsupportedVersion";
  }
  return "Unknown";
}

char system_letter(Constellation c) {
  switch (c) {
    case Constellation::Gps: return 'G';
    case Constellation::Glonass: return 'R';
    case Constellation::BeiDou: return 'C';
  }
  return '?';
}

Constellation constellation_from_letter(char letter) {
  switch (letter) {
    case 'G': return Constellation::Gps;
    case 'R': return Constellation::Glonass;
    case 'C': return Constellation::BeiDou;
    default:
      throw Error(ErrorCode::InvalidSatId, fmt::format("unsupported system '{}'", letter));
  }
}

SatId::SatId(Constellation system, int prn, std::optional<int> glonass_channel)
    : system_(system), prn_(prn), channel_(glonass_channel) {
  if (prn <= 0 || prn > 99) {
    throw Error(ErrorCode::InvalidSatId, fmt::format("prn {} out of range", prn));
  }
  if (system == Constellation::Glonass) {
    if (!channel_) {
      throw Error(ErrorCode::InvalidSatId, fmt::format("R{:02d} needs a frequency channel", prn));
    }
    if (*channel_ < -7 || *channel_ > 6) {
      throw Error(ErrorCode::InvalidSatId,
                  fmt::format("R{:02d} channel {} outside -7..+6", prn, *channel_));
    }
  } else if (channel_) {
    throw Error(ErrorCode::InvalidSatId, "frequency channel only valid for GLONASS");
  }
}

SatId SatId::parse(std::string_view text, std::optional<int> glonass_channel) {
  if (text.size() < 2 || text.size() > 3) {
    throw Error(ErrorCode::InvalidSatId, fmt::format("bad satellite id '{}'", text));
  }
  const Constellation sys = constellation_from_letter(text[0]);
  auto digits = text.substr(1);
  while (!digits.empty() && digits.front() == ' ') digits.remove_prefix(1);
  int prn = 0;
  auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), prn);
  if (ec != std::errc{} || ptr != digits.data() + digits.size()) {
    throw Error(ErrorCode::InvalidSatId, fmt::format("bad satellite id '{}'", text));
  }
  return SatId(sys, prn, sys == Constellation::Glonass ? glonass_channel : std::nullopt);
}

std::string SatId::str() const { return fmt::format("{}{:02d}", system_letter(system_), prn_); }

FrequencyPair FrequencyPair::from_hz(double f1, double f2) {
  const double r = f1 / f2;
  return {f1, f2, r * r, kSpeedOfLight / f1, kSpeedOfLight / f2};
}

FrequencyPair frequencies(const SatId& sat) {
  switch (sat.system()) {
    case Constellation::Gps:
      return FrequencyPair::from_hz(1575.42e6, 1227.60e6);
    case Constellation::Glonass: {
      const int k = sat.glonass_channel().value_or(0);
      return FrequencyPair::from_hz(1602.0e6 + k * 0.5625e6, 1246.0e6 + k * 0.4375e6);
    }
    case Constellation::BeiDou:
      return FrequencyPair::from_hz(1561.098e6, 1207.140e6);
  }
  throw Error(ErrorCode::InvalidSatId, "unknown constellation");
}

namespace {
bool in_window(const std::optional<double>& code) {
  return code && *code > kMinPseudorange && *code < kMaxPseudorange;
}
}  // namespace

bool Observation::has_codes() const { return in_window(code1) && in_window(code2); }

bool SatelliteState::plausible() const {
  const double r = pos.norm();
  return r >= 1.8e7 && r <= 4.8e7;
}

const SatEntry* EpochRecord::find(const SatId& sat) const {
  auto it = std::find_if(entries.begin(), entries.end(),
                         [&](const SatEntry& e) { return e.sat == sat; });
  return it == entries.end() ? nullptr : &*it;
}

void EpochRecord::add(SatEntry entry) {
  if (find(entry.sat)) {
    throw Error(ErrorCode::InvalidArgument,
                fmt::format("duplicate satellite {} in epoch", entry.sat.str()));
  }
  entries.push_back(std::move(entry));
}

double iono_free_code(const Observation& obs, const FrequencyPair& f) {
  return iono_free_code(*obs.code1, *obs.code2, f.gamma);
}

double iono_free_phase(const Observation& obs, const FrequencyPair& f) {
  return iono_free_phase(*obs.phase1, *obs.phase2, f.gamma);
}

double iono_free_doppler(const Observation& obs, const FrequencyPair& f) {
  return iono_free_doppler(*obs.doppler1, *obs.doppler2, f.gamma);
}

}  // namespace urbanpos
