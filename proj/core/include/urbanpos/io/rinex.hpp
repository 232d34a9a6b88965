#pragma once

// RINEX 3 observation ingestion. Only observables are read; satellite
// states are joined afterwards from a JSONL sidecar.

#include <cstddef>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "urbanpos/types.hpp"

namespace urbanpos::io {

struct RinexObsData {
  double version = 0.0;
  std::map<Constellation, std::vector<std::string>> obs_types;
  std::map<int, int> glonass_channels;  // slot -> frequency channel
  std::vector<EpochRecord> epochs;      // satellite states left zero
  std::size_t skipped_event_epochs = 0; // epoch flag != 0
  std::size_t skipped_satellites = 0;   // unsupported system or no usable code
};

/// Supported observation codes per band:
///   G  C1C L1C D1C S1C | C2W/C2P L2W/L2P D2W/D2P
///   R  C1C L1C D1C S1C | C2P/C2C L2P/L2C D2P/D2C
///   C  C2I L2I D2I S2I | C7I L7I D7I
/// Phases become metres (cycles times wavelength) and Dopplers range
/// rates (-D times wavelength). Throws UnsupportedVersion, HeaderMalformed
/// or ParseError, all carrying the line number.
RinexObsData parse_rinex_obs(std::istream& in);

struct JoinStats {
  std::size_t matched = 0;
  std::size_t dropped = 0;  // satellites without a sidecar state
};

/// Copies satellite states from `states` (matched on epoch time and SatId)
/// into `epochs`; unmatched satellites are removed.
std::vector<EpochRecord> join_satellite_states(const std::vector<EpochRecord>& epochs,
                                               const std::vector<EpochRecord>& states,
                                               JoinStats* stats = nullptr);

}  // namespace urbanpos::io
