#pragma once

// Native line-delimited JSON streams: observation epochs, simulator truth
// and pseudorange corrections. One object per line; unknown fields are
// ignored, missing mandatory ones raise ParseError with the line number.

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "urbanpos/ref_station.hpp"
#include "urbanpos/scenario.hpp"
#include "urbanpos/types.hpp"

namespace urbanpos::io {

inline constexpr int kSchemaVersion = 1;

std::string epoch_to_json(const EpochRecord& epoch);
EpochRecord epoch_from_json(std::string_view line, std::size_t line_no = 1);

std::string truth_to_json(const TruthRecord& truth);
TruthRecord truth_from_json(std::string_view line, std::size_t line_no = 1);

std::string prc_to_json(const PrcEpoch& prc);
PrcEpoch prc_from_json(std::string_view line, std::size_t line_no = 1);

/// Blank lines are skipped.
std::vector<EpochRecord> read_epochs(std::istream& in);
std::vector<TruthRecord> read_truth(std::istream& in);
std::vector<PrcEpoch> read_prc(std::istream& in);

void write_epochs(std::ostream& out, const std::vector<EpochRecord>& epochs);
void write_truth(std::ostream& out, const std::vector<TruthRecord>& truth);
void write_prc(std::ostream& out, const std::vector<PrcEpoch>& prc);

}  // namespace urbanpos::io
