#pragma once

// Error statistics of a solution series against simulator truth.

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "urbanpos/io/solution_csv.hpp"

namespace urbanpos::io {

struct ErrorStats {
  double rms = 0.0;
  double p95 = 0.0;  // nearest-rank percentile
  double max = 0.0;
  std::size_t count = 0;
};

/// Throws InvalidArgument on an empty series.
ErrorStats error_stats(const std::vector<double>& abs_errors);

struct ModeStats {
  std::size_t epochs = 0;
  std::optional<ErrorStats> horizontal;
  std::optional<ErrorStats> vertical;
};

struct EvaluationReport {
  std::size_t epochs = 0;
  std::size_t solved = 0;
  double availability_pct = 0.0;
  bool has_truth = false;
  std::size_t unmatched = 0;  // rows without a truth epoch
  std::optional<ErrorStats> horizontal;
  std::optional<ErrorStats> vertical;
  std::map<std::string, ModeStats> by_mode;  // keyed by solution tag
};

/// Time-joins rows with truth and recomputes ENU errors at the truth
/// position. Throws InvalidArgument when more than 1% of rows find no truth
/// epoch.
EvaluationReport evaluate(const std::vector<SolutionRow>& rows,
                          const std::vector<TruthRecord>& truth);
/// Availability only.
EvaluationReport evaluate(const std::vector<SolutionRow>& rows);

std::string report_to_json(const EvaluationReport& report);

/// FeatureCollection with the estimated and the true track as LineStrings
/// of [lon, lat, height].
std::string track_geojson(const std::vector<SolutionRow>& rows,
                          const std::vector<TruthRecord>& truth);

}  // namespace urbanpos::io
