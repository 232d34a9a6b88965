#pragma once

// Weighted least-squares position solvers: the generic iterated solver plus
// the DGNSS (per-constellation clocks) and multipath-compensated
// (single GPS-time clock) measurement builders.

#include <Eigen/Core>

#include <vector>

#include "urbanpos/error_models.hpp"
#include "urbanpos/multipath_filter.hpp"
#include "urbanpos/types.hpp"

namespace urbanpos {

struct PseudorangeCorrection;

enum class ClockLayout { SingleClock, PerConstellation };
enum class SolutionMode { DgnssOnly, SM, MF, Outage };

std::string_view to_string(SolutionMode m);

/// One corrected range: geometric range plus the receiver clock of the
/// satellite's clock column, with its noise variance.
struct RangeRow {
  SatId sat;
  Vec3 sat_pos = Vec3::Zero();
  double range = 0.0;     // m
  double variance = 1.0;  // m^2
};

struct PositionConfig {
  double convergence_m = 1e-4;
  int max_iterations = 10;
  double max_condition = 1e12;
  double elevation_cutoff_deg = kDefaultElevationCutoffDeg;

  void validate() const;
};

struct GeometryMatrix {
  Eigen::MatrixXd h;  // rows (LOS, clock columns of 0 / -1)
  ClockLayout layout = ClockLayout::SingleClock;
  std::vector<Constellation> clock_systems;  // column order for PerConstellation

  int n_states() const { return static_cast<int>(h.cols()); }
};

/// Clock columns present in `rows` for a layout (GPS, GLONASS, BeiDou order).
std::vector<Constellation> clock_systems(const std::vector<RangeRow>& rows, ClockLayout layout);

GeometryMatrix geometry_matrix(const Vec3& pos, const std::vector<RangeRow>& rows,
                               ClockLayout layout);

struct PositionSolution {
  Vec3 pos = Vec3::Zero();
  ClockLayout layout = ClockLayout::SingleClock;
  std::vector<Constellation> clock_systems;
  Eigen::VectorXd clock;         // one per clock column (m)
  Eigen::MatrixXd cov;           // (3 + n_clocks) square
  Eigen::VectorXd residuals;     // measured - predicted (m)
  Eigen::MatrixXd residual_cov;  // R - H P H^T
  double wsse = 0.0;
  int dof = 0;                   // n_sats - n_states
  SolutionMode mode = SolutionMode::Outage;
  std::vector<SatId> used_sats;
  int iterations = 0;

  Mat3 pos_cov() const { return cov.topLeftCorner<3, 3>(); }
  /// Clock of a constellation's column; the single clock for SingleClock.
  double clock_of(Constellation c) const;
};

/// Iterated Gauss-Newton from `linearization`. Throws Underdetermined,
/// SingularGeometry or NoConvergence.
PositionSolution wls_solve(const std::vector<RangeRow>& rows, ClockLayout layout,
                           const Vec3& linearization, const PositionConfig& cfg = {});

/// Band-1 ranges corrected by PRC, satellite clock and troposphere. Rows
/// without a correction for the epoch, without band-1 code, or below the
/// cutoff are dropped.
std::vector<RangeRow> dgnss_rows(const EpochRecord& epoch,
                                 const std::vector<PseudorangeCorrection>& prcs,
                                 const Vec3& linearization, const TropoModel& tropo,
                                 const PositionConfig& cfg = {});

/// Throws InsufficientSatellites below 3 + n_constellations rows.
PositionSolution dgnss_solve(const EpochRecord& epoch,
                             const std::vector<PseudorangeCorrection>& prcs,
                             const Vec3& linearization, const TropoModel& tropo,
                             const PositionConfig& cfg = {});

/// Multipath-compensated ionosphere-free ranges from usable tracks stamped
/// at this epoch. Variance = track var + sigma_n(el)^2.
std::vector<RangeRow> sm_rows(const EpochRecord& epoch, const TrackSet& tracks,
                              const Vec3& linearization, const TropoModel& tropo,
                              const PositionConfig& cfg = {});

/// Single-clock WLS over sm_rows. The covariance models the corrected
/// ranges' error as the seeding fix's error (shared by tracks initialised
/// together) plus CMC growth, propagated through the WLS gain.
/// Throws InsufficientTracks below four rows.
PositionSolution sm_solve(const EpochRecord& epoch, const TrackSet& tracks,
                          const Vec3& linearization, const TropoModel& tropo,
                          const PositionConfig& cfg = {});

/// Rough fix from uncorrected ranges starting at the Earth's centre, used
/// only to get a linearization point. Throws InsufficientSatellites.
Vec3 coarse_position(const EpochRecord& epoch, const PositionConfig& cfg = {});

}  // namespace urbanpos
