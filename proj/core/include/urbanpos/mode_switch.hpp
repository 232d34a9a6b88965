#pragma once

// Per-epoch SM/MF decision from the DGNSS residual test, MF fusion, and the
// pipeline state machine.

#include <map>
#include <optional>
#include <vector>

#include "urbanpos/error_models.hpp"
#include "urbanpos/multipath_filter.hpp"
#include "urbanpos/positioning.hpp"
#include "urbanpos/ref_station.hpp"

namespace urbanpos {

enum class PipelineMode { Bootstrap, SM, MF };
enum class Environment { SevereMultipath, MultipathFree };

std::string_view to_string(PipelineMode m);

struct ModeState {
  PipelineMode mode = PipelineMode::Bootstrap;
  std::optional<GnssTime> last_mf_time;
  double alpha = 1e-4;
  int consecutive_outages = 0;
};

struct WsseResult {
  double wsse = 0.0;
  int dof = 0;  // numerical rank of the residual covariance
};

/// v^T pinv(P_v) v with singular values below rel_tol * max dropped. A
/// non-negative max_dof caps the rank at the geometric redundancy, which
/// round-off would otherwise exceed when P_v is numerically zero.
WsseResult wsse(const Eigen::VectorXd& residuals, const Eigen::MatrixXd& residual_cov,
                double rel_tol = 1e-10, int max_dof = -1);

/// Chi-square quantile at 1 - alpha. Throws InvalidDof for dof < 1 and
/// InvalidArgument for alpha outside (0, 1].
double threshold(int dof, double alpha);

/// SevereMultipath iff wsse > t_d.
Environment decide(double wsse, double t_d);

struct FusedPosition {
  Vec3 pos = Vec3::Zero();
  Mat3 cov = Mat3::Zero();
};

/// Information-weighted combination of two position estimates. Throws
/// NonPsdCovariance unless both covariances are positive definite.
FusedPosition fuse(const Vec3& x1, const Mat3& p1, const Vec3& x2, const Mat3& p2);

/// DGNSS and optional SM solutions: the position block is fused, the clocks
/// and residuals are those of the DGNSS solution. Without SM the DGNSS
/// solution is returned unchanged apart from the mode tag.
PositionSolution fuse(const PositionSolution& dgnss, const std::optional<PositionSolution>& sm);

struct KnownStart {
  Vec3 pos = Vec3::Zero();
  Mat3 cov = Mat3::Identity() * 0.01;
};

struct PipelineConfig {
  FilterConfig filter;
  PositionConfig position;
  double alpha = 1e-4;
  std::optional<KnownStart> known_start;
  TropoModel tropo = default_tropo_model();
  bool consistency_check = true;  // DGNSS vs SM position gate before fusion

  void validate() const;
};

struct PipelineState {
  ModeState mode;
  TrackSet tracks;
  std::optional<Vec3> last_pos;
  bool started = false;
};

struct EpochOutput {
  GnssTime time;
  PositionSolution solution;  // mode Outage when nothing was emitted
  PipelineMode mode_before = PipelineMode::Bootstrap;
  PipelineMode mode_after = PipelineMode::Bootstrap;
  bool dgnss_available = false;
  bool dgnss_validated = false;
  std::optional<WsseResult> test;  // DGNSS residual test when evaluated
  std::optional<double> t_d;
  bool sm_available = false;
  std::optional<double> consistency;  // Mahalanobis distance DGNSS vs SM
  std::map<SatId, SatFlag> flags;
  std::vector<SatId> reinitialized;  // by slip/new/stale handling
  bool tracks_reset = false;         // reinit_all after an MF fix or known start
};

/// Runs one epoch through the pipeline. Never throws on data problems;
/// failures show up as an Outage solution.
EpochOutput process_epoch(PipelineState& state, const EpochRecord& epoch,
                          const std::vector<PseudorangeCorrection>& prcs,
                          const PipelineConfig& cfg);

/// PRC epoch stamped at `time`, or nullptr. `prc` must be time-ordered.
const PrcEpoch* find_prc(const std::vector<PrcEpoch>& prc, const GnssTime& time);

/// Fresh state over a whole observation stream; corrections are matched on
/// epoch time.
std::vector<EpochOutput> run_pipeline(const std::vector<EpochRecord>& epochs,
                                      const std::vector<PrcEpoch>& prc,
                                      const PipelineConfig& cfg);

}  // namespace urbanpos
