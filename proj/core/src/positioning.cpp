#include "urbanpos/positioning.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <map>

#include <fmt/format.h>

#include "urbanpos/error.hpp"
#include "urbanpos/geodesy.hpp"
#include "urbanpos/obs_model.hpp"
#include "urbanpos/ref_station.hpp"

namespace urbanpos {

std::string_view to_string(SolutionMode m) {
  switch (m) {
    case SolutionMode::DgnssOnly: return "DgnssOnly";
    case SolutionMode::SM: return "SM";
    case SolutionMode::MF: return "MF";
    case SolutionMode::Outage: return "Outage";
  }
  return "?";
}

void PositionConfig::validate() const {
  if (!(convergence_m > 0.0) || max_iterations < 1 || !(max_condition > 1.0) ||
      !(elevation_cutoff_deg >= 0.0 && elevation_cutoff_deg < 90.0)) {
    throw Error(ErrorCode::ConfigInvalid, "positioning: invalid solver settings");
  }
}

double PositionSolution::clock_of(Constellation c) const {
  if (layout == ClockLayout::SingleClock) return clock(0);
  for (std::size_t i = 0; i < clock_systems.size(); ++i) {
    if (clock_systems[i] == c) return clock(static_cast<Eigen::Index>(i));
  }
  throw Error(ErrorCode::InvalidArgument,
              fmt::format("no clock state for system {}", system_letter(c)));
}

std::vector<Constellation> clock_systems(const std::vector<RangeRow>& rows, ClockLayout layout) {
  if (layout == ClockLayout::SingleClock) return {Constellation::Gps};
  std::vector<Constellation> out;
  for (Constellation c : kAllConstellations) {
    const bool present = std::any_of(rows.begin(), rows.end(),
                                     [c](const RangeRow& r) { return r.sat.system() == c; });
    if (present) out.push_back(c);
  }
  return out;
}

namespace {

// Rows carry troposphere and elevation evaluated at the linearization
// point; they are rebuilt at the solution while it keeps moving.
constexpr int kRelinearizations = 3;
constexpr double kRelinearizeDistance = 1e-3;  // m

std::vector<int> clock_columns(const std::vector<RangeRow>& rows, ClockLayout layout,
                               const std::vector<Constellation>& systems) {
  std::vector<int> col(rows.size(), 0);
  if (layout == ClockLayout::SingleClock) return col;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto it = std::find(systems.begin(), systems.end(), rows[i].sat.system());
    col[i] = static_cast<int>(it - systems.begin());
  }
  return col;
}

}  // namespace

GeometryMatrix geometry_matrix(const Vec3& pos, const std::vector<RangeRow>& rows,
                               ClockLayout layout) {
  GeometryMatrix g;
  g.layout = layout;
  g.clock_systems = clock_systems(rows, layout);
  const auto cols = clock_columns(rows, layout, g.clock_systems);
  const auto n = static_cast<Eigen::Index>(rows.size());
  g.h = Eigen::MatrixXd::Zero(n, 3 + static_cast<Eigen::Index>(g.clock_systems.size()));
  for (Eigen::Index i = 0; i < n; ++i) {
    g.h.row(i).head<3>() = line_of_sight(pos, rows[i].sat_pos).transpose();
    g.h(i, 3 + cols[i]) = -1.0;
  }
  return g;
}

PositionSolution wls_solve(const std::vector<RangeRow>& rows, ClockLayout layout,
                           const Vec3& linearization, const PositionConfig& cfg) {
  const std::vector<Constellation> systems = clock_systems(rows, layout);
  const auto cols = clock_columns(rows, layout, systems);
  const auto n = static_cast<Eigen::Index>(rows.size());
  const auto n_states = 3 + static_cast<Eigen::Index>(systems.size());
  if (n < n_states) {
    throw Error(ErrorCode::Underdetermined,
                fmt::format("{} measurements for {} states", n, n_states));
  }

  Eigen::VectorXd w(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!(rows[i].variance > 0.0)) {
      throw Error(ErrorCode::InvalidArgument, "measurement variance must be positive");
    }
    w(i) = 1.0 / rows[i].variance;
  }

  Vec3 x = linearization;
  Eigen::VectorXd clk = Eigen::VectorXd::Zero(n_states - 3);
  auto predicted = [&](Eigen::Index i) {
    return (rows[i].sat_pos - x).norm() + clk(cols[i]);
  };

  Eigen::MatrixXd h;
  Eigen::MatrixXd normal;
  bool converged = false;
  int it = 0;
  while (it < cfg.max_iterations) {
    ++it;
    h = geometry_matrix(x, rows, layout).h;
    Eigen::VectorXd z(n);
    for (Eigen::Index i = 0; i < n; ++i) z(i) = predicted(i) - rows[i].range;
    normal = h.transpose() * w.asDiagonal() * h;
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(normal, Eigen::EigenvaluesOnly);
    const double lo = eig.eigenvalues().minCoeff();
    const double hi = eig.eigenvalues().maxCoeff();
    if (!(lo > 0.0) || hi / lo > cfg.max_condition) {
      throw Error(ErrorCode::SingularGeometry, "normal matrix is ill-conditioned");
    }
    const Eigen::VectorXd delta = normal.ldlt().solve(h.transpose() * w.asDiagonal() * z);
    x += delta.head<3>();
    clk += delta.tail(n_states - 3);
    if (delta.head<3>().norm() < cfg.convergence_m) {
      converged = true;
      break;
    }
  }
  if (!converged) {
    throw Error(ErrorCode::NoConvergence,
                fmt::format("no convergence after {} iterations", cfg.max_iterations));
  }

  h = geometry_matrix(x, rows, layout).h;
  normal = h.transpose() * w.asDiagonal() * h;

  PositionSolution s;
  s.pos = x;
  s.layout = layout;
  s.clock_systems = systems;
  s.clock = clk;
  s.cov = normal.ldlt().solve(Eigen::MatrixXd::Identity(n_states, n_states));
  s.cov = 0.5 * (s.cov + s.cov.transpose());
  s.residuals.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) s.residuals(i) = rows[i].range - predicted(i);
  Eigen::MatrixXd r = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) r(i, i) = rows[i].variance;
  s.residual_cov = r - h * s.cov * h.transpose();
  s.residual_cov = 0.5 * (s.residual_cov + s.residual_cov.transpose());
  s.dof = static_cast<int>(n - n_states);
  s.iterations = it;
  s.used_sats.reserve(rows.size());
  for (const auto& row : rows) s.used_sats.push_back(row.sat);
  return s;
}

std::vector<RangeRow> dgnss_rows(const EpochRecord& epoch,
                                 const std::vector<PseudorangeCorrection>& prcs,
                                 const Vec3& linearization, const TropoModel& tropo,
                                 const PositionConfig& cfg) {
  std::map<SatId, double> by_sat;
  for (const auto& p : prcs) {
    if (same_epoch(p.time, epoch.time)) by_sat[p.sat] = p.prc;
  }
  const double height = ecef_to_geodetic(linearization).height;
  std::vector<RangeRow> rows;
  for (const SatEntry& e : epoch.entries) {
    const auto prc = by_sat.find(e.sat);
    if (prc == by_sat.end()) continue;
    const auto& code = e.obs.code1;
    if (!code || *code <= kMinPseudorange || *code >= kMaxPseudorange) continue;
    const double el = elevation_azimuth(linearization, e.state.pos).el;
    if (el < cfg.elevation_cutoff_deg) continue;
    const double sigma = sigma_models(el).sigma_dgnss;
    rows.push_back({e.sat, e.state.pos,
                    *code + prc->second + e.state.clock_bias - tropo(el, height),
                    sigma * sigma});
  }
  return rows;
}

PositionSolution dgnss_solve(const EpochRecord& epoch,
                             const std::vector<PseudorangeCorrection>& prcs,
                             const Vec3& linearization, const TropoModel& tropo,
                             const PositionConfig& cfg) {
  Vec3 lin = linearization;
  PositionSolution s;
  for (int pass = 0; pass < kRelinearizations; ++pass) {
    const auto rows = dgnss_rows(epoch, prcs, lin, tropo, cfg);
    const auto systems = clock_systems(rows, ClockLayout::PerConstellation);
    if (rows.size() < 3 + systems.size() || rows.size() < 4) {
      throw Error(ErrorCode::InsufficientSatellites,
                  fmt::format("{} corrected ranges over {} systems", rows.size(), systems.size()));
    }
    s = wls_solve(rows, ClockLayout::PerConstellation, lin, cfg);
    if ((s.pos - lin).norm() < kRelinearizeDistance) break;
    lin = s.pos;
  }
  s.mode = SolutionMode::DgnssOnly;
  return s;
}

std::vector<RangeRow> sm_rows(const EpochRecord& epoch, const TrackSet& tracks,
                              const Vec3& linearization, const TropoModel& tropo,
                              const PositionConfig& cfg) {
  const double height = ecef_to_geodetic(linearization).height;
  std::vector<RangeRow> rows;
  for (const SatEntry& e : epoch.entries) {
    const auto it = tracks.find(e.sat);
    if (it == tracks.end()) continue;
    const MultipathTrack& t = it->second;
    if (!t.usable() || !same_epoch(t.time_last, epoch.time) || !e.obs.has_codes()) continue;
    const double el = elevation_azimuth(linearization, e.state.pos).el;
    if (el < cfg.elevation_cutoff_deg) continue;
    const double code_if = iono_free_code(e.obs, frequencies(e.sat));
    const double sigma_n = sigma_models(el).sigma_n;
    rows.push_back({e.sat, e.state.pos,
                    apply_correction(code_if, t, tropo(el, height), e.state.clock_bias),
                    t.var + sigma_n * sigma_n});
  }
  return rows;
}

PositionSolution sm_solve(const EpochRecord& epoch, const TrackSet& tracks,
                          const Vec3& linearization, const TropoModel& tropo,
                          const PositionConfig& cfg) {
  Vec3 lin = linearization;
  std::vector<RangeRow> rows;
  PositionSolution s;
  for (int pass = 0; pass < kRelinearizations; ++pass) {
    rows = sm_rows(epoch, tracks, lin, tropo, cfg);
    if (rows.size() < 4) {
      throw Error(ErrorCode::InsufficientTracks, fmt::format("{} usable tracks", rows.size()));
    }
    s = wls_solve(rows, ClockLayout::SingleClock, lin, cfg);
    if ((s.pos - lin).norm() < kRelinearizeDistance) break;
    lin = s.pos;
  }
  s.mode = SolutionMode::SM;

  // Corrected ranges are carrier-propagated: code noise cancels and what is
  // left is the seeding fix's error plus CMC growth. Propagate that through
  // the WLS gain instead of the weights' nominal covariance.
  const auto n = static_cast<Eigen::Index>(rows.size());
  std::vector<const MultipathTrack*> used;
  used.reserve(rows.size());
  for (const RangeRow& r : rows) used.push_back(&tracks.at(r.sat));
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const MultipathTrack& a = *used[i];
    c(i, i) = a.init_h.dot(a.init_cov * a.init_h) + std::max(0.0, a.var - a.var_init);
    for (Eigen::Index j = 0; j < i; ++j) {
      const MultipathTrack& b = *used[j];
      if (same_epoch(a.time_init, b.time_init) && a.init_cov == b.init_cov) {
        c(i, j) = c(j, i) = a.init_h.dot(a.init_cov * b.init_h);
      }
    }
  }
  const GeometryMatrix g = geometry_matrix(s.pos, rows, ClockLayout::SingleClock);
  Eigen::VectorXd w(n);
  for (Eigen::Index i = 0; i < n; ++i) w(i) = 1.0 / rows[i].variance;
  const Eigen::MatrixXd gain = s.cov * g.h.transpose() * w.asDiagonal();
  Eigen::MatrixXd cov = gain * c * gain.transpose();
  s.cov = 0.5 * (cov + cov.transpose());
  return s;
}

Vec3 coarse_position(const EpochRecord& epoch, const PositionConfig& cfg) {
  std::vector<RangeRow> rows;
  for (const SatEntry& e : epoch.entries) {
    double range = 0.0;
    if (e.obs.has_codes()) {
      range = iono_free_code(e.obs, frequencies(e.sat));
    } else if (e.obs.code1 && *e.obs.code1 > kMinPseudorange && *e.obs.code1 < kMaxPseudorange) {
      range = *e.obs.code1;
    } else {
      continue;
    }
    rows.push_back({e.sat, e.state.pos, range + e.state.clock_bias, 1.0});
  }
  if (rows.size() < 4) {
    throw Error(ErrorCode::InsufficientSatellites,
                fmt::format("{} ranges for a coarse fix", rows.size()));
  }
  PositionConfig coarse = cfg;
  coarse.max_iterations = std::max(cfg.max_iterations, 20);
  coarse.convergence_m = std::max(cfg.convergence_m, 1e-2);
  return wls_solve(rows, ClockLayout::SingleClock, Vec3::Zero(), coarse).pos;
}

}  // namespace urbanpos
