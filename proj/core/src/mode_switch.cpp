#include "urbanpos/mode_switch.hpp"

#include <Eigen/Dense>

#include <boost/math/distributions/chi_squared.hpp>

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "urbanpos/error.hpp"

namespace urbanpos {

std::string_view to_string(PipelineMode m) {
  switch (m) {
    case PipelineMode::Bootstrap: return "Bootstrap";
    case PipelineMode::SM: return "SM";
    case PipelineMode::MF: return "MF";
  }
  return "?";
}

WsseResult wsse(const Eigen::VectorXd& residuals, const Eigen::MatrixXd& residual_cov,
                double rel_tol, int max_dof) {
  if (residuals.size() != residual_cov.rows() || residual_cov.rows() != residual_cov.cols()) {
    throw Error(ErrorCode::InvalidArgument, "residual and covariance sizes differ");
  }
  WsseResult out;
  if (residuals.size() == 0) return out;
  const Eigen::MatrixXd sym = 0.5 * (residual_cov + residual_cov.transpose());
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sym);
  const double top = eig.eigenvalues().maxCoeff();
  if (!(top > 0.0)) return out;
  const Eigen::VectorXd proj = eig.eigenvectors().transpose() * residuals;
  // Eigenvalues ascend; walk from the largest so a cap keeps the dominant ones.
  for (Eigen::Index i = proj.size() - 1; i >= 0; --i) {
    if (max_dof >= 0 && out.dof >= max_dof) break;
    const double lambda = eig.eigenvalues()(i);
    if (lambda > rel_tol * top) {
      out.wsse += proj(i) * proj(i) / lambda;
      ++out.dof;
    }
  }
  return out;
}

double threshold(int dof, double alpha) {
  if (dof < 1) throw Error(ErrorCode::InvalidDof, fmt::format("dof {}", dof));
  if (!(alpha > 0.0 && alpha <= 1.0)) {
    throw Error(ErrorCode::InvalidArgument, fmt::format("alpha {} outside (0, 1]", alpha));
  }
  const boost::math::chi_squared dist(dof);
  return boost::math::quantile(boost::math::complement(dist, alpha));
}

Environment decide(double wsse_value, double t_d) {
  return wsse_value > t_d ? Environment::SevereMultipath : Environment::MultipathFree;
}

FusedPosition fuse(const Vec3& x1, const Mat3& p1, const Vec3& x2, const Mat3& p2) {
  const Eigen::LLT<Mat3> l1(p1);
  const Eigen::LLT<Mat3> l2(p2);
  if (l1.info() != Eigen::Success || l2.info() != Eigen::Success || !p1.isApprox(p1.transpose()) ||
      !p2.isApprox(p2.transpose())) {
    throw Error(ErrorCode::NonPsdCovariance, "fusion needs positive definite covariances");
  }
  const Mat3 i1 = l1.solve(Mat3::Identity());
  const Mat3 i2 = l2.solve(Mat3::Identity());
  const Mat3 info = i1 + i2;
  FusedPosition out;
  out.cov = info.inverse();
  out.cov = 0.5 * (out.cov + out.cov.transpose()).eval();
  out.pos = out.cov * (i1 * x1 + i2 * x2);
  return out;
}

PositionSolution fuse(const PositionSolution& dgnss, const std::optional<PositionSolution>& sm) {
  PositionSolution out = dgnss;
  out.mode = SolutionMode::MF;
  if (!sm) return out;
  const FusedPosition f = fuse(dgnss.pos, dgnss.pos_cov(), sm->pos, sm->pos_cov());
  out.pos = f.pos;
  // Position-clock correlation is dropped: the fused position no longer
  // belongs to either solution's clock reference.
  out.cov.topRightCorner(3, out.cov.cols() - 3).setZero();
  out.cov.bottomLeftCorner(out.cov.rows() - 3, 3).setZero();
  out.cov.topLeftCorner<3, 3>() = f.cov;
  return out;
}

void PipelineConfig::validate() const {
  filter.validate();
  position.validate();
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw Error(ErrorCode::ConfigInvalid, fmt::format("alpha {} outside (0, 1)", alpha));
  }
  if (known_start && Eigen::LLT<Mat3>(known_start->cov).info() != Eigen::Success) {
    throw Error(ErrorCode::ConfigInvalid, "known_start covariance must be positive definite");
  }
  if (!tropo) throw Error(ErrorCode::ConfigInvalid, "no troposphere model");
}

namespace {

// Trusted state for a full re-initialisation at `pos`: GPS-time clock from
// the GPS ranges, or the SM clock when no GPS satellite is usable.
std::optional<TrustedState> trusted_for_reset(const EpochRecord& epoch, const Vec3& pos,
                                              const Mat3& pos_cov,
                                              const std::optional<PositionSolution>& sm,
                                              const PipelineConfig& cfg) {
  if (auto s = gpst_clock_fix(epoch, pos, pos_cov, cfg.tropo, cfg.filter)) return s;
  if (!sm) return std::nullopt;
  TrustedState s;
  s.pos = pos;
  s.clock = sm->clock(0);
  s.cov.setZero();
  s.cov.topLeftCorner<3, 3>() = pos_cov;
  s.cov(3, 3) = sm->cov(3, 3);
  return s;
}

TrustedState trusted_from_sm(const PositionSolution& sm) {
  TrustedState s;
  s.pos = sm.pos;
  s.clock = sm.clock(0);
  s.cov = sm.cov.topLeftCorner<4, 4>();
  return s;
}

}  // namespace

EpochOutput process_epoch(PipelineState& state, const EpochRecord& epoch,
                          const std::vector<PseudorangeCorrection>& prcs,
                          const PipelineConfig& cfg) {
  EpochOutput out;
  out.time = epoch.time;
  out.mode_before = state.mode.mode;
  state.mode.alpha = cfg.alpha;

  try {
    if (!state.started) {
      state.started = true;
      if (cfg.known_start) {
        state.last_pos = cfg.known_start->pos;
        auto trusted = gpst_clock_fix(epoch, cfg.known_start->pos, cfg.known_start->cov,
                                      cfg.tropo, cfg.filter);
        if (trusted) {
          state.tracks = reinit_all(epoch, *trusted, cfg.tropo, cfg.filter);
          state.mode.mode = PipelineMode::SM;
          out.tracks_reset = true;
        }
      }
    }

    StepResult step = step_epoch(state.tracks, epoch, cfg.filter);
    state.tracks = std::move(step.tracks);
    out.flags = std::move(step.flags);

    std::optional<Vec3> lin = state.last_pos;
    if (!lin) {
      try {
        lin = coarse_position(epoch, cfg.position);
      } catch (const Error&) {
      }
    }

    std::optional<PositionSolution> sm;
    std::optional<PositionSolution> dgnss;
    if (lin) {
      try {
        sm = sm_solve(epoch, state.tracks, *lin, cfg.tropo, cfg.position);
      } catch (const Error&) {
      }
      if (sm) {
        std::vector<SatId> pending;
        for (const auto& [sat, flag] : out.flags) {
          if (wants_reinit(flag)) pending.push_back(sat);
        }
        if (!pending.empty()) {
          out.reinitialized = reinit_satellites(state.tracks, epoch, trusted_from_sm(*sm),
                                                pending, cfg.tropo, cfg.filter);
        }
      }
      if (!prcs.empty()) {
        try {
          dgnss = dgnss_solve(epoch, prcs, *lin, cfg.tropo, cfg.position);
        } catch (const Error&) {
        }
      }
    }
    out.sm_available = sm.has_value();
    out.dgnss_available = dgnss.has_value();

    if (dgnss) {
      const WsseResult w = wsse(dgnss->residuals, dgnss->residual_cov, 1e-10, dgnss->dof);
      dgnss->wsse = w.wsse;
      out.test = w;
      if (w.dof >= 1) {
        out.t_d = threshold(w.dof, cfg.alpha);
        out.dgnss_validated = decide(w.wsse, *out.t_d) == Environment::MultipathFree;
      }
    }

    // A validated DGNSS fix that disagrees with SM beyond chi-square(3) is
    // not fused: at low redundancy the residual test misses range-space biases.
    if (out.dgnss_validated && sm && cfg.consistency_check) {
      const Vec3 d = dgnss->pos - sm->pos;
      const Mat3 s = dgnss->pos_cov() + sm->pos_cov();
      const Eigen::LDLT<Mat3> ldlt(s);
      if (ldlt.info() == Eigen::Success) {
        out.consistency = d.dot(ldlt.solve(d));
        if (*out.consistency > threshold(3, cfg.alpha)) out.dgnss_validated = false;
      }
    }

    if (out.dgnss_validated) {
      PositionSolution mf = fuse(*dgnss, sm);
      if (auto trusted = trusted_for_reset(epoch, mf.pos, mf.pos_cov(), sm, cfg)) {
        state.tracks = reinit_all(epoch, *trusted, cfg.tropo, cfg.filter);
        out.tracks_reset = true;
      }
      state.mode.mode = PipelineMode::MF;
      state.mode.last_mf_time = epoch.time;
      out.solution = std::move(mf);
    } else if (sm && state.mode.mode != PipelineMode::Bootstrap) {
      state.mode.mode = PipelineMode::SM;
      out.solution = std::move(*sm);
    } else {
      out.solution.mode = SolutionMode::Outage;
    }
  } catch (const std::exception&) {
    out.solution = PositionSolution{};
    out.solution.mode = SolutionMode::Outage;
  }

  if (out.solution.mode == SolutionMode::Outage) {
    ++state.mode.consecutive_outages;
  } else {
    state.mode.consecutive_outages = 0;
    state.last_pos = out.solution.pos;
  }
  out.mode_after = state.mode.mode;
  return out;
}

const PrcEpoch* find_prc(const std::vector<PrcEpoch>& prc, const GnssTime& time) {
  auto it = std::lower_bound(prc.begin(), prc.end(), time, [](const PrcEpoch& p, const GnssTime& t) {
    return p.time - t < -1e-6;
  });
  return it != prc.end() && same_epoch(it->time, time) ? &*it : nullptr;
}

std::vector<EpochOutput> run_pipeline(const std::vector<EpochRecord>& epochs,
                                      const std::vector<PrcEpoch>& prc,
                                      const PipelineConfig& cfg) {
  PipelineState state;
  std::vector<EpochOutput> out;
  out.reserve(epochs.size());
  const std::vector<PseudorangeCorrection> none;
  for (const EpochRecord& e : epochs) {
    const PrcEpoch* p = find_prc(prc, e.time);
    out.push_back(process_epoch(state, e, p ? p->corrections : none, cfg));
  }
  return out;
}

}  // namespace urbanpos
