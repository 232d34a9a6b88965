#include <gtest/gtest.h>

#include <Eigen/Dense>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "synth.hpp"
#include "urbanpos/error.hpp"
#include "urbanpos/mode_switch.hpp"
#include "urbanpos/positioning.hpp"
#include "urbanpos/ref_station.hpp"

using namespace urbanpos;

namespace {

template <typename F>
ErrorCode code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no Error thrown";
  return ErrorCode::InvalidArgument;
}

const GnssTime kT0{2052, 345600.0};

// Exact ranges from `truth` with per-system clocks.
std::vector<RangeRow> exact_rows(const std::vector<synth::Sat>& sats, const Vec3& truth,
                                 const std::map<Constellation, double>& clocks, double var = 1.0) {
  std::vector<RangeRow> rows;
  for (const auto& s : sats) {
    const Vec3 p = synth::sat_at(truth, s.el, s.az);
    rows.push_back({s.sat, p, (p - truth).norm() + clocks.at(s.sat.system()), var});
  }
  return rows;
}

const std::map<Constellation, double> kClocks{
    {Constellation::Gps, 120.0}, {Constellation::Glonass, 95.0}, {Constellation::BeiDou, 150.0}};
const std::map<Constellation, double> kOneClock{
    {Constellation::Gps, 120.0}, {Constellation::Glonass, 120.0}, {Constellation::BeiDou, 120.0}};

}  // namespace

TEST(Elevation, OverheadAndHorizon) {
  const Vec3 user = synth::site();
  const Mat3 r = enu_rotation(37.5 * kDeg, 127.0 * kDeg);
  const Vec3 east = r.row(0).transpose();
  // Geodetic up, not the geocentric radial direction.
  const Vec3 up = r.row(2).transpose();
  EXPECT_NEAR(elevation_azimuth(user, user + 2.0e7 * up).el, 90.0, 1e-6);
  EXPECT_NEAR(elevation_azimuth(user, user + 2.0e7 * east).el, 0.0, 1e-9);
  EXPECT_NEAR(elevation_azimuth(user, user + 2.0e7 * east).az, 90.0, 1e-9);
}

TEST(Troposphere, ZenithMatchesClosedForm) {
  const double z0 = saastamoinen_zenith(0.0);
  EXPECT_NEAR(z0, oracle::saastamoinen_zenith(0.0, 45.0), 1e-9);
  EXPECT_GT(z0, 2.3);
  EXPECT_LT(z0, 2.4);
  EXPECT_NEAR(saastamoinen_tropo(90.0, 0.0), z0, 1e-12);
  EXPECT_NEAR(saastamoinen_tropo(30.0, 0.0), 2.0 * z0, 1e-9);
  for (double h : {150.0, 1000.0, 3000.0}) {
    EXPECT_NEAR(saastamoinen_zenith(h, 37.5), oracle::saastamoinen_zenith(h, 37.5), 1e-9);
  }
  EXPECT_LT(saastamoinen_zenith(10000.0), z0);
  EXPECT_LT(saastamoinen_zenith(2000.0), saastamoinen_zenith(1000.0));
  EXPECT_DOUBLE_EQ(saastamoinen_zenith(-50.0), z0);
  EXPECT_EQ(code_of([] { saastamoinen_tropo(4.9, 0.0); }), ErrorCode::LowElevation);
  EXPECT_NO_THROW(saastamoinen_tropo(5.0, 0.0));
}

TEST(SigmaModels, DirectEvaluation) {
  EXPECT_NEAR(sigma_models(6.9).sigma_m, 0.15 + 0.43 / std::exp(1.0), 1e-12);
  EXPECT_NEAR(sigma_models(6.9).sigma_m, 0.3082, 1e-4);
  const SigmaModel z = sigma_models(90.0);
  EXPECT_NEAR(z.sigma_m, 0.1500, 1e-4);
  EXPECT_NEAR(z.sigma_n, 0.1300, 1e-4);
  EXPECT_NEAR(z.sigma_dgnss, 0.2373, 1e-4);
  EXPECT_NEAR(sigma_models(1e4).sigma_m, 0.15, 1e-12);
  for (double el = 0.0; el <= 90.0; el += 0.5) {
    const SigmaModel s = sigma_models(el);
    EXPECT_NEAR(s.sigma_m, oracle::rtca_sigma_m(el), 1e-12);
    EXPECT_NEAR(s.sigma_n, oracle::rtca_sigma_n(el), 1e-12);
    EXPECT_NEAR(s.sigma_dgnss, oracle::rtca_sigma_dgnss(el), 1e-12);
  }
}

TEST(GeometryMatrix, Structure) {
  const Vec3 user = synth::site();
  const auto rows = exact_rows(synth::sky8(), user, kClocks);
  const GeometryMatrix s = geometry_matrix(user, rows, ClockLayout::SingleClock);
  EXPECT_EQ(s.n_states(), 4);
  const GeometryMatrix p = geometry_matrix(user, rows, ClockLayout::PerConstellation);
  ASSERT_EQ(p.n_states(), 6);
  EXPECT_EQ(p.clock_systems,
            (std::vector<Constellation>{Constellation::Gps, Constellation::Glonass, Constellation::BeiDou}));
  for (Eigen::Index i = 0; i < p.h.rows(); ++i) {
    EXPECT_NEAR(p.h.row(i).head<3>().norm(), 1.0, 1e-12);
    int minus = 0;
    for (Eigen::Index j = 3; j < p.h.cols(); ++j) {
      EXPECT_TRUE(p.h(i, j) == 0.0 || p.h(i, j) == -1.0);
      minus += p.h(i, j) == -1.0;
    }
    EXPECT_EQ(minus, 1);
  }
}

TEST(WlsSolve, FourSatellitesExact) {
  const Vec3 user = synth::site();
  auto sky = synth::sky8();
  sky.resize(4);
  const auto rows = exact_rows(sky, user, kOneClock);
  const PositionSolution s = wls_solve(rows, ClockLayout::SingleClock, user + Vec3(300, -200, 100));
  EXPECT_LT((s.pos - user).norm(), 1e-6);
  EXPECT_NEAR(s.clock(0), 120.0, 1e-6);
  EXPECT_EQ(s.dof, 0);
}

TEST(WlsSolve, RandomGeometriesExact) {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> el(10.0, 85.0), az(0.0, 360.0);
  const Vec3 user = synth::site();
  for (int trial = 0; trial < 50; ++trial) {
    auto sky = synth::sky8();
    for (auto& s : sky) {
      s.el = el(rng);
      s.az = az(rng);
    }
    const auto rows = exact_rows(sky, user, kClocks);
    try {
      const PositionSolution s = wls_solve(rows, ClockLayout::PerConstellation, user + Vec3(50, 50, 50));
      EXPECT_LT((s.pos - user).norm(), 1e-6);
      EXPECT_NEAR(s.clock_of(Constellation::BeiDou), 150.0, 1e-6);
      EXPECT_NEAR(s.clock_of(Constellation::Glonass), 95.0, 1e-6);
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::SingularGeometry);
    }
  }
}

TEST(WlsSolve, FiveSatellitesThreeSystems) {
  const Vec3 user = synth::site();
  auto sky = synth::sky8();
  // G01 G05 G09 R03 C11: five satellites over three constellations.
  std::vector<synth::Sat> five{sky[0], sky[1], sky[2], sky[4], sky[6]};
  const auto rows = exact_rows(five, user, kOneClock);
  EXPECT_EQ(code_of([&] { wls_solve(rows, ClockLayout::PerConstellation, user); }),
            ErrorCode::Underdetermined);
  const PositionSolution s = wls_solve(rows, ClockLayout::SingleClock, user + Vec3(10, 10, 10));
  EXPECT_LT((s.pos - user).norm(), 1e-6);
  EXPECT_EQ(s.dof, 1);
}

TEST(WlsSolve, SingularAndNonConvergent) {
  const Vec3 user = synth::site();
  std::vector<synth::Sat> same(5, synth::sky8()[0]);
  for (int i = 0; i < 5; ++i) same[i].sat = SatId::gps(i + 1);
  const auto rows = exact_rows(same, user, kOneClock);
  EXPECT_EQ(code_of([&] { wls_solve(rows, ClockLayout::SingleClock, user); }), ErrorCode::SingularGeometry);

  const auto good = exact_rows(synth::sky8(), user, kOneClock);
  PositionConfig cfg;
  cfg.max_iterations = 1;
  EXPECT_EQ(code_of([&] { wls_solve(good, ClockLayout::SingleClock, user + Vec3(5e4, 0, 0), cfg); }),
            ErrorCode::NoConvergence);
}

TEST(WlsSolve, CommonShiftOnlyMovesClock) {
  const Vec3 user = synth::site();
  for (ClockLayout layout : {ClockLayout::SingleClock, ClockLayout::PerConstellation}) {
    auto rows = exact_rows(synth::sky8(), user, kClocks);
    for (std::size_t i = 0; i < rows.size(); ++i) rows[i].range += 0.3 * std::sin(3.0 * i);
    const PositionSolution a = wls_solve(rows, layout, user);
    for (auto& r : rows) r.range += 777.0;
    const PositionSolution b = wls_solve(rows, layout, user);
    EXPECT_LT((a.pos - b.pos).norm(), 1e-7);
    for (Eigen::Index j = 0; j < a.clock.size(); ++j) EXPECT_NEAR(b.clock(j) - a.clock(j), 777.0, 1e-6);
  }
}

TEST(WlsSolve, ResidualCovarianceRank) {
  const Vec3 user = synth::site();
  auto rows = exact_rows(synth::sky8(), user, kClocks);
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i].variance = 0.05 + 0.02 * i;
  const PositionSolution s = wls_solve(rows, ClockLayout::PerConstellation, user);
  EXPECT_LT((s.residual_cov - s.residual_cov.transpose()).norm(), 1e-12);
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(s.residual_cov);
  const double top = eig.eigenvalues().maxCoeff();
  int rank = 0;
  for (Eigen::Index i = 0; i < eig.eigenvalues().size(); ++i) {
    EXPECT_GT(eig.eigenvalues()(i), -1e-10 * top);
    rank += eig.eigenvalues()(i) > 1e-10 * top;
  }
  EXPECT_EQ(rank, 8 - 6);
  EXPECT_EQ(s.dof, 2);
}

TEST(WlsSolve, CovarianceMatchesMonteCarlo) {
  const Vec3 user = synth::site();
  const auto base = exact_rows(synth::sky8(), user, kClocks);
  std::mt19937_64 rng(99);
  std::normal_distribution<double> n01;
  Eigen::Matrix3d emp = Eigen::Matrix3d::Zero();
  Mat3 nominal;
  const int draws = 2000;
  for (int k = 0; k < draws; ++k) {
    auto rows = base;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const double sig = sigma_models(synth::sky8()[i].el).sigma_dgnss;
      rows[i].variance = sig * sig;
      rows[i].range += sig * n01(rng);
    }
    const PositionSolution s = wls_solve(rows, ClockLayout::PerConstellation, user);
    const Vec3 e = s.pos - user;
    emp += e * e.transpose();
    nominal = s.pos_cov();
  }
  emp /= draws;
  EXPECT_NEAR(emp.trace() / nominal.trace(), 1.0, 0.15);
}

namespace {

// Reference-station epoch seeing the same satellites as `rover` from `ref`.
EpochRecord reference_epoch(const EpochRecord& rover, const Vec3& ref, double ref_clock) {
  EpochRecord out;
  out.time = rover.time;
  const double h = ecef_to_geodetic(ref).height;
  for (const SatEntry& e : rover.entries) {
    SatEntry r = e;
    const double el = elevation_azimuth(ref, e.state.pos).el;
    const double tropo = default_tropo_model()(el, h);
    const double iono = 3.0;
    const double geo = (e.state.pos - ref).norm() + ref_clock - e.state.clock_bias + tropo;
    const FrequencyPair f = frequencies(e.sat);
    r.obs.code1 = geo + iono;
    r.obs.code2 = geo + f.gamma * iono;
    out.add(r);
  }
  return out;
}

}  // namespace

class DgnssTest : public ::testing::Test {
 protected:
  Vec3 user = synth::site();
  Vec3 ref = enu_to_ecef(Vec3(250, -400, 5), user);
  std::vector<synth::Sat> sky = synth::sky8();

  EpochRecord rover() {
    for (std::size_t i = 0; i < sky.size(); ++i) sky[i].sat_clock = 10.0 * i;
    for (auto& s : sky) {
      if (s.sat.system() == Constellation::BeiDou) s.system_offset = 29.9792458;
    }
    return synth::epoch(kT0, sky, user, 40.0);
  }
};

TEST_F(DgnssTest, NoiseFreeGivesZeroResiduals) {
  const EpochRecord ep = rover();
  const auto prcs = generate_prc(reference_epoch(ep, ref, -80.0), ref, default_tropo_model());
  ASSERT_EQ(prcs.size(), ep.entries.size());
  const PositionSolution s = dgnss_solve(ep, prcs, user + Vec3(20, 20, 20), default_tropo_model());
  EXPECT_EQ(s.mode, SolutionMode::DgnssOnly);
  EXPECT_EQ(s.layout, ClockLayout::PerConstellation);
  // The rover-to-reference baseline is 470 m, so line-of-sight differences
  // leave centimetre-level tropo mismatches at most.
  EXPECT_LT((s.pos - user).norm(), 0.05);
  EXPECT_LT(s.residuals.cwiseAbs().maxCoeff(), 0.02);
  // P_v = R - H P H^T never exceeds R on the diagonal.
  for (std::size_t i = 0; i < sky.size(); ++i) {
    const double sig = oracle::rtca_sigma_dgnss(elevation_azimuth(s.pos, ep.entries[i].state.pos).el);
    const auto ii = static_cast<Eigen::Index>(i);
    EXPECT_LE(s.residual_cov(ii, ii), sig * sig + 1e-12);
    EXPECT_GT(s.residual_cov(ii, ii), 0.0);
  }
}

TEST_F(DgnssTest, NlosResidualDominatesAndFailsTest) {
  sky[3].multipath = 150.0;
  const EpochRecord ep = rover();
  const auto prcs = generate_prc(reference_epoch(ep, ref, -80.0), ref, default_tropo_model());
  const PositionSolution s = dgnss_solve(ep, prcs, user, default_tropo_model());
  // Normalised residuals single out the biased satellite.
  Eigen::Index worst = 0;
  double best = 0.0;
  for (Eigen::Index i = 0; i < s.residuals.size(); ++i) {
    const double w = std::abs(s.residuals(i)) / std::sqrt(s.residual_cov(i, i));
    if (w > best) {
      best = w;
      worst = i;
    }
  }
  EXPECT_EQ(worst, 3);
  const WsseResult w = wsse(s.residuals, s.residual_cov, 1e-10, s.dof);
  EXPECT_GT(w.wsse, 10.0 * threshold(w.dof, 1e-4));
}

TEST_F(DgnssTest, MissingCorrectionsDropSatellites) {
  const EpochRecord ep = rover();
  auto prcs = generate_prc(reference_epoch(ep, ref, -80.0), ref, default_tropo_model());
  prcs.erase(prcs.begin());
  EXPECT_EQ(dgnss_rows(ep, prcs, user, default_tropo_model()).size(), ep.entries.size() - 1);
  prcs.resize(4);
  EXPECT_EQ(code_of([&] { dgnss_solve(ep, prcs, user, default_tropo_model()); }),
            ErrorCode::InsufficientSatellites);
}

TEST_F(DgnssTest, OpenSkyNoiseWithinThreeSigma) {
  const EpochRecord clean = rover();
  const auto prcs = generate_prc(reference_epoch(clean, ref, -80.0), ref, default_tropo_model());
  std::mt19937_64 rng(4);
  std::normal_distribution<double> n01;
  int inside = 0;
  const int trials = 500;
  for (int k = 0; k < trials; ++k) {
    EpochRecord ep = clean;
    for (auto& e : ep.entries) {
      const double el = elevation_azimuth(user, e.state.pos).el;
      *e.obs.code1 += sigma_models(el).sigma_dgnss * n01(rng);
    }
    const PositionSolution s = dgnss_solve(ep, prcs, user, default_tropo_model());
    const Vec3 e = ecef_to_enu(s.pos, user);
    const Mat3 r = enu_rotation(37.5 * kDeg, 127.0 * kDeg);
    const Mat3 c = r * s.pos_cov() * r.transpose();
    inside += std::hypot(e.x(), e.y()) < 3.0 * std::sqrt(c(0, 0) + c(1, 1));
  }
  EXPECT_GE(inside, trials * 97 / 100);
}

class SmTest : public ::testing::Test {
 protected:
  Vec3 user = synth::site();
  std::vector<synth::Sat> sky = synth::sky8();
  static constexpr double kClock = 55.0;

  TrackSet init(double clock_error = 0.0) {
    TrustedState st;
    st.pos = user;
    st.clock = kClock + clock_error;
    st.cov.topLeftCorner<3, 3>() = Mat3::Identity() * 0.01;
    st.cov(3, 3) = 0.02;
    return reinit_all(synth::epoch(kT0, sky, user, kClock), st, default_tropo_model(), {});
  }
};

TEST_F(SmTest, FreshTracksExact) {
  for (auto& s : sky) {
    if (s.sat.system() == Constellation::BeiDou) s.system_offset = 29.9792458;
    if (s.sat.system() == Constellation::Glonass) s.system_offset = -40.0;
  }
  sky[1].multipath = 150.0;
  sky[6].multipath = 150.0;
  const TrackSet tracks = init();
  const EpochRecord ep = synth::epoch(kT0, sky, user, kClock);
  const PositionSolution s = sm_solve(ep, tracks, user + Vec3(30, 0, 0), default_tropo_model());
  EXPECT_EQ(s.mode, SolutionMode::SM);
  EXPECT_EQ(s.layout, ClockLayout::SingleClock);
  EXPECT_LT((s.pos - user).norm(), 1e-6);
  EXPECT_NEAR(s.clock(0), kClock, 1e-6);
  // Fresh tracks seeded by a 0.1 m fix: SM covariance is fix-grade.
  EXPECT_LT(std::sqrt(s.pos_cov().trace()), 1.0);
}

TEST_F(SmTest, ClockOffsetAtInitOnlyShiftsClock) {
  const TrackSet a = init(0.0), b = init(12.345);
  std::vector<synth::Sat> moved = sky;
  for (auto& s : moved) s.multipath = 0.7;
  const Vec3 user2 = user;
  const EpochRecord ep = synth::epoch(kT0, sky, user2, kClock);
  const PositionSolution sa = sm_solve(ep, a, user, default_tropo_model());
  const PositionSolution sb = sm_solve(ep, b, user, default_tropo_model());
  // ECEF coordinates near 6e6 m: 1e-9 m is a few ulps.
  EXPECT_LT((sa.pos - sb.pos).norm(), 1e-6);
  EXPECT_NEAR(sb.clock(0) - sa.clock(0), 12.345, 1e-6);
}

TEST_F(SmTest, VarianceGrowthAfterSixtySeconds) {
  TrackSet tracks = init();
  const auto rows0 = sm_rows(synth::epoch(kT0, sky, user, kClock), tracks, user, default_tropo_model());
  const PositionSolution s0 = sm_solve(synth::epoch(kT0, sky, user, kClock), tracks, user, default_tropo_model());
  for (int k = 1; k <= 60; ++k) tracks = step_epoch(tracks, synth::epoch(kT0 + k, sky, user, kClock), {}).tracks;
  const EpochRecord ep = synth::epoch(kT0 + 60, sky, user, kClock);
  const auto rows = sm_rows(ep, tracks, user, default_tropo_model());
  ASSERT_EQ(rows.size(), rows0.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    EXPECT_NEAR(rows[i].variance - rows0[i].variance, 60 * 0.03 * 0.03, 1e-9);
    const double sn = oracle::rtca_sigma_n(elevation_azimuth(user, rows[i].sat_pos).el);
    EXPECT_NEAR(rows[i].variance, tracks.at(rows[i].sat).var + sn * sn, 1e-12);
  }
  const PositionSolution s = sm_solve(ep, tracks, user, default_tropo_model());
  EXPECT_GT(s.pos_cov().trace(), s0.pos_cov().trace());
}

TEST_F(SmTest, InsufficientTracks) {
  TrackSet tracks = init();
  int keep = 3;
  for (auto it = tracks.begin(); it != tracks.end();) {
    it = keep-- > 0 ? std::next(it) : tracks.erase(it);
  }
  EXPECT_EQ(code_of([&] { sm_solve(synth::epoch(kT0, sky, user, kClock), tracks, user, default_tropo_model()); }),
            ErrorCode::InsufficientTracks);
  // Slipped tracks do not count.
  TrackSet all = init();
  for (auto& [sat, t] : all) {
    if (sat.system() != Constellation::Gps) t.status = TrackStatus::Slipped;
  }
  all.at(sky[0].sat).status = TrackStatus::Slipped;
  EXPECT_EQ(code_of([&] { sm_solve(synth::epoch(kT0, sky, user, kClock), all, user, default_tropo_model()); }),
            ErrorCode::InsufficientTracks);
}

TEST(CoarsePosition, NearTruth) {
  const Vec3 user = synth::site();
  const EpochRecord ep = synth::epoch(kT0, synth::sky8(), user, 3e4);
  // Inter-system offsets are zero here; tropo is left in, so tens of metres.
  EXPECT_LT((coarse_position(ep) - user).norm(), 100.0);
  EpochRecord few = ep;
  few.entries.resize(3);
  EXPECT_EQ(code_of([&] { coarse_position(few); }), ErrorCode::InsufficientSatellites);
}
