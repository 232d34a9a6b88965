#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include <Eigen/Dense>

#include "oracles.hpp"
#include "urbanpos/error.hpp"
#include "urbanpos/io/jsonl.hpp"
#include "urbanpos/obs_model.hpp"
#include "urbanpos/positioning.hpp"
#include "urbanpos/scenario.hpp"

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

// Every error source switched off.
ScenarioConfig clean(double duration = 20.0) {
  ScenarioConfig c;
  c.duration = duration;
  c.constellations = default_constellations();
  c.noise.enabled = false;
  c.iono.zenith_m = 0.0;
  c.tropo_scale = 0.0;
  c.rover_clock_m = 0.0;
  c.rover_clock_drift = 0.0;
  return c;
}

std::string serialize(const ScenarioRun& r) {
  std::ostringstream s;
  io::write_epochs(s, r.rover);
  io::write_epochs(s, r.ref);
  io::write_truth(s, r.truth);
  io::write_prc(s, r.prc);
  return s.str();
}

}  // namespace

TEST(Orbits, PeriodicCircularAndAnalyticRate) {
  const Simulator sim(clean());
  const auto shells = default_constellations();
  ASSERT_EQ(shells.size(), 3u);
  for (const auto& shell : shells) {
    const double period = 2.0 * oracle::kPi * std::sqrt(std::pow(shell.radius_m, 3) / 3.986004418e14);
    EXPECT_NEAR(shell.period(), period, 1e-6);
  }
  const auto a = sim.satellites(0.0);
  for (std::size_t i = 0; i < a.size(); ++i) {
    const OrbitShell* shell = nullptr;
    for (const auto& s : shells) {
      if (s.system == a[i].first.system()) shell = &s;
    }
    ASSERT_NE(shell, nullptr);
    const auto b = sim.satellites(shell->period());
    EXPECT_LT((a[i].second.pos - b[i].second.pos).norm(), 1e-6);
    for (double t : {0.0, 1234.5, 40000.0}) {
      const auto s = sim.satellites(t)[i].second;
      EXPECT_NEAR(s.pos.norm(), shell->radius_m, 1e-6);
      EXPECT_NEAR(s.vel.norm(), 2.0 * oracle::kPi * shell->radius_m / shell->period(), 1e-9);
      EXPECT_TRUE(s.plausible());
    }
  }
}

TEST(Render, GenerativeIdentityWithoutErrors) {
  const Simulator sim(clean());
  const RenderedEpoch r = sim.render(3);
  ASSERT_FALSE(r.rover.entries.empty());
  for (const SatEntry& e : r.rover.entries) {
    const FrequencyPair f = frequencies(e.sat);
    const double d = (e.state.pos - r.truth.pos).norm();
    const double expect = d - e.state.clock_bias;
    if (e.sat.system() != Constellation::Gps) continue;  // non-GPS carry the system offset
    EXPECT_NEAR(*e.obs.code1, expect, 1e-6);
    EXPECT_NEAR(*e.obs.code2, expect, 1e-6);
    const double n1 = (*e.obs.phase1 - *e.obs.code1) / f.lambda1;
    const double n2 = (*e.obs.phase2 - *e.obs.code2) / f.lambda2;
    EXPECT_NEAR(n1, std::round(n1), 1e-6);
    EXPECT_NEAR(n2, std::round(n2), 1e-6);
  }
}

TEST(Render, BeiDouOffsetOnRoverCodes) {
  ScenarioConfig c = clean();
  c.inter_system_offsets[Constellation::BeiDou] = {100.0, 0.0};
  c.inter_system_offsets[Constellation::Glonass] = {0.0, 0.0};
  const Simulator sim(c);
  const RenderedEpoch r = sim.render(0);
  int seen = 0;
  for (const SatEntry& e : r.rover.entries) {
    const double pred = (e.state.pos - r.truth.pos).norm() - e.state.clock_bias;
    const double extra = e.sat.system() == Constellation::BeiDou ? 29.9792458 : 0.0;
    EXPECT_NEAR(*e.obs.code1 - pred, extra, 1e-6) << e.sat.str();
    seen += e.sat.system() == Constellation::BeiDou;
  }
  EXPECT_GT(seen, 0);
  EXPECT_NEAR(r.truth.delta_b.at(Constellation::BeiDou), 29.9792458, 1e-9);
  // The reference receiver has no inter-system offset.
  for (const SatEntry& e : r.ref.entries) {
    const double pred = (e.state.pos - sim.ref_position()).norm() + c.ref_clock_m - e.state.clock_bias;
    EXPECT_NEAR(*e.obs.code1, pred, 1e-6);
  }
}

TEST(Render, CmcDifferencesArePureNoise) {
  ScenarioConfig c = preset("open-sky", 9);
  c.duration = 120.0;
  c.trajectory.clear();
  c.iono.drift_m_per_s = 0.01;
  const Simulator sim(c);
  std::vector<double> z;
  RenderedEpoch prev = sim.render(0);
  for (int k = 1; k < sim.epoch_count(); ++k) {
    RenderedEpoch cur = sim.render(k);
    for (const SatEntry& e : cur.rover.entries) {
      const SatEntry* p = prev.rover.find(e.sat);
      if (!p) continue;
      const FrequencyPair f = frequencies(e.sat);
      const double dcmc = cmc(iono_free_code(e.obs, f), iono_free_phase(e.obs, f)) -
                          cmc(iono_free_code(p->obs, f), iono_free_phase(p->obs, f));
      const double dm = cur.truth.find(e.sat)->multipath - prev.truth.find(e.sat)->multipath;
      const double amp = std::sqrt(f.gamma * f.gamma + 1.0) / (f.gamma - 1.0);
      const double el0 = elevation_azimuth(prev.truth.pos, p->state.pos).el;
      const double el1 = elevation_azimuth(cur.truth.pos, e.state.pos).el;
      const double sc0 = rover_code_sigma(el0) * amp, sc1 = rover_code_sigma(el1) * amp;
      const double sp = c.noise.phase_sigma * amp;
      z.push_back((dcmc - dm) / std::sqrt(sc0 * sc0 + sc1 * sc1 + 2.0 * sp * sp));
    }
    prev = std::move(cur);
  }
  ASSERT_GT(z.size(), 1000u);
  // Consecutive differences share one epoch's noise, so thin to every
  // other sample per satellite before the distribution test.
  std::vector<double> thin;
  for (std::size_t i = 0; i < z.size(); i += 2) thin.push_back(z[i]);
  const double d = oracle::ks_statistic(thin, [](double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); });
  EXPECT_GT(oracle::ks_pvalue(d, thin.size()), 0.01);
}

TEST(Render, MaskRespectedAndReferenceClean) {
  ScenarioConfig c = preset("boulevard", 4);
  c.duration = 120.0;
  const Simulator sim(c);
  ScenarioConfig no_mp = c;
  no_mp.multipath_events.clear();
  const Simulator plain(no_mp);
  for (int k = 0; k < sim.epoch_count(); k += 7) {
    const RenderedEpoch r = sim.render(k);
    for (const SatEntry& e : r.rover.entries) {
      const auto ea = elevation_azimuth(r.truth.pos, e.state.pos);
      EXPECT_GE(ea.el, sim.mask_elevation(sim.epoch_offset(k), ea.az) - 1e-9);
      EXPECT_GE(ea.el, c.elevation_cutoff_deg);
    }
    const RenderedEpoch q = plain.render(k);
    ASSERT_EQ(r.ref.entries.size(), q.ref.entries.size());
    for (std::size_t i = 0; i < r.ref.entries.size(); ++i) {
      EXPECT_EQ(r.ref.entries[i].obs, q.ref.entries[i].obs);
    }
  }
}

TEST(Render, MultipathProfiles) {
  ScenarioConfig c = clean(60.0);
  const SatId s = Simulator(c).render(0).rover.entries.front().sat;
  c.multipath_events = {{s, 10.0, 20.0, MultipathProfile::Step, 37.0},
                        {s, 30.0, 40.0, MultipathProfile::Ramp, 150.0},
                        {s, 45.0, 55.0, MultipathProfile::RandomWalk, 20.0}};
  const Simulator sim(c);
  EXPECT_DOUBLE_EQ(sim.multipath(s, 9.9), 0.0);
  EXPECT_DOUBLE_EQ(sim.multipath(s, 15.0), 37.0);
  EXPECT_DOUBLE_EQ(sim.multipath(s, 20.0), 0.0);
  EXPECT_NEAR(sim.multipath(s, 35.0), 75.0, 1e-12);
  EXPECT_DOUBLE_EQ(sim.multipath(s, 44.0), 0.0);
  // Injected code multipath shows up in the code and not in the phase.
  const RenderedEpoch a = sim.render(15), b = Simulator(clean(60.0)).render(15);
  const SatEntry* ea = a.rover.find(s);
  const SatEntry* eb = b.rover.find(s);
  ASSERT_TRUE(ea && eb);
  EXPECT_NEAR(*ea->obs.code1 - *eb->obs.code1, 37.0, 1e-6);
  EXPECT_NEAR(*ea->obs.phase1 - *eb->obs.phase1, 0.0, 1e-6);
  EXPECT_NEAR(a.truth.find(s)->multipath, 37.0, 1e-12);
}

TEST(Render, SlipsRecoverableFromTruth) {
  ScenarioConfig c = clean(30.0);
  const SatId s = Simulator(c).render(0).rover.entries.front().sat;
  const ScenarioRun base = run_scenario(c);
  c.slip_events = {{s, 12.0, 2, -1, false}, {s, 20.0, 0, 0, true}};
  const ScenarioRun r = run_scenario(c);
  const FrequencyPair f = frequencies(s);
  for (std::size_t k = 1; k < r.rover.size(); ++k) {
    const SatTruth* t = r.truth[k].find(s);
    ASSERT_NE(t, nullptr);
    const bool expect_slip = k == 12 || k == 20;
    EXPECT_EQ(t->slip[0] || t->slip[1], expect_slip) << k;
    const double jump1 = (*r.rover[k].find(s)->obs.phase1 - *base.rover[k].find(s)->obs.phase1) / f.lambda1;
    EXPECT_NEAR(jump1, k >= 12 ? 2.0 : 0.0, 1e-6);
    const double jump2 = (*r.rover[k].find(s)->obs.phase2 - *base.rover[k].find(s)->obs.phase2) / f.lambda2;
    EXPECT_NEAR(jump2, k >= 12 ? -1.0 : 0.0, 1e-6);
  }
  EXPECT_TRUE(r.rover[20].find(s)->obs.lock_loss[0]);
}

TEST(RunScenario, CountsAndDeterminism) {
  ScenarioConfig c = preset("open-sky", 11);
  EXPECT_EQ(Simulator([] {
              ScenarioConfig x = preset("open-sky", 1);
              x.duration = 1800.0;
              return x;
            }()).epoch_count(),
            1800);
  c.duration = 10.0;
  c.rate = 2.0;
  const ScenarioRun a = run_scenario(c), b = run_scenario(c);
  EXPECT_EQ(a.rover.size(), 20u);
  EXPECT_EQ(a.ref.size(), 20u);
  EXPECT_EQ(a.truth.size(), 20u);
  EXPECT_EQ(a.prc.size(), 20u);
  EXPECT_EQ(serialize(a), serialize(b));
  c.seed = 12;
  EXPECT_NE(serialize(run_scenario(c)), serialize(a));
  for (std::size_t k = 0; k < a.rover.size(); ++k) {
    EXPECT_EQ(a.rover[k].time, a.truth[k].time);
    EXPECT_NEAR(a.rover[k].time - c.start, 0.5 * k, 1e-9);
  }
}

TEST(RunScenario, TeheranVisibilityWithinBands) {
  const ScenarioRun r = run_scenario(preset("teheran-like", 1));
  EXPECT_EQ(r.rover.size(), 1800u);
  EXPECT_NEAR(r.visibility.mean_gps, 3.74, 0.15 * 3.74);
  EXPECT_NEAR(r.visibility.mean_total, 10.8, 0.15 * 10.8);
  EXPECT_GT(r.visibility.min_total, 0);
  bool has_big = false;
  for (const auto& ev : preset("teheran-like", 1).multipath_events) has_big |= ev.magnitude >= 150.0;
  EXPECT_TRUE(has_big);

  // Inside the east-west canyon the cross-track (north) spread dominates.
  double east = 0.0, north = 0.0;
  for (std::size_t k = 300; k < 1500; k += 10) {
    std::vector<RangeRow> rows;
    for (const auto& e : r.rover[k].entries) rows.push_back({e.sat, e.state.pos, 0.0, 1.0});
    const GeometryMatrix g = geometry_matrix(r.truth[k].pos, rows, ClockLayout::SingleClock);
    const Eigen::MatrixXd q = (g.h.transpose() * g.h).inverse();
    const Geodetic geo = ecef_to_geodetic(r.truth[k].pos);
    const Mat3 rot = enu_rotation(geo.lat, geo.lon);
    const Mat3 qe = rot * q.topLeftCorner<3, 3>() * rot.transpose();
    east += qe(0, 0);
    north += qe(1, 1);
  }
  EXPECT_GT(north, 1.5 * east);
}

TEST(ScenarioConfigJson, RoundTripAndErrors) {
  for (const auto& name : preset_names()) {
    const ScenarioConfig c = preset(name, 5);
    const std::string text = dump_scenario_config(c);
    EXPECT_EQ(dump_scenario_config(parse_scenario_config(text)), text) << name;
  }
  EXPECT_EQ(code_of([] { parse_scenario_config(R"({"durashun": 3})"); }), ErrorCode::ConfigInvalid);
  EXPECT_EQ(code_of([] { parse_scenario_config(R"({"schema": 2})"); }), ErrorCode::ConfigInvalid);
  EXPECT_EQ(code_of([] { parse_scenario_config("{not json"); }), ErrorCode::ConfigInvalid);
  EXPECT_EQ(code_of([] { parse_scenario_config(R"({"duration": -5})"); }), ErrorCode::ConfigInvalid);
  EXPECT_EQ(code_of([] { parse_scenario_config(R"({"multipath_events": [{"sat": "X9"}]})"); }),
            ErrorCode::ConfigInvalid);
  EXPECT_EQ(code_of([] { preset("downtown"); }), ErrorCode::InvalidArgument);
}

TEST(ScenarioConfigJson, MergePatch) {
  const std::string base = dump_scenario_config(preset("open-sky", 1));
  const ScenarioConfig c = parse_scenario_config(merge_patch_json(base, R"({"duration": 10, "seed": 77})"));
  EXPECT_DOUBLE_EQ(c.duration, 10.0);
  EXPECT_EQ(c.seed, 77u);
  EXPECT_EQ(c.constellations.size(), preset("open-sky", 1).constellations.size());
  const ScenarioConfig d = parse_scenario_config(merge_patch_json(base, R"({"trajectory": null})"));
  EXPECT_TRUE(d.trajectory.empty());
}
