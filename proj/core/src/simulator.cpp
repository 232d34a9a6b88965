#include "urbanpos/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "urbanpos/error.hpp"
#include "urbanpos/error_models.hpp"
#include "urbanpos/ref_station.hpp"

namespace urbanpos {

namespace {

constexpr double kGpsL1 = 1575.42e6;
constexpr double kEarthRadius = 6371e3;
constexpr double kRateStep = 0.5;  // s, central-difference half step

std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t hash_key(std::uint64_t seed, std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  std::uint64_t h = mix64(seed + 0x9e3779b97f4a7c15ULL);
  h = mix64(h ^ (a + 0x9e3779b97f4a7c15ULL));
  h = mix64(h ^ (b + 0x632be59bd9b4e019ULL));
  return mix64(h ^ (c + 0x8cb92ba72f3d8dd7ULL));
}

// splitmix64 as a UniformRandomBitGenerator, so one independent stream can
// be opened per (seed, epoch, satellite, observable).
struct SplitMix {
  using result_type = std::uint64_t;
  std::uint64_t state;
  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return ~result_type{0}; }
  result_type operator()() {
    state += 0x9e3779b97f4a7c15ULL;
    return mix64(state);
  }
};

std::uint64_t sat_key(const SatId& sat) {
  return static_cast<std::uint64_t>(sat.system()) * 128 + static_cast<std::uint64_t>(sat.prn());
}

enum Stream : std::uint64_t {
  kCode1 = 0, kCode2, kPhase1, kPhase2, kDopp1, kDopp2,
  kRefOffset = 16,
  kAmbiguity = 64,
  kSatClock = 96,
  kRandomWalk = 128,
  kCarrierMp = 160,
};

double gauss(std::uint64_t seed, std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  SplitMix g{hash_key(seed, a, b, c)};
  std::normal_distribution<double> n(0.0, 1.0);
  return n(g);
}

double uniform(std::uint64_t seed, std::uint64_t a, std::uint64_t b, std::uint64_t c, double lo,
               double hi) {
  SplitMix g{hash_key(seed, a, b, c)};
  std::uniform_real_distribution<double> u(lo, hi);
  return u(g);
}

long long uniform_int(std::uint64_t seed, std::uint64_t a, std::uint64_t b, std::uint64_t c,
                      long long lo, long long hi) {
  SplitMix g{hash_key(seed, a, b, c)};
  std::uniform_int_distribution<long long> u(lo, hi);
  return u(g);
}

int glonass_channel_for(int prn) { return ((prn - 1) % 14) - 7; }

SatId make_sat(Constellation c, int prn) {
  if (c == Constellation::Glonass) return SatId::glonass(prn, glonass_channel_for(prn));
  return {c, prn};
}

// Thin-shell obliquity factor at elevation el.
double obliquity(double el_deg, double shell_height) {
  const double x = kEarthRadius * std::cos(std::max(el_deg, 0.0) * kDeg) /
                   (kEarthRadius + shell_height);
  return 1.0 / std::sqrt(1.0 - x * x);
}

}  // namespace

double OrbitShell::period() const {
  return 2.0 * kPi * std::sqrt(radius_m * radius_m * radius_m / wgs84::kGM);
}

double MaskSegment::min_elevation(double az_deg) const {
  if (az_el.empty()) return 0.0;
  if (az_el.size() == 1) return az_el.front().second;
  double az = std::fmod(az_deg, 360.0);
  if (az < 0.0) az += 360.0;
  // Cyclic interpolation: wrap the first point to +360 and the last to -360.
  const auto& first = az_el.front();
  const auto& last = az_el.back();
  if (az < first.first) {
    const double span = first.first + 360.0 - last.first;
    const double w = (az + 360.0 - last.first) / span;
    return last.second + w * (first.second - last.second);
  }
  if (az >= last.first) {
    const double span = first.first + 360.0 - last.first;
    const double w = (az - last.first) / span;
    return last.second + w * (first.second - last.second);
  }
  const auto hi = std::upper_bound(az_el.begin(), az_el.end(), az,
                                   [](double a, const auto& p) { return a < p.first; });
  const auto lo = hi - 1;
  const double w = (az - lo->first) / (hi->first - lo->first);
  return lo->second + w * (hi->second - lo->second);
}

const SatTruth* TruthRecord::find(const SatId& sat) const {
  for (const auto& s : sats) {
    if (s.sat == sat) return &s;
  }
  return nullptr;
}

Simulator::Simulator(ScenarioConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  n_epochs_ = cfg_.epoch_count();
  origin_ = geodetic_to_ecef(cfg_.origin);
  enu_to_ecef_ = enu_rotation(cfg_.origin.lat, cfg_.origin.lon).transpose();
  ref_pos_ = origin_ + enu_to_ecef_ * cfg_.ref_enu;

  double t = 0.0;
  for (std::size_t i = 0; i < cfg_.trajectory.size(); ++i) {
    leg_start_time_.push_back(t);
    if (i + 1 < cfg_.trajectory.size()) {
      const double len = (cfg_.trajectory[i + 1].enu - cfg_.trajectory[i].enu).norm();
      if (len > 0.0) t += len / cfg_.trajectory[i].speed;
    }
  }

  for (const auto& shell : cfg_.constellations) {
    for (int k = 0; k < shell.count(); ++k) {
      const SatId sat = make_sat(shell.system, shell.first_prn + k);
      const double bias = uniform(cfg_.seed, kSatClock, sat_key(sat), 0, -3e4, 3e4);
      const double drift = uniform(cfg_.seed, kSatClock, sat_key(sat), 1, -0.05, 0.05);
      sat_clock_[sat] = {bias, drift};
      shell_slot_[sat] = {static_cast<std::size_t>(&shell - cfg_.constellations.data()), k};
    }
  }

  for (std::size_t e = 0; e < cfg_.multipath_events.size(); ++e) {
    const auto& ev = cfg_.multipath_events[e];
    std::vector<double> path;
    if (ev.profile == MultipathProfile::RandomWalk) {
      const int steps = std::max(1, static_cast<int>(std::ceil((ev.end - ev.start) * cfg_.rate)));
      const double step_sigma = ev.magnitude / std::sqrt(static_cast<double>(steps));
      path.assign(static_cast<std::size_t>(steps) + 1, 0.0);
      for (int i = 1; i <= steps; ++i) {
        path[static_cast<std::size_t>(i)] =
            path[static_cast<std::size_t>(i) - 1] + step_sigma * gauss(cfg_.seed, kRandomWalk, e, i);
      }
    }
    random_walks_.push_back(std::move(path));
  }
  build_arcs();
}

namespace {

SatelliteState orbit_state(const OrbitShell& shell, int k, double t) {
  const int plane = k / shell.per_plane;
  const int slot = k % shell.per_plane;
  const double n = 2.0 * kPi / shell.period();
  const double raan = (shell.raan_offset_deg + plane * 360.0 / shell.planes) * kDeg;
  const double u0 = (shell.anomaly_offset_deg + slot * 360.0 / shell.per_plane +
                     plane * shell.phasing_deg) * kDeg;
  const double u = u0 + n * t;
  const double inc = shell.inclination_deg * kDeg;
  const double co = std::cos(raan), so = std::sin(raan);
  const double cu = std::cos(u), su = std::sin(u);
  const double ci = std::cos(inc), si = std::sin(inc);
  const double r = shell.radius_m;
  SatelliteState s;
  s.pos = r * Vec3(co * cu - so * su * ci, so * cu + co * su * ci, su * si);
  s.vel = r * n * Vec3(-co * su - so * cu * ci, -so * su + co * cu * ci, cu * si);
  return s;
}

}  // namespace

std::vector<std::pair<SatId, SatelliteState>> Simulator::satellites(double t) const {
  std::vector<std::pair<SatId, SatelliteState>> out;
  for (const auto& shell : cfg_.constellations) {
    for (int k = 0; k < shell.count(); ++k) {
      const SatId sat = make_sat(shell.system, shell.first_prn + k);
      SatelliteState s = orbit_state(shell, k, t);
      const auto& [bias, drift] = sat_clock_.at(sat);
      s.clock_bias = bias + drift * t;
      s.clock_drift = drift;
      out.emplace_back(sat, s);
    }
  }
  return out;
}

Vec3 Simulator::rover_position(double t) const {
  const auto& wp = cfg_.trajectory;
  if (wp.empty()) return origin_;
  Vec3 enu = wp.back().enu;
  for (std::size_t i = 0; i + 1 < wp.size(); ++i) {
    const double len = (wp[i + 1].enu - wp[i].enu).norm();
    const double t_end = leg_start_time_[i + 1];
    if (t < t_end && len > 0.0) {
      const double s = std::max(0.0, t - leg_start_time_[i]) * wp[i].speed;
      enu = wp[i].enu + (wp[i + 1].enu - wp[i].enu) * (s / len);
      break;
    }
  }
  return origin_ + enu_to_ecef_ * enu;
}

Vec3 Simulator::rover_velocity(double t) const {
  const auto& wp = cfg_.trajectory;
  for (std::size_t i = 0; i + 1 < wp.size(); ++i) {
    const double len = (wp[i + 1].enu - wp[i].enu).norm();
    if (t < leg_start_time_[i + 1] && len > 0.0) {
      return enu_to_ecef_ * ((wp[i + 1].enu - wp[i].enu) * (wp[i].speed / len));
    }
  }
  return Vec3::Zero();
}

double Simulator::mask_elevation(double t, double az_deg) const {
  double m = cfg_.elevation_cutoff_deg;
  for (const auto& seg : cfg_.canyon_mask) {
    if (t >= seg.start && t < seg.end) m = std::max(m, seg.min_elevation(az_deg));
  }
  return m;
}

double Simulator::multipath(const SatId& sat, double t) const {
  double m = 0.0;
  for (std::size_t e = 0; e < cfg_.multipath_events.size(); ++e) {
    const auto& ev = cfg_.multipath_events[e];
    if (!(ev.sat == sat) || t < ev.start || t >= ev.end) continue;
    switch (ev.profile) {
      case MultipathProfile::Step:
        m += ev.magnitude;
        break;
      case MultipathProfile::Ramp:
        m += ev.magnitude * (t - ev.start) / (ev.end - ev.start);
        break;
      case MultipathProfile::RandomWalk: {
        const auto& path = random_walks_[e];
        const double x = (t - ev.start) * cfg_.rate;
        const auto i = std::min(static_cast<std::size_t>(x), path.size() - 1);
        const auto j = std::min(i + 1, path.size() - 1);
        m += path[i] + (x - static_cast<double>(i)) * (path[j] - path[i]);
        break;
      }
    }
  }
  return m;
}

namespace {

bool in_outage(const ScenarioConfig& cfg, const SatId& sat, double t, OutageKind kind) {
  for (const auto& o : cfg.outages) {
    if (o.kind == kind && o.sat == sat && t >= o.start && t < o.end) return true;
  }
  return false;
}

}  // namespace

void Simulator::build_arcs() {
  std::map<SatId, bool> rover_prev, ref_prev;
  for (int k = 0; k < n_epochs_; ++k) {
    const double t = epoch_offset(k);
    const Vec3 rover = rover_position(t);
    for (const auto& [sat, st] : satellites(t)) {
      const auto ea = elevation_azimuth(rover, st.pos);
      const bool rover_carrier = ea.el >= mask_elevation(t, ea.az) &&
                                 !in_outage(cfg_, sat, t, OutageKind::Signal) &&
                                 !in_outage(cfg_, sat, t, OutageKind::Carrier);
      const bool ref_carrier =
          elevation_azimuth(ref_pos_, st.pos).el >= cfg_.elevation_cutoff_deg;
      const auto key = sat_key(sat);
      const auto range = static_cast<long long>(cfg_.ambiguity_range);
      if (rover_carrier && !rover_prev[sat]) {
        const auto idx = rover_arcs_[sat].size();
        rover_arcs_[sat].push_back(
            {k, {uniform_int(cfg_.seed, kAmbiguity, key, idx * 4 + 0, -range, range),
                 uniform_int(cfg_.seed, kAmbiguity, key, idx * 4 + 1, -range, range)}});
      }
      if (ref_carrier && !ref_prev[sat]) {
        const auto idx = ref_arcs_[sat].size();
        ref_arcs_[sat].push_back(
            {k, {uniform_int(cfg_.seed, kAmbiguity + 1, key, idx * 4 + 0, -range, range),
                 uniform_int(cfg_.seed, kAmbiguity + 1, key, idx * 4 + 1, -range, range)}});
      }
      rover_prev[sat] = rover_carrier;
      ref_prev[sat] = ref_carrier;
    }
  }
}

EpochRecord Simulator::render_receiver(int k, bool rover, TruthRecord* truth) const {
  const double t = epoch_offset(k);
  const GnssTime time = epoch_time(k);
  auto rx_pos = [&](double tt) { return rover ? rover_position(tt) : ref_pos_; };
  const Vec3 pos = rx_pos(t);
  const Vec3 vel = rover ? rover_velocity(t) : Vec3::Zero();
  const double rx_clock = rover ? cfg_.rover_clock_m + cfg_.rover_clock_drift * t
                                : cfg_.ref_clock_m + cfg_.ref_clock_drift * t;
  const double rx_drift = rover ? cfg_.rover_clock_drift : cfg_.ref_clock_drift;
  const std::uint64_t stream0 = rover ? std::uint64_t{0} : std::uint64_t{kRefOffset};
  const auto& arcs = rover ? rover_arcs_ : ref_arcs_;

  if (truth) {
    truth->time = time;
    truth->pos = pos;
    truth->vel = vel;
    truth->clock = rx_clock;
    for (Constellation c : {Constellation::Glonass, Constellation::BeiDou}) {
      const auto it = cfg_.inter_system_offsets.find(c);
      const SystemOffset off = it == cfg_.inter_system_offsets.end() ? SystemOffset{} : it->second;
      truth->delta_b[c] = kSpeedOfLight * 1e-9 * (off.offset_ns + off.drift_ns_per_s * t);
    }
  }

  auto sat_pos_at = [&](const SatId& sat, double tt) {
    const auto [shell, slot] = shell_slot_.at(sat);
    return orbit_state(cfg_.constellations[shell], slot, tt).pos;
  };
  auto iono_l1 = [&](const SatId& sat, double tt) {
    const double el = elevation_azimuth(origin_, sat_pos_at(sat, tt)).el;
    return (cfg_.iono.zenith_m + cfg_.iono.drift_m_per_s * tt) *
           obliquity(el, cfg_.iono.shell_height_m);
  };
  auto tropo = [&](const SatId& sat, double tt) {
    const Vec3 p = rx_pos(tt);
    const double el = elevation_azimuth(p, sat_pos_at(sat, tt)).el;
    return cfg_.tropo_scale *
           saastamoinen_tropo(std::max(el, kDefaultElevationCutoffDeg), ecef_to_geodetic(p).height);
  };

  EpochRecord rec;
  rec.time = time;
  for (const auto& [sat, st] : satellites(t)) {
    const auto ea = elevation_azimuth(pos, st.pos);
    if (ea.el < cfg_.elevation_cutoff_deg) continue;
    const bool visible = !rover || (ea.el >= mask_elevation(t, ea.az) &&
                                    !in_outage(cfg_, sat, t, OutageKind::Signal));
    const bool carrier = visible && !(rover && in_outage(cfg_, sat, t, OutageKind::Carrier));
    const double mp = rover ? multipath(sat, t) : 0.0;

    // Arc bookkeeping: ambiguity of the arc in force plus slips since.
    const Arc* arc = nullptr;
    if (const auto it = arcs.find(sat); it != arcs.end()) {
      for (const auto& a : it->second) {
        if (a.first <= k) arc = &a;
      }
    }
    std::array<long long, 2> n = arc ? arc->n0 : std::array<long long, 2>{0, 0};
    std::array<bool, 2> lli{arc && arc->first == k, arc && arc->first == k};
    std::array<bool, 2> slip_now{false, false};
    if (rover && arc) {
      for (const auto& ev : cfg_.slip_events) {
        if (!(ev.sat == sat)) continue;
        const int ke = static_cast<int>(std::llround(ev.time * cfg_.rate));
        if (ke <= arc->first || ke > k) continue;
        n[0] += ev.dn1;
        n[1] += ev.dn2;
        if (ke == k) {
          slip_now = {ev.dn1 != 0 || ev.lli, ev.dn2 != 0 || ev.lli};
          if (ev.lli) lli = {true, true};
        }
      }
    }
    if (truth) truth->sats.push_back({sat, mp, visible, carrier ? slip_now : std::array<bool, 2>{}});
    if (!visible) continue;

    const FrequencyPair f = frequencies(sat);
    const Vec3 los = line_of_sight(pos, st.pos);
    const double d = (st.pos - pos).norm();
    const double range_rate = los.dot(st.vel - vel);
    double db = 0.0, db_rate = 0.0;
    if (rover) {
      if (const auto it = cfg_.inter_system_offsets.find(sat.system());
          it != cfg_.inter_system_offsets.end() && sat.system() != Constellation::Gps) {
        db = kSpeedOfLight * 1e-9 * (it->second.offset_ns + it->second.drift_ns_per_s * t);
        db_rate = kSpeedOfLight * 1e-9 * it->second.drift_ns_per_s;
      }
    }
    const double clock = rx_clock + db - st.clock_bias;
    const double clock_rate = rx_drift + db_rate - st.clock_drift;
    const double i1 = iono_l1(sat, t) * (kGpsL1 / f.f1) * (kGpsL1 / f.f1);
    const double i1_rate = (iono_l1(sat, t + kRateStep) - iono_l1(sat, t - kRateStep)) /
                           (2.0 * kRateStep) * (kGpsL1 / f.f1) * (kGpsL1 / f.f1);
    const std::array<double, 2> iono{i1, f.gamma * i1};
    const std::array<double, 2> iono_rate{i1_rate, f.gamma * i1_rate};
    const double trop = tropo(sat, t);
    const double trop_rate = (tropo(sat, t + kRateStep) - tropo(sat, t - kRateStep)) /
                             (2.0 * kRateStep);
    const std::array<double, 2> lambda{f.lambda1, f.lambda2};

    double code_sigma = cfg_.noise.code_sigma;
    if (cfg_.noise.rtca) {
      code_sigma = rover ? rover_code_sigma(ea.el) : sigma_models(ea.el).sigma_n;
    }
    const double noise_on = cfg_.noise.enabled ? 1.0 : 0.0;
    const auto key = sat_key(sat);
    auto draw = [&](std::uint64_t stream) {
      return noise_on * gauss(cfg_.seed, static_cast<std::uint64_t>(k), key, stream0 + stream);
    };

    SatEntry e;
    e.sat = sat;
    e.state = st;
    Observation& o = e.obs;
    const std::array<std::optional<double>*, 2> code{&o.code1, &o.code2};
    const std::array<std::optional<double>*, 2> phase{&o.phase1, &o.phase2};
    const std::array<std::optional<double>*, 2> dopp{&o.doppler1, &o.doppler2};
    for (int b = 0; b < 2; ++b) {
      const auto bu = static_cast<std::size_t>(b);
      const auto sb = static_cast<std::uint64_t>(b);
      *code[bu] = d + clock + iono[bu] + trop + mp + code_sigma * draw(kCode1 + sb);
      if (carrier) {
        double carrier_mp = 0.0;
        if (cfg_.carrier_multipath && rover) {
          const double phase0 = uniform(cfg_.seed, kCarrierMp, key, sb, 0.0, 2.0 * kPi);
          carrier_mp = 0.25 * lambda[bu] * std::sin(2.0 * kPi * t / 60.0 + phase0);
        }
        *phase[bu] = d + clock - iono[bu] + trop + carrier_mp +
                     static_cast<double>(n[bu]) * lambda[bu] +
                     cfg_.noise.phase_sigma * draw(kPhase1 + sb);
        o.lock_loss[bu] = lli[bu];
      }
      *dopp[bu] = range_rate + clock_rate - iono_rate[bu] + trop_rate +
                  cfg_.noise.doppler_sigma * draw(kDopp1 + sb);
    }
    o.cn0 = 28.0 + 0.2 * ea.el;
    rec.add(std::move(e));
  }
  return rec;
}

RenderedEpoch Simulator::render(int k) const {
  if (k < 0 || k >= n_epochs_) {
    throw Error(ErrorCode::InvalidArgument, "epoch index outside the scenario");
  }
  RenderedEpoch out;
  out.rover = render_receiver(k, true, &out.truth);
  out.ref = render_receiver(k, false, nullptr);
  return out;
}

VisibilityStats visibility_stats(const std::vector<EpochRecord>& rover) {
  VisibilityStats s;
  if (rover.empty()) return s;
  s.min_total = std::numeric_limits<int>::max();
  for (const auto& e : rover) {
    int total = 0;
    for (const auto& entry : e.entries) {
      ++total;
      switch (entry.sat.system()) {
        case Constellation::Gps: s.mean_gps += 1; break;
        case Constellation::Glonass: s.mean_glonass += 1; break;
        case Constellation::BeiDou: s.mean_beidou += 1; break;
      }
    }
    s.mean_total += total;
    s.min_total = std::min(s.min_total, total);
    s.max_total = std::max(s.max_total, total);
  }
  const double n = static_cast<double>(rover.size());
  s.mean_gps /= n;
  s.mean_glonass /= n;
  s.mean_beidou /= n;
  s.mean_total /= n;
  return s;
}

ScenarioRun run_scenario(const ScenarioConfig& cfg) {
  const Simulator sim(cfg);
  ScenarioRun run;
  const auto tropo = default_tropo_model();
  for (int k = 0; k < sim.epoch_count(); ++k) {
    RenderedEpoch r = sim.render(k);
    run.prc.push_back(generate_prc_epoch(r.ref, sim.ref_position(), tropo, sim.config().ref_id,
                                         sim.config().elevation_cutoff_deg));
    run.rover.push_back(std::move(r.rover));
    run.ref.push_back(std::move(r.ref));
    run.truth.push_back(std::move(r.truth));
  }
  run.visibility = visibility_stats(run.rover);
  return run;
}

}  // namespace urbanpos
