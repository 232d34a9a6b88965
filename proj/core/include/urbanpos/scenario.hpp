#pragma once

// Synthetic urban-canyon scenarios with full ground truth.

#include <array>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "urbanpos/geodesy.hpp"
#include "urbanpos/ref_station.hpp"
#include "urbanpos/types.hpp"

namespace urbanpos {

struct Waypoint {
  Vec3 enu = Vec3::Zero();  // m from the origin
  double speed = 0.0;       // m/s on the leg that starts here
};

struct OrbitShell {
  Constellation system = Constellation::Gps;
  int planes = 6;
  int per_plane = 4;
  double radius_m = 26559.7e3;
  double inclination_deg = 55.0;
  double raan_offset_deg = 0.0;
  double phasing_deg = 0.0;  // along-track shift between adjacent planes
  double anomaly_offset_deg = 0.0;
  int first_prn = 1;

  int count() const { return planes * per_plane; }
  double period() const;  // s
};

struct SystemOffset {
  double offset_ns = 0.0;
  double drift_ns_per_s = 0.0;
};

/// Minimum elevation as a piecewise-linear function of azimuth, active for
/// t in [start, end).
struct MaskSegment {
  double start = 0.0;
  double end = 0.0;
  std::vector<std::pair<double, double>> az_el;  // (azimuth deg, min elevation deg), sorted

  double min_elevation(double az_deg) const;
};

enum class MultipathProfile { Step, Ramp, RandomWalk };

struct MultipathEvent {
  SatId sat;
  double start = 0.0;
  double end = 0.0;
  MultipathProfile profile = MultipathProfile::Step;
  double magnitude = 0.0;  // m; step level, ramp end value, or random-walk spread at `end`
};

struct SlipEvent {
  SatId sat;
  double time = 0.0;
  int dn1 = 0;
  int dn2 = 0;
  bool lli = false;
};

enum class OutageKind { Signal, Carrier };

struct OutageEvent {
  SatId sat;
  double start = 0.0;
  double end = 0.0;
  OutageKind kind = OutageKind::Signal;
};

struct IonoConfig {
  double zenith_m = 3.0;       // L1 vertical delay at t = 0
  double drift_m_per_s = 0.0;  // vertical rate
  double shell_height_m = 350e3;
};

struct NoiseConfig {
  bool rtca = true;  // elevation-dependent code sigmas; otherwise code_sigma
  double code_sigma = 0.3;
  double phase_sigma = 0.002;
  double doppler_sigma = 0.03;
  bool enabled = true;
};

struct ScenarioConfig {
  int schema = 1;
  std::string name = "custom";
  double duration = 300.0;  // s
  double rate = 1.0;        // Hz
  GnssTime start{2052, 345600.0};
  Geodetic origin{37.5045 * kDeg, 127.0489 * kDeg, 40.0};
  std::vector<Waypoint> trajectory;  // empty: static at the origin
  std::vector<OrbitShell> constellations;
  std::map<Constellation, SystemOffset> inter_system_offsets;
  std::vector<MaskSegment> canyon_mask;
  std::vector<MultipathEvent> multipath_events;
  std::vector<SlipEvent> slip_events;
  std::vector<OutageEvent> outages;
  IonoConfig iono;
  double tropo_scale = 1.0;
  NoiseConfig noise;
  bool carrier_multipath = false;  // bounded carrier multipath, |m| <= lambda/4
  double elevation_cutoff_deg = 5.0;
  Vec3 ref_enu{250.0, -400.0, 5.0};
  std::string ref_id = "REF0";
  double rover_clock_m = 120.0;
  double rover_clock_drift = 0.05;  // m/s
  double ref_clock_m = -80.0;
  double ref_clock_drift = 0.02;
  double ambiguity_range = 1e5;  // cycles
  std::uint64_t seed = 1;

  int epoch_count() const;
  /// Throws Error(ConfigInvalid) listing every offending field.
  void validate() const;
};

/// Default three-constellation MEO geometry.
std::vector<OrbitShell> default_constellations();

ScenarioConfig parse_scenario_config(std::string_view json_text);
std::string dump_scenario_config(const ScenarioConfig& cfg);

std::vector<std::string> preset_names();
/// Throws InvalidArgument for unknown names.
ScenarioConfig preset(std::string_view name, std::uint64_t seed = 1);
/// JSON merge patch (RFC 7396) of `patch` over `base`, both JSON texts.
std::string merge_patch_json(std::string_view base, std::string_view patch);

struct SatTruth {
  SatId sat;
  double multipath = 0.0;  // code multipath on both bands (m)
  bool visible = false;
  std::array<bool, 2> slip{false, false};
};

struct TruthRecord {
  GnssTime time;
  Vec3 pos = Vec3::Zero();
  Vec3 vel = Vec3::Zero();
  double clock = 0.0;                        // GPS receiver clock (m)
  std::map<Constellation, double> delta_b;  // rover inter-system offsets (m)
  std::vector<SatTruth> sats;

  const SatTruth* find(const SatId& sat) const;
};

struct VisibilityStats {
  double mean_gps = 0.0;
  double mean_glonass = 0.0;
  double mean_beidou = 0.0;
  double mean_total = 0.0;
  int min_total = 0;
  int max_total = 0;
};

struct RenderedEpoch {
  EpochRecord rover;
  EpochRecord ref;
  TruthRecord truth;
};

class Simulator {
 public:
  explicit Simulator(ScenarioConfig cfg);

  const ScenarioConfig& config() const { return cfg_; }
  int epoch_count() const { return n_epochs_; }
  double epoch_offset(int k) const { return k / cfg_.rate; }
  GnssTime epoch_time(int k) const { return cfg_.start + epoch_offset(k); }

  /// Every satellite of every shell at t seconds after start.
  std::vector<std::pair<SatId, SatelliteState>> satellites(double t) const;
  Vec3 rover_position(double t) const;
  Vec3 rover_velocity(double t) const;
  Vec3 ref_position() const { return ref_pos_; }
  Vec3 origin() const { return origin_; }
  /// Mask minimum elevation at the rover for azimuth az at time t.
  double mask_elevation(double t, double az_deg) const;
  /// Code multipath truth for a satellite at t.
  double multipath(const SatId& sat, double t) const;

  RenderedEpoch render(int k) const;

 private:
  struct Arc {
    int first = 0;  // epoch index of the arc start
    std::array<long long, 2> n0{0, 0};
  };

  void build_arcs();
  EpochRecord render_receiver(int k, bool rover, TruthRecord* truth) const;

  ScenarioConfig cfg_;
  int n_epochs_ = 0;
  Vec3 origin_;
  Mat3 enu_to_ecef_;
  Vec3 ref_pos_;
  std::vector<double> leg_start_time_;
  std::map<SatId, std::pair<double, double>> sat_clock_;  // bias m, drift m/s
  std::map<SatId, std::pair<std::size_t, int>> shell_slot_;
  std::map<SatId, std::vector<Arc>> rover_arcs_;
  std::map<SatId, std::vector<Arc>> ref_arcs_;
  std::vector<std::vector<double>> random_walks_;  // per multipath event
};

struct ScenarioRun {
  std::vector<EpochRecord> rover;
  std::vector<EpochRecord> ref;
  std::vector<TruthRecord> truth;
  std::vector<PrcEpoch> prc;
  VisibilityStats visibility;
};

ScenarioRun run_scenario(const ScenarioConfig& cfg);
VisibilityStats visibility_stats(const std::vector<EpochRecord>& rover);

}  // namespace urbanpos
