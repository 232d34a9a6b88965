#include "urbanpos/scenario.hpp"

#include <cmath>
#include <set>

#include <fmt/format.h>
#include <json.hpp>

#include "urbanpos/error.hpp"

namespace urbanpos {

using nlohmann::json;
using ojson = nlohmann::ordered_json;

std::vector<OrbitShell> default_constellations() {
  OrbitShell gps;
  gps.system = Constellation::Gps;
  gps.planes = 6;
  gps.per_plane = 4;
  gps.radius_m = 26559.7e3;
  gps.inclination_deg = 55.0;
  gps.raan_offset_deg = 17.0;
  gps.phasing_deg = 15.0;
  gps.anomaly_offset_deg = 8.0;

  OrbitShell glo;
  glo.system = Constellation::Glonass;
  glo.planes = 3;
  glo.per_plane = 8;
  glo.radius_m = 25510e3;
  glo.inclination_deg = 64.8;
  glo.raan_offset_deg = 52.0;
  glo.phasing_deg = 15.0;
  glo.anomaly_offset_deg = 31.0;

  OrbitShell bds;
  bds.system = Constellation::BeiDou;
  bds.planes = 3;
  bds.per_plane = 8;
  bds.radius_m = 27906e3;
  bds.inclination_deg = 55.0;
  bds.raan_offset_deg = 95.0;
  bds.phasing_deg = 15.0;
  bds.anomaly_offset_deg = 63.0;
  bds.first_prn = 19;
  return {gps, glo, bds};
}

int ScenarioConfig::epoch_count() const {
  return static_cast<int>(std::llround(duration * rate));
}

namespace {

bool sat_in(const std::vector<OrbitShell>& shells, const SatId& sat) {
  for (const auto& s : shells) {
    if (s.system == sat.system() && sat.prn() >= s.first_prn &&
        sat.prn() < s.first_prn + s.count()) {
      return true;
    }
  }
  return false;
}

}  // namespace

void ScenarioConfig::validate() const {
  std::vector<std::string> bad;
  auto check = [&](bool ok, std::string msg) {
    if (!ok) bad.push_back(std::move(msg));
  };
  check(schema == 1, fmt::format("schema: expected 1, got {}", schema));
  check(duration > 0.0 && std::isfinite(duration), "duration: must be > 0");
  check(rate > 0.0 && rate <= 100.0, "rate: must be in (0, 100] Hz");
  check(duration * rate >= 1.0 - 1e-9, "duration*rate: at least one epoch required");
  check(std::abs(duration * rate - std::round(duration * rate)) < 1e-6,
        "duration*rate: must be a whole number of epochs");
  check(std::abs(origin.lat) <= kPi / 2 && std::abs(origin.lon) <= kPi,
        "origin: latitude/longitude out of range");
  check(origin.height > -500.0 && origin.height < 9000.0, "origin.height_m: out of range");
  for (std::size_t i = 0; i < trajectory.size(); ++i) {
    check(trajectory[i].speed >= 0.0, fmt::format("trajectory[{}].speed: must be >= 0", i));
    if (i + 1 < trajectory.size() && (trajectory[i + 1].enu - trajectory[i].enu).norm() > 0.0) {
      check(trajectory[i].speed > 0.0,
            fmt::format("trajectory[{}].speed: must be > 0 to reach the next waypoint", i));
    }
  }
  check(!constellations.empty(), "constellations: at least one shell required");
  std::set<std::pair<int, int>> ids;
  for (std::size_t i = 0; i < constellations.size(); ++i) {
    const auto& s = constellations[i];
    const auto at = fmt::format("constellations[{}]", i);
    check(s.planes >= 1 && s.per_plane >= 1, at + ": planes and per_plane must be >= 1");
    check(s.radius_m >= 1.8e7 && s.radius_m <= 4.8e7, at + ".radius_m: outside 1.8e7..4.8e7");
    check(s.inclination_deg >= 0.0 && s.inclination_deg <= 180.0,
          at + ".inclination_deg: outside 0..180");
    check(s.first_prn >= 1 && s.first_prn + s.count() - 1 <= 99,
          at + ": PRNs must stay within 1..99");
    for (int k = 0; k < s.count(); ++k) {
      const bool fresh = ids.insert({static_cast<int>(s.system), s.first_prn + k}).second;
      if (!fresh) {
        bad.push_back(at + ": PRN range overlaps another shell");
        break;
      }
    }
  }
  for (const auto& [sys, off] : inter_system_offsets) {
    check(sys != Constellation::Gps, "inter_system_offsets: GPS is the reference and takes none");
    check(std::isfinite(off.offset_ns) && std::isfinite(off.drift_ns_per_s),
          "inter_system_offsets: values must be finite");
  }
  for (std::size_t i = 0; i < canyon_mask.size(); ++i) {
    const auto& m = canyon_mask[i];
    const auto at = fmt::format("canyon_mask[{}]", i);
    check(m.end > m.start, at + ": end must exceed start");
    check(!m.az_el.empty(), at + ".az_el: at least one point");
    for (std::size_t j = 0; j < m.az_el.size(); ++j) {
      const auto [az, el] = m.az_el[j];
      check(az >= 0.0 && az < 360.0, fmt::format("{}.az_el[{}]: azimuth outside [0, 360)", at, j));
      check(el >= 0.0 && el <= 90.0, fmt::format("{}.az_el[{}]: elevation outside [0, 90]", at, j));
      if (j > 0) {
        check(az > m.az_el[j - 1].first,
              fmt::format("{}.az_el[{}]: azimuths must increase", at, j));
      }
    }
  }
  for (std::size_t i = 0; i < multipath_events.size(); ++i) {
    const auto& e = multipath_events[i];
    const auto at = fmt::format("multipath_events[{}]", i);
    check(sat_in(constellations, e.sat), at + ".sat: not in any constellation");
    check(e.end > e.start, at + ": end must exceed start");
    check(std::isfinite(e.magnitude), at + ".magnitude: must be finite");
  }
  for (std::size_t i = 0; i < slip_events.size(); ++i) {
    const auto& e = slip_events[i];
    const auto at = fmt::format("slip_events[{}]", i);
    check(sat_in(constellations, e.sat), at + ".sat: not in any constellation");
    check(e.time >= 0.0 && e.time <= duration, at + ".time: outside the scenario");
  }
  for (std::size_t i = 0; i < outages.size(); ++i) {
    const auto& o = outages[i];
    const auto at = fmt::format("outages[{}]", i);
    check(sat_in(constellations, o.sat), at + ".sat: not in any constellation");
    check(o.end > o.start, at + ": end must exceed start");
  }
  check(iono.zenith_m >= 0.0 && iono.zenith_m < 100.0, "iono.zenith_m: outside [0, 100)");
  check(std::isfinite(iono.drift_m_per_s), "iono.drift_m_per_s: must be finite");
  check(iono.shell_height_m > 0.0, "iono.shell_height_m: must be > 0");
  check(tropo_scale >= 0.0 && tropo_scale < 10.0, "tropo_truth.scale: outside [0, 10)");
  check(noise.code_sigma >= 0.0 && noise.phase_sigma >= 0.0 && noise.doppler_sigma >= 0.0,
        "noise: sigmas must be >= 0");
  check(elevation_cutoff_deg >= kDefaultElevationCutoffDeg && elevation_cutoff_deg < 90.0,
        "elevation_cutoff_deg: must be in [5, 90)");
  check(ambiguity_range >= 1.0 && ambiguity_range <= 1e7, "ambiguity_range: outside [1, 1e7]");
  check(std::abs(rover_clock_m) < 1e5 && std::abs(ref_clock_m) < 500.0,
        "clocks: rover bias must be < 1e5 m, reference bias < 500 m");
  if (!bad.empty()) {
    throw Error(ErrorCode::ConfigInvalid, fmt::format("scenario config: {}", fmt::join(bad, "; ")));
  }
}

namespace {

// Field readers that report the JSON path on type errors.
template <typename T>
void read(const json& j, const char* key, T& out, const std::string& path) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw Error(ErrorCode::ConfigInvalid, fmt::format("{}{}: wrong type", path, key));
  }
}

void require_object(const json& j, const std::string& path) {
  if (!j.is_object()) throw Error(ErrorCode::ConfigInvalid, path + ": expected an object");
}

void require_array(const json& j, const std::string& path) {
  if (!j.is_array()) throw Error(ErrorCode::ConfigInvalid, path + ": expected an array");
}

Constellation system_from(const json& j, const std::string& path) {
  if (!j.is_string() || j.get<std::string>().size() != 1) {
    throw Error(ErrorCode::ConfigInvalid, path + ": expected a one-letter system (G, R, C)");
  }
  try {
    return constellation_from_letter(j.get<std::string>()[0]);
  } catch (const Error&) {
    throw Error(ErrorCode::ConfigInvalid, path + ": unknown system letter");
  }
}

SatId sat_from(const json& j, const std::string& path) {
  if (!j.is_string()) throw Error(ErrorCode::ConfigInvalid, path + ": expected a satellite id");
  const std::string text = j.get<std::string>();
  try {
    if (!text.empty() && text[0] == 'R') {
      const SatId probe = SatId::parse(text, 0);
      return SatId::glonass(probe.prn(), ((probe.prn() - 1) % 14) - 7);
    }
    return SatId::parse(text);
  } catch (const Error&) {
    throw Error(ErrorCode::ConfigInvalid, fmt::format("{}: bad satellite id '{}'", path, text));
  }
}

MultipathProfile profile_from(const std::string& s, const std::string& path) {
  if (s == "step") return MultipathProfile::Step;
  if (s == "ramp") return MultipathProfile::Ramp;
  if (s == "random-walk") return MultipathProfile::RandomWalk;
  throw Error(ErrorCode::ConfigInvalid,
              fmt::format("{}: profile must be step, ramp or random-walk", path));
}

std::string profile_name(MultipathProfile p) {
  switch (p) {
    case MultipathProfile::Step: return "step";
    case MultipathProfile::Ramp: return "ramp";
    case MultipathProfile::RandomWalk: return "random-walk";
  }
  return "step";
}

const std::set<std::string> kTopLevelKeys = {
    "schema", "name", "duration", "rate", "start", "origin", "trajectory", "constellations",
    "inter_system_offsets", "canyon_mask", "multipath_events", "slip_events", "outages",
    "iono", "tropo_truth", "noise", "carrier_multipath", "elevation_cutoff_deg", "ref",
    "rover_clock", "ambiguity_range", "seed"};

}  // namespace

ScenarioConfig parse_scenario_config(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::ConfigInvalid, fmt::format("scenario config: {}", e.what()));
  }
  require_object(j, "config");
  for (const auto& [key, _] : j.items()) {
    if (!kTopLevelKeys.count(key)) {
      throw Error(ErrorCode::ConfigInvalid, fmt::format("{}: unknown field", key));
    }
  }

  ScenarioConfig c;
  read(j, "schema", c.schema, "");
  read(j, "name", c.name, "");
  read(j, "duration", c.duration, "");
  read(j, "rate", c.rate, "");
  if (j.contains("start")) {
    require_object(j["start"], "start");
    int week = c.start.week;
    double sow = c.start.sow;
    read(j["start"], "week", week, "start.");
    read(j["start"], "sow", sow, "start.");
    c.start = GnssTime::normalized(week, sow);
  }
  if (j.contains("origin")) {
    const json& o = j["origin"];
    require_object(o, "origin");
    double lat = c.origin.lat / kDeg, lon = c.origin.lon / kDeg;
    read(o, "lat_deg", lat, "origin.");
    read(o, "lon_deg", lon, "origin.");
    read(o, "height_m", c.origin.height, "origin.");
    c.origin.lat = lat * kDeg;
    c.origin.lon = lon * kDeg;
  }
  if (j.contains("trajectory")) {
    require_array(j["trajectory"], "trajectory");
    for (std::size_t i = 0; i < j["trajectory"].size(); ++i) {
      const json& w = j["trajectory"][i];
      const auto path = fmt::format("trajectory[{}].", i);
      require_object(w, path);
      Waypoint wp;
      read(w, "e", wp.enu.x(), path);
      read(w, "n", wp.enu.y(), path);
      read(w, "u", wp.enu.z(), path);
      read(w, "speed", wp.speed, path);
      c.trajectory.push_back(wp);
    }
  }
  if (j.contains("constellations")) {
    require_array(j["constellations"], "constellations");
    for (std::size_t i = 0; i < j["constellations"].size(); ++i) {
      const json& s = j["constellations"][i];
      const auto path = fmt::format("constellations[{}].", i);
      require_object(s, path);
      OrbitShell shell;
      if (!s.contains("system")) throw Error(ErrorCode::ConfigInvalid, path + "system: missing");
      shell.system = system_from(s["system"], path + "system");
      if (shell.system == Constellation::BeiDou) shell.first_prn = 19;
      read(s, "planes", shell.planes, path);
      read(s, "per_plane", shell.per_plane, path);
      read(s, "radius_m", shell.radius_m, path);
      read(s, "inclination_deg", shell.inclination_deg, path);
      read(s, "raan_offset_deg", shell.raan_offset_deg, path);
      read(s, "phasing_deg", shell.phasing_deg, path);
      read(s, "anomaly_offset_deg", shell.anomaly_offset_deg, path);
      read(s, "first_prn", shell.first_prn, path);
      c.constellations.push_back(shell);
    }
  } else {
    c.constellations = default_constellations();
  }
  if (j.contains("inter_system_offsets")) {
    const json& m = j["inter_system_offsets"];
    require_object(m, "inter_system_offsets");
    for (const auto& [key, v] : m.items()) {
      const auto path = "inter_system_offsets." + key;
      const Constellation sys = system_from(json(key), path);
      require_object(v, path);
      SystemOffset off;
      read(v, "offset_ns", off.offset_ns, path + ".");
      read(v, "drift_ns_per_s", off.drift_ns_per_s, path + ".");
      c.inter_system_offsets[sys] = off;
    }
  }
  if (j.contains("canyon_mask")) {
    require_array(j["canyon_mask"], "canyon_mask");
    for (std::size_t i = 0; i < j["canyon_mask"].size(); ++i) {
      const json& m = j["canyon_mask"][i];
      const auto path = fmt::format("canyon_mask[{}].", i);
      require_object(m, path);
      MaskSegment seg;
      read(m, "start", seg.start, path);
      read(m, "end", seg.end, path);
      read(m, "az_el", seg.az_el, path);
      c.canyon_mask.push_back(std::move(seg));
    }
  }
  if (j.contains("multipath_events")) {
    require_array(j["multipath_events"], "multipath_events");
    for (std::size_t i = 0; i < j["multipath_events"].size(); ++i) {
      const json& e = j["multipath_events"][i];
      const auto path = fmt::format("multipath_events[{}].", i);
      require_object(e, path);
      MultipathEvent ev;
      if (!e.contains("sat")) throw Error(ErrorCode::ConfigInvalid, path + "sat: missing");
      ev.sat = sat_from(e["sat"], path + "sat");
      read(e, "start", ev.start, path);
      read(e, "end", ev.end, path);
      std::string profile = "step";
      read(e, "profile", profile, path);
      ev.profile = profile_from(profile, path + "profile");
      read(e, "magnitude", ev.magnitude, path);
      c.multipath_events.push_back(ev);
    }
  }
  if (j.contains("slip_events")) {
    require_array(j["slip_events"], "slip_events");
    for (std::size_t i = 0; i < j["slip_events"].size(); ++i) {
      const json& e = j["slip_events"][i];
      const auto path = fmt::format("slip_events[{}].", i);
      require_object(e, path);
      SlipEvent ev;
      if (!e.contains("sat")) throw Error(ErrorCode::ConfigInvalid, path + "sat: missing");
      ev.sat = sat_from(e["sat"], path + "sat");
      read(e, "time", ev.time, path);
      read(e, "dn1", ev.dn1, path);
      read(e, "dn2", ev.dn2, path);
      read(e, "lli", ev.lli, path);
      c.slip_events.push_back(ev);
    }
  }
  if (j.contains("outages")) {
    require_array(j["outages"], "outages");
    for (std::size_t i = 0; i < j["outages"].size(); ++i) {
      const json& e = j["outages"][i];
      const auto path = fmt::format("outages[{}].", i);
      require_object(e, path);
      OutageEvent ev;
      if (!e.contains("sat")) throw Error(ErrorCode::ConfigInvalid, path + "sat: missing");
      ev.sat = sat_from(e["sat"], path + "sat");
      read(e, "start", ev.start, path);
      read(e, "end", ev.end, path);
      std::string kind = "signal";
      read(e, "kind", kind, path);
      if (kind != "signal" && kind != "carrier") {
        throw Error(ErrorCode::ConfigInvalid, path + "kind: must be signal or carrier");
      }
      ev.kind = kind == "signal" ? OutageKind::Signal : OutageKind::Carrier;
      c.outages.push_back(ev);
    }
  }
  if (j.contains("iono")) {
    require_object(j["iono"], "iono");
    read(j["iono"], "zenith_m", c.iono.zenith_m, "iono.");
    read(j["iono"], "drift_m_per_s", c.iono.drift_m_per_s, "iono.");
    read(j["iono"], "shell_height_m", c.iono.shell_height_m, "iono.");
  }
  if (j.contains("tropo_truth")) {
    require_object(j["tropo_truth"], "tropo_truth");
    read(j["tropo_truth"], "scale", c.tropo_scale, "tropo_truth.");
  }
  if (j.contains("noise")) {
    const json& n = j["noise"];
    if (n.is_string()) {
      if (n.get<std::string>() != "rtca") {
        throw Error(ErrorCode::ConfigInvalid, "noise: string form must be \"rtca\"");
      }
      c.noise.rtca = true;
    } else {
      require_object(n, "noise");
      std::string mode = "rtca";
      read(n, "mode", mode, "noise.");
      if (mode != "rtca" && mode != "fixed") {
        throw Error(ErrorCode::ConfigInvalid, "noise.mode: must be rtca or fixed");
      }
      c.noise.rtca = mode == "rtca";
      read(n, "code_sigma", c.noise.code_sigma, "noise.");
      read(n, "phase_sigma", c.noise.phase_sigma, "noise.");
      read(n, "doppler_sigma", c.noise.doppler_sigma, "noise.");
      read(n, "enabled", c.noise.enabled, "noise.");
    }
  }
  read(j, "carrier_multipath", c.carrier_multipath, "");
  read(j, "elevation_cutoff_deg", c.elevation_cutoff_deg, "");
  if (j.contains("ref")) {
    const json& r = j["ref"];
    require_object(r, "ref");
    read(r, "e", c.ref_enu.x(), "ref.");
    read(r, "n", c.ref_enu.y(), "ref.");
    read(r, "u", c.ref_enu.z(), "ref.");
    read(r, "id", c.ref_id, "ref.");
    read(r, "clock_m", c.ref_clock_m, "ref.");
    read(r, "clock_drift", c.ref_clock_drift, "ref.");
  }
  if (j.contains("rover_clock")) {
    require_object(j["rover_clock"], "rover_clock");
    read(j["rover_clock"], "bias_m", c.rover_clock_m, "rover_clock.");
    read(j["rover_clock"], "drift_m_per_s", c.rover_clock_drift, "rover_clock.");
  }
  read(j, "ambiguity_range", c.ambiguity_range, "");
  read(j, "seed", c.seed, "");
  c.validate();
  return c;
}

std::string dump_scenario_config(const ScenarioConfig& c) {
  ojson j;
  j["schema"] = c.schema;
  j["name"] = c.name;
  j["duration"] = c.duration;
  j["rate"] = c.rate;
  j["start"] = {{"week", c.start.week}, {"sow", c.start.sow}};
  j["origin"] = {{"lat_deg", c.origin.lat / kDeg},
                 {"lon_deg", c.origin.lon / kDeg},
                 {"height_m", c.origin.height}};
  j["trajectory"] = ojson::array();
  for (const auto& w : c.trajectory) {
    j["trajectory"].push_back(
        {{"e", w.enu.x()}, {"n", w.enu.y()}, {"u", w.enu.z()}, {"speed", w.speed}});
  }
  j["constellations"] = ojson::array();
  for (const auto& s : c.constellations) {
    j["constellations"].push_back({{"system", std::string(1, system_letter(s.system))},
                                   {"planes", s.planes},
                                   {"per_plane", s.per_plane},
                                   {"radius_m", s.radius_m},
                                   {"inclination_deg", s.inclination_deg},
                                   {"raan_offset_deg", s.raan_offset_deg},
                                   {"phasing_deg", s.phasing_deg},
                                   {"anomaly_offset_deg", s.anomaly_offset_deg},
                                   {"first_prn", s.first_prn}});
  }
  j["inter_system_offsets"] = ojson::object();
  for (const auto& [sys, off] : c.inter_system_offsets) {
    j["inter_system_offsets"][std::string(1, system_letter(sys))] = {
        {"offset_ns", off.offset_ns}, {"drift_ns_per_s", off.drift_ns_per_s}};
  }
  j["canyon_mask"] = ojson::array();
  for (const auto& m : c.canyon_mask) {
    j["canyon_mask"].push_back({{"start", m.start}, {"end", m.end}, {"az_el", m.az_el}});
  }
  j["multipath_events"] = ojson::array();
  for (const auto& e : c.multipath_events) {
    j["multipath_events"].push_back({{"sat", e.sat.str()},
                                     {"start", e.start},
                                     {"end", e.end},
                                     {"profile", profile_name(e.profile)},
                                     {"magnitude", e.magnitude}});
  }
  j["slip_events"] = ojson::array();
  for (const auto& e : c.slip_events) {
    j["slip_events"].push_back(
        {{"sat", e.sat.str()}, {"time", e.time}, {"dn1", e.dn1}, {"dn2", e.dn2}, {"lli", e.lli}});
  }
  j["outages"] = ojson::array();
  for (const auto& o : c.outages) {
    j["outages"].push_back({{"sat", o.sat.str()},
                            {"start", o.start},
                            {"end", o.end},
                            {"kind", o.kind == OutageKind::Signal ? "signal" : "carrier"}});
  }
  j["iono"] = {{"zenith_m", c.iono.zenith_m},
               {"drift_m_per_s", c.iono.drift_m_per_s},
               {"shell_height_m", c.iono.shell_height_m}};
  j["tropo_truth"] = {{"scale", c.tropo_scale}};
  j["noise"] = {{"mode", c.noise.rtca ? "rtca" : "fixed"},
                {"code_sigma", c.noise.code_sigma},
                {"phase_sigma", c.noise.phase_sigma},
                {"doppler_sigma", c.noise.doppler_sigma},
                {"enabled", c.noise.enabled}};
  j["carrier_multipath"] = c.carrier_multipath;
  j["elevation_cutoff_deg"] = c.elevation_cutoff_deg;
  j["ref"] = {{"e", c.ref_enu.x()},         {"n", c.ref_enu.y()},
              {"u", c.ref_enu.z()},         {"id", c.ref_id},
              {"clock_m", c.ref_clock_m},   {"clock_drift", c.ref_clock_drift}};
  j["rover_clock"] = {{"bias_m", c.rover_clock_m}, {"drift_m_per_s", c.rover_clock_drift}};
  j["ambiguity_range"] = c.ambiguity_range;
  j["seed"] = c.seed;
  return j.dump(2);
}

std::string merge_patch_json(std::string_view base, std::string_view patch) {
  try {
    ojson b = ojson::parse(base);
    b.merge_patch(ojson::parse(patch));
    return b.dump(2);
  } catch (const ojson::parse_error& e) {
    throw Error(ErrorCode::ConfigInvalid, fmt::format("config JSON: {}", e.what()));
  }
}

}  // namespace urbanpos
