#include "urbanpos/io/jsonl.hpp"

#include <istream>
#include <ostream>

#include <fmt/format.h>
#include <json.hpp>

#include "urbanpos/error.hpp"

namespace urbanpos::io {

using nlohmann::json;
using ojson = nlohmann::ordered_json;

namespace {

[[noreturn]] void fail(std::size_t line_no, const std::string& msg) {
  throw ParseError(ErrorCode::ParseError, line_no, msg);
}

json parse_line(std::string_view line, std::size_t line_no) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    fail(line_no, fmt::format("invalid JSON ({})", e.what()));
  }
  if (!j.is_object()) fail(line_no, "expected a JSON object");
  if (j.contains("schema")) {
    if (!j["schema"].is_number_integer() || j["schema"].get<int>() != kSchemaVersion) {
      fail(line_no, fmt::format("unsupported schema {}", j["schema"].dump()));
    }
  }
  return j;
}

const json& field(const json& j, const char* key, std::size_t line_no, const std::string& where) {
  if (!j.contains(key) || j[key].is_null()) fail(line_no, fmt::format("{}{}: missing", where, key));
  return j[key];
}

double number(const json& j, const char* key, std::size_t line_no, const std::string& where) {
  const json& v = field(j, key, line_no, where);
  if (!v.is_number()) fail(line_no, fmt::format("{}{}: expected a number", where, key));
  return v.get<double>();
}

int integer(const json& j, const char* key, std::size_t line_no, const std::string& where) {
  const json& v = field(j, key, line_no, where);
  if (!v.is_number_integer()) fail(line_no, fmt::format("{}{}: expected an integer", where, key));
  return v.get<int>();
}

std::optional<double> opt_number(const json& j, const char* key, std::size_t line_no,
                                 const std::string& where) {
  if (!j.contains(key) || j[key].is_null()) return std::nullopt;
  if (!j[key].is_number()) fail(line_no, fmt::format("{}{}: expected a number", where, key));
  return j[key].get<double>();
}

Vec3 vec3(const json& j, const char* key, std::size_t line_no, const std::string& where,
          bool required = true) {
  if (!j.contains(key) || j[key].is_null()) {
    if (required) fail(line_no, fmt::format("{}{}: missing", where, key));
    return Vec3::Zero();
  }
  const json& v = j[key];
  if (!v.is_array() || v.size() != 3 || !v[0].is_number() || !v[1].is_number() ||
      !v[2].is_number()) {
    fail(line_no, fmt::format("{}{}: expected [x, y, z]", where, key));
  }
  return {v[0].get<double>(), v[1].get<double>(), v[2].get<double>()};
}

GnssTime time_of(const json& j, std::size_t line_no) {
  const json& t = field(j, "time", line_no, "");
  if (!t.is_object()) fail(line_no, "time: expected {week, sow}");
  const int week = integer(t, "week", line_no, "time.");
  const double sow = number(t, "sow", line_no, "time.");
  if (week < 0 || sow < 0.0 || sow >= kSecondsPerWeek) fail(line_no, "time: out of range");
  return {week, sow};
}

ojson time_json(const GnssTime& t) { return {{"week", t.week}, {"sow", t.sow}}; }

ojson vec_json(const Vec3& v) { return ojson::array({v.x(), v.y(), v.z()}); }

SatId sat_of(const json& s, std::size_t line_no, const std::string& where) {
  const json& sys = field(s, "sys", line_no, where);
  if (!sys.is_string() || sys.get<std::string>().size() != 1) {
    fail(line_no, where + "sys: expected G, R or C");
  }
  const int prn = integer(s, "prn", line_no, where);
  std::optional<int> ch;
  if (s.contains("ch") && !s["ch"].is_null()) ch = integer(s, "ch", line_no, where);
  try {
    const Constellation c = constellation_from_letter(sys.get<std::string>()[0]);
    if (c == Constellation::Glonass && !ch) fail(line_no, where + "ch: missing for GLONASS");
    SatId sat(c, prn, ch);
    if (s.contains("id") && s["id"].is_string() && s["id"].get<std::string>() != sat.str()) {
      fail(line_no, fmt::format("{}id: '{}' disagrees with sys/prn", where,
                                s["id"].get<std::string>()));
    }
    return sat;
  } catch (const ParseError&) {
    throw;
  } catch (const Error& e) {
    fail(line_no, where + e.what());
  }
}

ojson sat_json(const SatId& sat) {
  ojson j;
  j["id"] = sat.str();
  j["sys"] = std::string(1, system_letter(sat.system()));
  j["prn"] = sat.prn();
  if (sat.glonass_channel()) j["ch"] = *sat.glonass_channel();
  return j;
}

template <typename T, typename F>
std::vector<T> read_lines(std::istream& in, F parse) {
  std::vector<T> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    out.push_back(parse(line, n));
  }
  return out;
}

}  // namespace

std::string epoch_to_json(const EpochRecord& epoch) {
  ojson j;
  j["schema"] = kSchemaVersion;
  j["time"] = time_json(epoch.time);
  j["sats"] = ojson::array();
  for (const SatEntry& e : epoch.entries) {
    ojson s = sat_json(e.sat);
    const Observation& o = e.obs;
    if (o.code1) s["c1"] = *o.code1;
    if (o.code2) s["c2"] = *o.code2;
    if (o.phase1) s["l1"] = *o.phase1;
    if (o.phase2) s["l2"] = *o.phase2;
    if (o.doppler1) s["d1"] = *o.doppler1;
    if (o.doppler2) s["d2"] = *o.doppler2;
    if (o.cn0) s["cn0"] = *o.cn0;
    s["lock"] = ojson::array({o.lock_loss[0], o.lock_loss[1]});
    s["sat"] = {{"pos", vec_json(e.state.pos)},
                {"vel", vec_json(e.state.vel)},
                {"clk", e.state.clock_bias},
                {"clkd", e.state.clock_drift}};
    j["sats"].push_back(std::move(s));
  }
  return j.dump();
}

EpochRecord epoch_from_json(std::string_view line, std::size_t line_no) {
  const json j = parse_line(line, line_no);
  EpochRecord rec;
  rec.time = time_of(j, line_no);
  const json& sats = field(j, "sats", line_no, "");
  if (!sats.is_array()) fail(line_no, "sats: expected an array");
  for (std::size_t i = 0; i < sats.size(); ++i) {
    const json& s = sats[i];
    const auto where = fmt::format("sats[{}].", i);
    if (!s.is_object()) fail(line_no, where + ": expected an object");
    SatEntry e;
    e.sat = sat_of(s, line_no, where);
    e.obs.code1 = opt_number(s, "c1", line_no, where);
    e.obs.code2 = opt_number(s, "c2", line_no, where);
    e.obs.phase1 = opt_number(s, "l1", line_no, where);
    e.obs.phase2 = opt_number(s, "l2", line_no, where);
    e.obs.doppler1 = opt_number(s, "d1", line_no, where);
    e.obs.doppler2 = opt_number(s, "d2", line_no, where);
    e.obs.cn0 = opt_number(s, "cn0", line_no, where);
    if (s.contains("lock")) {
      const json& l = s["lock"];
      if (!l.is_array() || l.size() != 2 || !l[0].is_boolean() || !l[1].is_boolean()) {
        fail(line_no, where + "lock: expected [bool, bool]");
      }
      e.obs.lock_loss = {l[0].get<bool>(), l[1].get<bool>()};
    }
    const json& st = field(s, "sat", line_no, where);
    if (!st.is_object()) fail(line_no, where + "sat: expected an object");
    e.state.pos = vec3(st, "pos", line_no, where + "sat.");
    e.state.vel = vec3(st, "vel", line_no, where + "sat.", false);
    e.state.clock_bias = number(st, "clk", line_no, where + "sat.");
    e.state.clock_drift = opt_number(st, "clkd", line_no, where + "sat.").value_or(0.0);
    try {
      rec.add(std::move(e));
    } catch (const Error& err) {
      fail(line_no, err.what());
    }
  }
  return rec;
}

std::string truth_to_json(const TruthRecord& t) {
  ojson j;
  j["schema"] = kSchemaVersion;
  j["time"] = time_json(t.time);
  j["pos"] = vec_json(t.pos);
  j["vel"] = vec_json(t.vel);
  j["clock"] = t.clock;
  j["dB"] = ojson::object();
  for (const auto& [sys, v] : t.delta_b) j["dB"][std::string(1, system_letter(sys))] = v;
  j["sats"] = ojson::array();
  for (const SatTruth& s : t.sats) {
    ojson o = sat_json(s.sat);
    o["mp"] = s.multipath;
    o["visible"] = s.visible;
    o["slip"] = ojson::array({s.slip[0], s.slip[1]});
    j["sats"].push_back(std::move(o));
  }
  return j.dump();
}

TruthRecord truth_from_json(std::string_view line, std::size_t line_no) {
  const json j = parse_line(line, line_no);
  TruthRecord t;
  t.time = time_of(j, line_no);
  t.pos = vec3(j, "pos", line_no, "");
  t.vel = vec3(j, "vel", line_no, "", false);
  t.clock = opt_number(j, "clock", line_no, "").value_or(0.0);
  if (j.contains("dB")) {
    if (!j["dB"].is_object()) fail(line_no, "dB: expected an object");
    for (const auto& [key, v] : j["dB"].items()) {
      if (key.size() != 1 || !v.is_number()) fail(line_no, "dB: expected {letter: metres}");
      try {
        t.delta_b[constellation_from_letter(key[0])] = v.get<double>();
      } catch (const Error& e) {
        fail(line_no, std::string("dB: ") + e.what());
      }
    }
  }
  if (j.contains("sats")) {
    if (!j["sats"].is_array()) fail(line_no, "sats: expected an array");
    for (std::size_t i = 0; i < j["sats"].size(); ++i) {
      const json& s = j["sats"][i];
      const auto where = fmt::format("sats[{}].", i);
      if (!s.is_object()) fail(line_no, where + ": expected an object");
      SatTruth st;
      st.sat = sat_of(s, line_no, where);
      st.multipath = opt_number(s, "mp", line_no, where).value_or(0.0);
      st.visible = s.value("visible", false);
      if (s.contains("slip") && s["slip"].is_array() && s["slip"].size() == 2) {
        st.slip = {s["slip"][0].get<bool>(), s["slip"][1].get<bool>()};
      }
      t.sats.push_back(st);
    }
  }
  return t;
}

std::string prc_to_json(const PrcEpoch& p) {
  ojson j;
  j["schema"] = kSchemaVersion;
  j["time"] = time_json(p.time);
  j["ref"] = p.ref_id;
  j["corrections"] = ojson::array();
  for (const auto& c : p.corrections) {
    ojson o = sat_json(c.sat);
    o["prc"] = c.prc;
    j["corrections"].push_back(std::move(o));
  }
  return j.dump();
}

PrcEpoch prc_from_json(std::string_view line, std::size_t line_no) {
  const json j = parse_line(line, line_no);
  PrcEpoch p;
  p.time = time_of(j, line_no);
  if (j.contains("ref") && j["ref"].is_string()) p.ref_id = j["ref"].get<std::string>();
  const json& cs = field(j, "corrections", line_no, "");
  if (!cs.is_array()) fail(line_no, "corrections: expected an array");
  for (std::size_t i = 0; i < cs.size(); ++i) {
    const auto where = fmt::format("corrections[{}].", i);
    if (!cs[i].is_object()) fail(line_no, where + ": expected an object");
    PseudorangeCorrection c;
    c.sat = sat_of(cs[i], line_no, where);
    c.prc = number(cs[i], "prc", line_no, where);
    c.time = p.time;
    c.ref_id = p.ref_id;
    p.corrections.push_back(c);
  }
  return p;
}

std::vector<EpochRecord> read_epochs(std::istream& in) {
  return read_lines<EpochRecord>(
      in, [](const std::string& l, std::size_t n) { return epoch_from_json(l, n); });
}

std::vector<TruthRecord> read_truth(std::istream& in) {
  return read_lines<TruthRecord>(
      in, [](const std::string& l, std::size_t n) { return truth_from_json(l, n); });
}

std::vector<PrcEpoch> read_prc(std::istream& in) {
  return read_lines<PrcEpoch>(
      in, [](const std::string& l, std::size_t n) { return prc_from_json(l, n); });
}

void write_epochs(std::ostream& out, const std::vector<EpochRecord>& epochs) {
  for (const auto& e : epochs) out << epoch_to_json(e) << '\n';
}

void write_truth(std::ostream& out, const std::vector<TruthRecord>& truth) {
  for (const auto& t : truth) out << truth_to_json(t) << '\n';
}

void write_prc(std::ostream& out, const std::vector<PrcEpoch>& prc) {
  for (const auto& p : prc) out << prc_to_json(p) << '\n';
}

}  // namespace urbanpos::io
