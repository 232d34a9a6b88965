#include "urbanpos/io/rinex.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <optional>
#include <string_view>

#include <fmt/format.h>

#include "urbanpos/error.hpp"

namespace urbanpos::io {

namespace {

constexpr std::size_t kLabelColumn = 60;
constexpr std::size_t kFieldWidth = 16;  // F14.3 + LLI + SSI

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::string_view columns(std::string_view line, std::size_t pos, std::size_t len) {
  if (pos >= line.size()) return {};
  return line.substr(pos, len);
}

std::string_view label_of(std::string_view line) { return trim(columns(line, kLabelColumn, 20)); }

template <typename T>
std::optional<T> to_number(std::string_view s) {
  s = trim(s);
  if (s.empty()) return std::nullopt;
  if (s.front() == '+') s.remove_prefix(1);
  T v{};
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
  if constexpr (std::is_floating_point_v<T>) {
    if (!std::isfinite(v)) return std::nullopt;
  }
  return v;
}

template <typename T>
T require_number(std::string_view s, std::size_t line_no, ErrorCode code, const char* what) {
  auto v = to_number<T>(s);
  if (!v) throw ParseError(code, line_no, fmt::format("bad {} '{}'", what, trim(s)));
  return *v;
}

struct BandCodes {
  std::vector<std::string> code, phase, doppler, snr;
};

// Candidate codes for band 1 and band 2 in order of preference.
std::array<BandCodes, 2> supported_codes(Constellation c) {
  switch (c) {
    case Constellation::Gps:
      return {BandCodes{{"C1C"}, {"L1C"}, {"D1C"}, {"S1C"}},
              BandCodes{{"C2W", "C2P"}, {"L2W", "L2P"}, {"D2W", "D2P"}, {"S2W", "S2P"}}};
    case Constellation::Glonass:
      return {BandCodes{{"C1C"}, {"L1C"}, {"D1C"}, {"S1C"}},
              BandCodes{{"C2P", "C2C"}, {"L2P", "L2C"}, {"D2P", "D2C"}, {"S2P", "S2C"}}};
    case Constellation::BeiDou:
      return {BandCodes{{"C2I"}, {"L2I"}, {"D2I"}, {"S2I"}},
              BandCodes{{"C7I"}, {"L7I"}, {"D7I"}, {"S7I"}}};
  }
  return {};
}

struct Field {
  std::optional<double> value;
  int lli = 0;
};

class Parser {
 public:
  explicit Parser(std::istream& in) : in_(in) {}

  RinexObsData run() {
    read_header();
    read_body();
    for (auto& [letter, types] : types_) {
      try {
        out_.obs_types[constellation_from_letter(letter)] = types;
      } catch (const Error&) {
        // other systems are read past but not reported
      }
    }
    return std::move(out_);
  }

 private:
  bool next(std::string& line) {
    if (!std::getline(in_, line)) return false;
    ++line_no_;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return true;
  }

  [[noreturn]] void header_error(const std::string& msg) const {
    throw ParseError(ErrorCode::HeaderMalformed, line_no_, msg);
  }

  void read_header() {
    std::string line;
    if (!next(line)) throw ParseError(ErrorCode::HeaderMalformed, 1, "empty file");
    if (label_of(line) != "RINEX VERSION / TYPE") header_error("first line is not RINEX VERSION / TYPE");
    const auto version = to_number<double>(columns(line, 0, 9));
    if (!version) header_error("unreadable version");
    out_.version = *version;
    if (*version < 3.0) {
      throw ParseError(ErrorCode::UnsupportedVersion, line_no_,
                       fmt::format("RINEX {:.2f} (3.x required)", *version));
    }
    if (columns(line, 20, 1) != "O") header_error("not an observation file");

    char sys = 0;
    std::size_t expected = 0;
    while (next(line)) {
      const auto label = label_of(line);
      if (label == "END OF HEADER") {
        for (const auto& [letter, types] : types_) {
          if (types.size() != counts_[letter]) {
            header_error(fmt::format("system {} declares {} types, lists {}", letter,
                                     counts_[letter], types.size()));
          }
        }
        return;
      }
      if (label == "SYS / # / OBS TYPES") {
        if (line[0] != ' ') {
          sys = line[0];
          expected = require_number<std::size_t>(columns(line, 3, 3), line_no_,
                                                 ErrorCode::HeaderMalformed, "type count");
          if (types_.count(sys)) header_error(fmt::format("system {} listed twice", sys));
          types_[sys];
          counts_[sys] = expected;
        } else if (sys == 0) {
          header_error("continuation line without a system");
        }
        auto& types = types_[sys];
        for (std::size_t pos = 7; pos + 3 <= kLabelColumn && types.size() < expected; pos += 4) {
          const auto code = trim(columns(line, pos, 3));
          if (code.empty()) break;
          if (code.size() != 3) header_error(fmt::format("bad observation code '{}'", code));
          types.emplace_back(code);
        }
      } else if (label == "GLONASS SLOT / FRQ #") {
        read_glonass_slots(line);
      } else if (label == "TIME OF FIRST OBS") {
        const auto sys_name = trim(columns(line, 48, 3));
        if (!sys_name.empty() && sys_name != "GPS") {
          header_error(fmt::format("time system {} not supported (GPS only)", sys_name));
        }
      }
    }
    header_error("missing END OF HEADER");
  }

  void read_glonass_slots(std::string_view line) {
    auto body = columns(line, 4, kLabelColumn - 4);
    std::vector<std::string_view> tokens;
    while (true) {
      body = trim(body);
      if (body.empty()) break;
      const auto end = body.find(' ');
      tokens.push_back(body.substr(0, end));
      if (end == std::string_view::npos) break;
      body.remove_prefix(end);
    }
    if (tokens.size() % 2 != 0) header_error("unpaired GLONASS slot entry");
    for (std::size_t i = 0; i < tokens.size(); i += 2) {
      if (tokens[i].size() < 2 || tokens[i][0] != 'R') {
        header_error(fmt::format("bad GLONASS slot '{}'", tokens[i]));
      }
      const int slot = require_number<int>(tokens[i].substr(1), line_no_,
                                           ErrorCode::HeaderMalformed, "GLONASS slot");
      const int ch = require_number<int>(tokens[i + 1], line_no_, ErrorCode::HeaderMalformed,
                                         "GLONASS channel");
      if (ch < -7 || ch > 6) header_error(fmt::format("GLONASS channel {} outside -7..+6", ch));
      out_.glonass_channels[slot] = ch;
    }
  }

  void read_body() {
    std::string line;
    while (next(line)) {
      if (trim(line).empty()) continue;
      if (line[0] != '>') {
        throw ParseError(ErrorCode::ParseError, line_no_, "expected an epoch line starting with '>'");
      }
      auto num = [&](std::size_t pos, std::size_t len, const char* what) {
        return require_number<int>(columns(line, pos, len), line_no_, ErrorCode::ParseError, what);
      };
      const int year = num(2, 4, "year");
      const int month = num(7, 2, "month");
      const int day = num(10, 2, "day");
      const int hour = num(13, 2, "hour");
      const int minute = num(16, 2, "minute");
      const double sec =
          require_number<double>(columns(line, 18, 11), line_no_, ErrorCode::ParseError, "second");
      const int flag = num(31, 1, "epoch flag");
      const int nsat = num(32, 3, "satellite count");
      if (month < 1 || month > 12 || day < 1 || day > 31 || hour < 0 || hour > 23 ||
          minute < 0 || minute > 59 || sec < 0.0 || sec >= 61.0 || year < 1980 || nsat < 0) {
        throw ParseError(ErrorCode::ParseError, line_no_, "epoch fields out of range");
      }
      if (flag != 0) {
        ++out_.skipped_event_epochs;
        for (int i = 0; i < nsat; ++i) {
          if (!next(line)) throw ParseError(ErrorCode::ParseError, line_no_, "truncated event record");
        }
        continue;
      }
      EpochRecord epoch;
      epoch.time = GnssTime::from_calendar(year, month, day, hour, minute, sec);
      for (int i = 0; i < nsat; ++i) {
        if (!next(line)) throw ParseError(ErrorCode::ParseError, line_no_, "truncated epoch");
        read_satellite(line, epoch);
      }
      out_.epochs.push_back(std::move(epoch));
    }
  }

  Field field(std::string_view line, std::size_t index) const {
    const auto raw = columns(line, 3 + index * kFieldWidth, kFieldWidth);
    Field f;
    const auto value = columns(raw, 0, 14);
    if (!trim(value).empty()) {
      f.value = to_number<double>(value);
      if (!f.value) {
        throw ParseError(ErrorCode::ParseError, line_no_,
                         fmt::format("bad observation value '{}'", trim(value)));
      }
    }
    const auto lli = columns(raw, 14, 1);
    if (!lli.empty() && lli[0] != ' ') {
      if (lli[0] < '0' || lli[0] > '9') {
        throw ParseError(ErrorCode::ParseError, line_no_, fmt::format("bad LLI '{}'", lli));
      }
      f.lli = lli[0] - '0';
    }
    return f;
  }

  void read_satellite(std::string_view line, EpochRecord& epoch) {
    if (line.size() < 3) throw ParseError(ErrorCode::ParseError, line_no_, "short observation line");
    const char letter = line[0];
    const auto types_it = types_.find(letter);
    if (types_it == types_.end()) {
      throw ParseError(ErrorCode::ParseError, line_no_,
                       fmt::format("system '{}' has no SYS / # / OBS TYPES entry", letter));
    }
    if (letter != 'G' && letter != 'R' && letter != 'C') {
      ++out_.skipped_satellites;
      return;
    }
    const int prn = require_number<int>(columns(line, 1, 2), line_no_, ErrorCode::ParseError, "prn");
    std::optional<int> channel;
    if (letter == 'R') {
      auto it = out_.glonass_channels.find(prn);
      if (it == out_.glonass_channels.end()) {
        throw ParseError(ErrorCode::HeaderMalformed, line_no_,
                         fmt::format("no GLONASS SLOT / FRQ # entry for R{:02d}", prn));
      }
      channel = it->second;
    }
    SatId sat;
    try {
      sat = SatId(constellation_from_letter(letter), prn, channel);
    } catch (const Error& e) {
      throw ParseError(ErrorCode::ParseError, line_no_, e.what());
    }

    const auto& types = types_it->second;
    auto pick = [&](const std::vector<std::string>& candidates) -> std::optional<Field> {
      for (const auto& code : candidates) {
        auto it = std::find(types.begin(), types.end(), code);
        if (it == types.end()) continue;
        Field f = field(line, static_cast<std::size_t>(it - types.begin()));
        if (f.value) return f;
      }
      return std::nullopt;
    };

    const FrequencyPair freq = frequencies(sat);
    const std::array<double, 2> lambda{freq.lambda1, freq.lambda2};
    const auto codes = supported_codes(sat.system());
    Observation obs;
    std::array<std::optional<double>*, 2> code{&obs.code1, &obs.code2};
    std::array<std::optional<double>*, 2> phase{&obs.phase1, &obs.phase2};
    std::array<std::optional<double>*, 2> doppler{&obs.doppler1, &obs.doppler2};
    for (std::size_t b = 0; b < 2; ++b) {
      if (auto f = pick(codes[b].code)) *code[b] = f->value;
      if (auto f = pick(codes[b].phase)) {
        *phase[b] = *f->value * lambda[b];
        obs.lock_loss[b] = (f->lli & 1) != 0;
      }
      if (auto f = pick(codes[b].doppler)) *doppler[b] = -*f->value * lambda[b];
    }
    if (auto f = pick(codes[0].snr)) obs.cn0 = f->value;

    if (!obs.code1 && !obs.code2 && !obs.phase1 && !obs.phase2) {
      ++out_.skipped_satellites;
      return;
    }
    if (epoch.find(sat)) {
      throw ParseError(ErrorCode::ParseError, line_no_,
                       fmt::format("duplicate satellite {} in epoch", sat.str()));
    }
    epoch.entries.push_back({sat, obs, {}});
  }

  std::istream& in_;
  std::size_t line_no_ = 0;
  RinexObsData out_;
  std::map<char, std::vector<std::string>> types_;
  std::map<char, std::size_t> counts_;
};

}  // namespace

RinexObsData parse_rinex_obs(std::istream& in) { return Parser(in).run(); }

std::vector<EpochRecord> join_satellite_states(const std::vector<EpochRecord>& epochs,
                                               const std::vector<EpochRecord>& states,
                                               JoinStats* stats) {
  JoinStats local;
  std::vector<const EpochRecord*> sorted;
  sorted.reserve(states.size());
  for (const auto& s : states) sorted.push_back(&s);
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const EpochRecord* a, const EpochRecord* b) { return a->time < b->time; });

  std::vector<EpochRecord> out;
  out.reserve(epochs.size());
  for (const EpochRecord& e : epochs) {
    auto it = std::lower_bound(sorted.begin(), sorted.end(), e.time,
                               [](const EpochRecord* s, const GnssTime& t) { return s->time - t < -1e-6; });
    const EpochRecord* st = (it != sorted.end() && same_epoch((*it)->time, e.time)) ? *it : nullptr;
    EpochRecord joined;
    joined.time = e.time;
    for (const SatEntry& entry : e.entries) {
      const SatEntry* s = st ? st->find(entry.sat) : nullptr;
      if (!s) {
        ++local.dropped;
        continue;
      }
      joined.entries.push_back({entry.sat, entry.obs, s->state});
      ++local.matched;
    }
    out.push_back(std::move(joined));
  }
  if (stats) *stats = local;
  return out;
}

}  // namespace urbanpos::io
