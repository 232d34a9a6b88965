#include "urbanpos/io/solution_csv.hpp"

#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>

#include <fmt/format.h>

#include "urbanpos/error.hpp"
#include "urbanpos/geodesy.hpp"

namespace urbanpos::io {

std::string_view to_string(SolutionTag t) {
  switch (t) {
    case SolutionTag::Boot: return "BOOT";
    case SolutionTag::SM: return "SM";
    case SolutionTag::MF: return "MF";
    case SolutionTag::Out: return "OUT";
  }
  return "OUT";
}

SolutionTag solution_tag_from_string(std::string_view s) {
  if (s == "BOOT") return SolutionTag::Boot;
  if (s == "SM") return SolutionTag::SM;
  if (s == "MF") return SolutionTag::MF;
  if (s == "OUT") return SolutionTag::Out;
  throw Error(ErrorCode::InvalidArgument, fmt::format("unknown solution mode '{}'", s));
}

SolutionRow make_solution_row(const EpochOutput& out, const TruthRecord* truth) {
  SolutionRow row;
  row.time = out.time;
  const PositionSolution& s = out.solution;
  switch (s.mode) {
    case SolutionMode::SM: row.tag = SolutionTag::SM; break;
    case SolutionMode::MF:
    case SolutionMode::DgnssOnly: row.tag = SolutionTag::MF; break;
    case SolutionMode::Outage:
      row.tag = out.mode_after == PipelineMode::Bootstrap ? SolutionTag::Boot : SolutionTag::Out;
      break;
  }
  if (out.test) {
    row.wsse = out.test->wsse;
    row.dof = out.test->dof;
  }
  row.t_d = out.t_d;
  if (!row.solved()) return row;
  row.pos = s.pos;
  for (std::size_t i = 0; i < s.clock_systems.size() && i < static_cast<std::size_t>(s.clock.size()); ++i) {
    row.clocks.emplace_back(s.clock_systems[i], s.clock(static_cast<Eigen::Index>(i)));
  }
  row.n_sats = static_cast<int>(s.used_sats.size());
  if (s.cov.rows() >= 3) row.sigma_pos = std::sqrt(std::max(0.0, s.pos_cov().trace()));
  if (truth) row.enu_err = ecef_to_enu(s.pos, truth->pos);
  return row;
}

namespace {

template <typename T>
std::string opt(const std::optional<T>& v, const char* f) {
  return v ? fmt::format(fmt::runtime(f), *v) : std::string();
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.push_back(s.substr(start, pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

template <typename T>
std::optional<T> number(std::string_view s, std::size_t line_no, const char* what) {
  if (s.empty()) return std::nullopt;
  T v{};
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) {
    throw ParseError(ErrorCode::ParseError, line_no, fmt::format("bad {} '{}'", what, s));
  }
  return v;
}

}  // namespace

void write_solution_header(std::ostream& out) { out << kSolutionCsvHeader << '\n'; }

void write_solution_row(std::ostream& out, const SolutionRow& r) {
  std::string clocks;
  for (const auto& [sys, v] : r.clocks) {
    if (!clocks.empty()) clocks += ';';
    clocks += fmt::format("{}:{:.4f}", system_letter(sys), v);
  }
  out << fmt::format("{},{:.3f},{},{},{},{},{},{},{},{},{},{},{},{},{}\n", r.time.week, r.time.sow,
                     to_string(r.tag), r.pos ? fmt::format("{:.4f}", r.pos->x()) : "",
                     r.pos ? fmt::format("{:.4f}", r.pos->y()) : "",
                     r.pos ? fmt::format("{:.4f}", r.pos->z()) : "",
                     r.enu_err ? fmt::format("{:.4f}", r.enu_err->x()) : "",
                     r.enu_err ? fmt::format("{:.4f}", r.enu_err->y()) : "",
                     r.enu_err ? fmt::format("{:.4f}", r.enu_err->z()) : "", clocks,
                     opt(r.wsse, "{:.4f}"), opt(r.dof, "{}"), opt(r.t_d, "{:.4f}"), r.n_sats,
                     opt(r.sigma_pos, "{:.4f}"));
}

void write_solution_csv(std::ostream& out, const std::vector<SolutionRow>& rows) {
  write_solution_header(out);
  for (const auto& r : rows) write_solution_row(out, r);
}

std::vector<SolutionRow> read_solution_csv(std::istream& in) {
  std::vector<SolutionRow> rows;
  std::string line;
  std::size_t n = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++n;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (!header) {
      if (line != kSolutionCsvHeader) throw ParseError(ErrorCode::ParseError, n, "unexpected CSV header");
      header = true;
      continue;
    }
    const auto f = split(line, ',');
    if (f.size() != 15) {
      throw ParseError(ErrorCode::ParseError, n, fmt::format("expected 15 columns, got {}", f.size()));
    }
    SolutionRow r;
    const auto week = number<int>(f[0], n, "week");
    const auto sow = number<double>(f[1], n, "sow");
    if (!week || !sow) throw ParseError(ErrorCode::ParseError, n, "missing time");
    r.time = GnssTime::normalized(*week, *sow);
    try {
      r.tag = solution_tag_from_string(f[2]);
    } catch (const Error& e) {
      throw ParseError(ErrorCode::ParseError, n, e.what());
    }
    auto vec = [&](std::size_t i, const char* what) -> std::optional<Vec3> {
      const auto a = number<double>(f[i], n, what);
      const auto b = number<double>(f[i + 1], n, what);
      const auto c = number<double>(f[i + 2], n, what);
      if (!a && !b && !c) return std::nullopt;
      if (!a || !b || !c) throw ParseError(ErrorCode::ParseError, n, fmt::format("partial {}", what));
      return Vec3(*a, *b, *c);
    };
    r.pos = vec(3, "position");
    r.enu_err = vec(6, "ENU error");
    if (!f[9].empty()) {
      for (auto item : split(f[9], ';')) {
        if (item.size() < 3 || item[1] != ':') throw ParseError(ErrorCode::ParseError, n, "bad clock entry");
        try {
          r.clocks.emplace_back(constellation_from_letter(item[0]), *number<double>(item.substr(2), n, "clock"));
        } catch (const ParseError&) {
          throw;
        } catch (const std::exception& e) {
          throw ParseError(ErrorCode::ParseError, n, e.what());
        }
      }
    }
    r.wsse = number<double>(f[10], n, "wsse");
    r.dof = number<int>(f[11], n, "dof");
    r.t_d = number<double>(f[12], n, "t_d");
    r.n_sats = number<int>(f[13], n, "n_sats").value_or(0);
    r.sigma_pos = number<double>(f[14], n, "sigma_pos");
    if (r.solved() && !r.pos) throw ParseError(ErrorCode::ParseError, n, "solved row without a position");
    if (!rows.empty() && !(rows.back().time < r.time)) {
      throw ParseError(ErrorCode::ParseError, n, "time not increasing");
    }
    rows.push_back(std::move(r));
  }
  if (!header) throw ParseError(ErrorCode::ParseError, n + 1, "missing CSV header");
  return rows;
}

}  // namespace urbanpos::io
