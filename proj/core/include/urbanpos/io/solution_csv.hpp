#pragma once

// Per-epoch solution rows and their CSV form.

#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "urbanpos/mode_switch.hpp"
#include "urbanpos/scenario.hpp"

namespace urbanpos::io {

enum class SolutionTag { Boot, SM, MF, Out };

std::string_view to_string(SolutionTag t);
SolutionTag solution_tag_from_string(std::string_view s);

struct SolutionRow {
  GnssTime time;
  SolutionTag tag = SolutionTag::Out;
  std::optional<Vec3> pos;      // ECEF
  std::optional<Vec3> enu_err;  // estimate minus truth
  std::vector<std::pair<Constellation, double>> clocks;
  std::optional<double> wsse;   // DGNSS residual test
  std::optional<int> dof;
  std::optional<double> t_d;
  int n_sats = 0;
  std::optional<double> sigma_pos;  // sqrt(trace) of the position covariance

  bool solved() const { return tag == SolutionTag::SM || tag == SolutionTag::MF; }
};

SolutionRow make_solution_row(const EpochOutput& out, const TruthRecord* truth = nullptr);

inline constexpr std::string_view kSolutionCsvHeader =
    "week,sow,mode,x,y,z,east_err,north_err,up_err,clocks,wsse,dof,t_d,n_sats,sigma_pos";

void write_solution_header(std::ostream& out);
void write_solution_row(std::ostream& out, const SolutionRow& row);
void write_solution_csv(std::ostream& out, const std::vector<SolutionRow>& rows);
/// Throws ParseError with the line number on malformed rows.
std::vector<SolutionRow> read_solution_csv(std::istream& in);

}  // namespace urbanpos::io
