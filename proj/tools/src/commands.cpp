#include "urbanpos_cli/commands.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include "urbanpos/error.hpp"
#include "urbanpos/geodesy.hpp"
#include "urbanpos/io/evaluation.hpp"
#include "urbanpos/io/jsonl.hpp"
#include "urbanpos/io/pipeline_config.hpp"
#include "urbanpos/io/rinex.hpp"
#include "urbanpos/io/solution_csv.hpp"
#include "urbanpos/mode_switch.hpp"
#include "urbanpos/scenario.hpp"

namespace urbanpos::cli {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace {

// Input problems: unreadable files, bad formats, failed joins.
struct InputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError(fmt::format("cannot open '{}'", path));
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError(fmt::format("cannot open '{}'", path));
  return in;
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError(fmt::format("cannot write '{}'", path.string()));
  return out;
}

template <typename T, typename F>
std::vector<T> read_file(const std::string& path, F reader) {
  auto in = open_in(path);
  return reader(in);
}

// --------------------------------------------------------------- simulate

struct SimulateArgs {
  std::string config;
  std::string out_dir;
  std::string preset;
  std::optional<std::uint64_t> seed;
};

int simulate(const SimulateArgs& a, std::ostream& out) {
  ScenarioConfig cfg;
  if (!a.preset.empty()) {
    cfg = preset(a.preset, a.seed.value_or(1));
    if (!a.config.empty()) {
      cfg = parse_scenario_config(merge_patch_json(dump_scenario_config(cfg), slurp(a.config)));
    }
  } else if (!a.config.empty()) {
    cfg = parse_scenario_config(slurp(a.config));
  } else {
    throw CLI::ValidationError("simulate", "one of --config or --preset is required");
  }
  if (a.seed) cfg.seed = *a.seed;
  cfg.validate();

  const ScenarioRun run = run_scenario(cfg);
  fs::create_directories(a.out_dir);
  const fs::path dir(a.out_dir);
  {
    auto f = open_out(dir / "rover.jsonl");
    io::write_epochs(f, run.rover);
  }
  {
    auto f = open_out(dir / "ref.jsonl");
    io::write_epochs(f, run.ref);
  }
  {
    auto f = open_out(dir / "truth.jsonl");
    io::write_truth(f, run.truth);
  }
  {
    auto f = open_out(dir / "prc.jsonl");
    io::write_prc(f, run.prc);
  }

  const Vec3 start = run.truth.empty() ? Vec3::Zero() : run.truth.front().pos;
  ojson lock;
  lock["config"] = ojson::parse(dump_scenario_config(cfg));
  lock["seed"] = cfg.seed;
  lock["epochs"] = run.rover.size();
  const VisibilityStats& v = run.visibility;
  lock["visibility"] = {{"mean_gps", v.mean_gps},         {"mean_glonass", v.mean_glonass},
                        {"mean_beidou", v.mean_beidou},   {"mean_total", v.mean_total},
                        {"min_total", v.min_total},       {"max_total", v.max_total}};
  lock["rover_start_ecef"] = {start.x(), start.y(), start.z()};
  {
    auto f = open_out(dir / "scenario.lock.json");
    f << lock.dump(2) << '\n';
  }

  // Pipeline settings for `solve`, seeded with the surveyed start point.
  PipelineConfig pc;
  pc.known_start = KnownStart{start, Mat3::Identity() * 0.01};
  {
    auto f = open_out(dir / "pipeline.json");
    f << io::dump_pipeline_config(pc) << '\n';
  }
  out << fmt::format("simulated {} epochs of '{}' into {} (mean visible {:.2f}: G {:.2f} R {:.2f} C {:.2f})\n",
                     run.rover.size(), cfg.name, a.out_dir, v.mean_total, v.mean_gps, v.mean_glonass,
                     v.mean_beidou);
  return kOk;
}

// ------------------------------------------------------------------ solve

struct SolveArgs {
  std::string obs;
  std::string prc;
  std::string config;
  std::string truth;
  std::string out;
  std::string report;
  std::string known_start;
  std::string satstate;
};

KnownStart parse_known_start(const std::string& text) {
  std::vector<double> v;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      v.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw CLI::ValidationError("--known-start", fmt::format("bad number '{}'", item));
    }
  }
  if (v.size() != 3 && v.size() != 4) {
    throw CLI::ValidationError("--known-start", "expected x,y,z[,sigma]");
  }
  const double sigma = v.size() == 4 ? v[3] : 0.1;
  if (!(sigma > 0.0)) throw CLI::ValidationError("--known-start", "sigma must be > 0");
  return {Vec3(v[0], v[1], v[2]), Mat3::Identity() * sigma * sigma};
}

std::vector<EpochRecord> load_observations(const SolveArgs& a, std::ostream& err) {
  std::string text = a.obs == "-" ? std::string(std::istreambuf_iterator<char>(std::cin), {}) : slurp(a.obs);
  const auto first = text.find_first_not_of(" \t\r\n");
  std::istringstream in(text);
  if (first == std::string::npos || text[first] == '{') return io::read_epochs(in);
  if (a.satstate.empty()) {
    throw CLI::ValidationError("--satstate", "RINEX observations need a satellite-state sidecar");
  }
  const io::RinexObsData rinex = io::parse_rinex_obs(in);
  const auto states = read_file<EpochRecord>(a.satstate, io::read_epochs);
  io::JoinStats js;
  auto epochs = io::join_satellite_states(rinex.epochs, states, &js);
  if (rinex.skipped_event_epochs || js.dropped || rinex.skipped_satellites) {
    err << fmt::format("warning: skipped {} event epochs, {} unsupported satellites, {} satellites without state\n",
                       rinex.skipped_event_epochs, rinex.skipped_satellites, js.dropped);
  }
  return epochs;
}

int solve(const SolveArgs& a, std::ostream& out, std::ostream& err) {
  PipelineConfig cfg;
  if (!a.config.empty()) cfg = io::parse_pipeline_config(slurp(a.config));
  if (!a.known_start.empty()) cfg.known_start = parse_known_start(a.known_start);

  const auto epochs = load_observations(a, err);
  std::vector<PrcEpoch> prc;
  if (!a.prc.empty()) prc = read_file<PrcEpoch>(a.prc, io::read_prc);
  std::sort(prc.begin(), prc.end(), [](const PrcEpoch& x, const PrcEpoch& y) { return x.time < y.time; });
  std::optional<std::vector<TruthRecord>> truth;
  if (!a.truth.empty()) {
    truth = read_file<TruthRecord>(a.truth, io::read_truth);
    std::sort(truth->begin(), truth->end(),
              [](const TruthRecord& x, const TruthRecord& y) { return x.time < y.time; });
  }

  auto csv = open_out(a.out);
  io::write_solution_header(csv);
  std::vector<io::SolutionRow> rows;
  rows.reserve(epochs.size());
  PipelineState state;
  const std::vector<PseudorangeCorrection> none;
  std::size_t t_idx = 0;
  for (const EpochRecord& e : epochs) {
    const PrcEpoch* p = find_prc(prc, e.time);
    const EpochOutput o = process_epoch(state, e, p ? p->corrections : none, cfg);
    const TruthRecord* tr = nullptr;
    if (truth) {
      while (t_idx < truth->size() && (*truth)[t_idx].time - e.time < -1e-6) ++t_idx;
      if (t_idx < truth->size() && same_epoch((*truth)[t_idx].time, e.time)) tr = &(*truth)[t_idx];
    }
    rows.push_back(io::make_solution_row(o, tr));
    io::write_solution_row(csv, rows.back());
  }
  csv.close();

  const io::EvaluationReport rep = truth ? io::evaluate(rows, *truth) : io::evaluate(rows);
  if (!a.report.empty()) {
    auto f = open_out(a.report);
    f << io::report_to_json(rep) << '\n';
  }
  out << fmt::format("{} epochs, availability {:.1f}%", rep.epochs, rep.availability_pct);
  if (rep.horizontal) {
    out << fmt::format(", horizontal rms {:.3f} m p95 {:.3f} m max {:.3f} m", rep.horizontal->rms,
                       rep.horizontal->p95, rep.horizontal->max);
  }
  out << '\n';
  if (rep.solved == 0) {
    err << "no epoch produced a position\n";
    return kEmpty;
  }
  return kOk;
}

// --------------------------------------------------------------- evaluate

struct EvaluateArgs {
  std::string solution;
  std::string truth;
  std::string out;
  std::string geojson;
};

int evaluate_cmd(const EvaluateArgs& a, std::ostream& out) {
  const auto rows = read_file<io::SolutionRow>(a.solution, io::read_solution_csv);
  auto truth = read_file<TruthRecord>(a.truth, io::read_truth);
  std::sort(truth.begin(), truth.end(), [](const TruthRecord& x, const TruthRecord& y) { return x.time < y.time; });
  io::EvaluationReport rep;
  try {
    rep = io::evaluate(rows, truth);
  } catch (const Error& e) {
    throw InputError(e.what());
  }
  {
    auto f = open_out(a.out);
    f << io::report_to_json(rep) << '\n';
  }
  if (!a.geojson.empty()) {
    auto f = open_out(a.geojson);
    f << io::track_geojson(rows, truth) << '\n';
  }
  out << fmt::format("{} epochs, availability {:.1f}%", rep.epochs, rep.availability_pct);
  if (rep.horizontal) out << fmt::format(", horizontal rms {:.3f} m", rep.horizontal->rms);
  out << '\n';
  return kOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Urban-canyon multi-GNSS positioning with code multipath estimation", "urbanpos"};
  app.require_subcommand(1);

  SimulateArgs sim;
  std::uint64_t seed = 1;
  auto* simulate_cmd = app.add_subcommand("simulate", "Render a synthetic scenario to JSONL");
  simulate_cmd->add_option("--config", sim.config, "Scenario JSON (merge patch over --preset)");
  simulate_cmd->add_option("--out-dir", sim.out_dir, "Output directory")->required();
  simulate_cmd->add_option("--preset", sim.preset, "Named scenario")
      ->check(CLI::IsMember(preset_names()));
  auto* seed_opt = simulate_cmd->add_option("--seed", seed, "Random seed");

  SolveArgs sol;
  auto* solve_cmd = app.add_subcommand("solve", "Run the positioning pipeline over an observation stream");
  solve_cmd->add_option("--obs", sol.obs, "Observations: JSONL, RINEX 3, or - for stdin")->required();
  solve_cmd->add_option("--prc", sol.prc, "Pseudorange corrections JSONL");
  solve_cmd->add_option("--config", sol.config, "Pipeline JSON");
  solve_cmd->add_option("--truth", sol.truth, "Truth JSONL for error columns");
  solve_cmd->add_option("--out", sol.out, "Solution CSV")->required();
  solve_cmd->add_option("--report", sol.report, "Statistics JSON");
  solve_cmd->add_option("--known-start", sol.known_start, "Surveyed start x,y,z[,sigma] (ECEF m)");
  solve_cmd->add_option("--satstate", sol.satstate, "Satellite-state JSONL for RINEX input");

  EvaluateArgs ev;
  auto* eval_cmd = app.add_subcommand("evaluate", "Error statistics of a solution CSV against truth");
  eval_cmd->add_option("--solution", ev.solution, "Solution CSV")->required();
  eval_cmd->add_option("--truth", ev.truth, "Truth JSONL")->required();
  eval_cmd->add_option("--out", ev.out, "Statistics JSON")->required();
  eval_cmd->add_option("--geojson", ev.geojson, "Estimated and true tracks");

  try {
    app.parse(argc, argv);
    if (seed_opt->count() > 0) sim.seed = seed;
    if (app.got_subcommand(simulate_cmd)) return simulate(sim, out);
    if (app.got_subcommand(solve_cmd)) return solve(sol, out, err);
    return evaluate_cmd(ev, out);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::Error& e) {
    app.exit(e, out, err);
    return kUsage;
  } catch (const InputError& e) {
    err << "error: " << e.what() << '\n';
    return kInput;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return e.code() == ErrorCode::InvalidArgument ? kUsage : kInput;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kInput;
  }
}

}  // namespace urbanpos::cli
