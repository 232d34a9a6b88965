#include "urbanpos/io/pipeline_config.hpp"

#include <cmath>
#include <set>

#include <fmt/format.h>
#include <json.hpp>

#include "urbanpos/error.hpp"

namespace urbanpos::io {

using nlohmann::json;
using ojson = nlohmann::ordered_json;

namespace {

[[noreturn]] void invalid(const std::string& msg) { throw Error(ErrorCode::ConfigInvalid, msg); }

void only_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) invalid(where + ": expected an object");
  for (const auto& [k, v] : j.items()) {
    if (!allowed.count(k)) invalid(fmt::format("{}: unknown key '{}'", where, k));
  }
}

void read(const json& j, const char* key, double& out, const std::string& where) {
  if (!j.contains(key)) return;
  if (!j[key].is_number()) invalid(fmt::format("{}.{}: expected a number", where, key));
  out = j[key].get<double>();
}

void read(const json& j, const char* key, int& out, const std::string& where) {
  if (!j.contains(key)) return;
  if (!j[key].is_number_integer()) invalid(fmt::format("{}.{}: expected an integer", where, key));
  out = j[key].get<int>();
}

}  // namespace

PipelineConfig parse_pipeline_config(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    invalid(fmt::format("invalid JSON ({})", e.what()));
  }
  only_keys(j, {"filter", "position", "alpha", "consistency_check", "known_start"}, "pipeline");
  PipelineConfig cfg;
  if (j.contains("filter")) {
    const json& f = j["filter"];
    only_keys(f,
              {"sigma_dcmc_carrier", "sigma_dcmc_doppler", "slip_threshold_rate", "stale_gap",
               "elevation_cutoff_deg"},
              "filter");
    read(f, "sigma_dcmc_carrier", cfg.filter.sigma_dcmc_carrier, "filter");
    read(f, "sigma_dcmc_doppler", cfg.filter.sigma_dcmc_doppler, "filter");
    read(f, "slip_threshold_rate", cfg.filter.slip_threshold_rate, "filter");
    read(f, "stale_gap", cfg.filter.stale_gap, "filter");
    read(f, "elevation_cutoff_deg", cfg.filter.elevation_cutoff_deg, "filter");
  }
  if (j.contains("position")) {
    const json& p = j["position"];
    only_keys(p, {"convergence_m", "max_iterations", "max_condition", "elevation_cutoff_deg"},
              "position");
    read(p, "convergence_m", cfg.position.convergence_m, "position");
    read(p, "max_iterations", cfg.position.max_iterations, "position");
    read(p, "max_condition", cfg.position.max_condition, "position");
    read(p, "elevation_cutoff_deg", cfg.position.elevation_cutoff_deg, "position");
  }
  read(j, "alpha", cfg.alpha, "pipeline");
  if (j.contains("consistency_check")) {
    if (!j["consistency_check"].is_boolean()) invalid("pipeline.consistency_check: expected a boolean");
    cfg.consistency_check = j["consistency_check"].get<bool>();
  }
  if (j.contains("known_start") && !j["known_start"].is_null()) {
    const json& k = j["known_start"];
    only_keys(k, {"pos", "sigma"}, "known_start");
    if (!k.contains("pos") || !k["pos"].is_array() || k["pos"].size() != 3) {
      invalid("known_start.pos: expected [x, y, z]");
    }
    KnownStart ks;
    for (int i = 0; i < 3; ++i) {
      if (!k["pos"][i].is_number()) invalid("known_start.pos: expected numbers");
      ks.pos(i) = k["pos"][i].get<double>();
    }
    double sigma = 0.1;
    read(k, "sigma", sigma, "known_start");
    if (!(sigma > 0.0)) invalid("known_start.sigma: must be > 0");
    ks.cov = Mat3::Identity() * sigma * sigma;
    cfg.known_start = ks;
  }
  cfg.validate();
  return cfg;
}

std::string dump_pipeline_config(const PipelineConfig& cfg) {
  ojson j;
  j["filter"] = {{"sigma_dcmc_carrier", cfg.filter.sigma_dcmc_carrier},
                 {"sigma_dcmc_doppler", cfg.filter.sigma_dcmc_doppler},
                 {"slip_threshold_rate", cfg.filter.slip_threshold_rate},
                 {"stale_gap", cfg.filter.stale_gap},
                 {"elevation_cutoff_deg", cfg.filter.elevation_cutoff_deg}};
  j["position"] = {{"convergence_m", cfg.position.convergence_m},
                   {"max_iterations", cfg.position.max_iterations},
                   {"max_condition", cfg.position.max_condition},
                   {"elevation_cutoff_deg", cfg.position.elevation_cutoff_deg}};
  j["alpha"] = cfg.alpha;
  j["consistency_check"] = cfg.consistency_check;
  if (cfg.known_start) {
    const auto& ks = *cfg.known_start;
    j["known_start"] = {{"pos", {ks.pos.x(), ks.pos.y(), ks.pos.z()}},
                        {"sigma", std::sqrt(ks.cov.trace() / 3.0)}};
  }
  return j.dump(2);
}

}  // namespace urbanpos::io
