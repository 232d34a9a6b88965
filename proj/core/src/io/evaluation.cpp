#include "urbanpos/io/evaluation.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>
#include <json.hpp>

#include "urbanpos/error.hpp"
#include "urbanpos/geodesy.hpp"

namespace urbanpos::io {

using ojson = nlohmann::ordered_json;

namespace {

constexpr double kJoinTolerance = 5e-4;  // s; CSV time has millisecond resolution
constexpr double kMaxUnmatchedFraction = 0.01;

const TruthRecord* find_truth(const std::vector<TruthRecord>& truth, const GnssTime& t) {
  auto it = std::lower_bound(truth.begin(), truth.end(), t, [](const TruthRecord& r, const GnssTime& x) {
    return r.time - x < -kJoinTolerance;
  });
  if (it != truth.end() && std::abs(it->time - t) <= kJoinTolerance) return &*it;
  return nullptr;
}

struct Series {
  std::size_t epochs = 0;
  std::vector<double> hor, ver;
};

std::optional<ErrorStats> stats_of(const std::vector<double>& v) {
  if (v.empty()) return std::nullopt;
  return error_stats(v);
}

EvaluationReport build(const std::vector<SolutionRow>& rows, const std::vector<TruthRecord>* truth) {
  EvaluationReport rep;
  rep.epochs = rows.size();
  rep.has_truth = truth != nullptr;
  std::vector<TruthRecord> sorted;
  if (truth) {
    sorted = *truth;
    std::sort(sorted.begin(), sorted.end(),
              [](const TruthRecord& a, const TruthRecord& b) { return a.time < b.time; });
  }
  Series all;
  std::map<std::string, Series> modes;
  for (const SolutionRow& r : rows) {
    Series& m = modes[std::string(to_string(r.tag))];
    ++m.epochs;
    if (r.solved()) ++rep.solved;
    if (!truth) continue;
    const TruthRecord* t = find_truth(sorted, r.time);
    if (!t) {
      ++rep.unmatched;
      continue;
    }
    if (!r.solved()) continue;
    const Vec3 e = ecef_to_enu(*r.pos, t->pos);
    const double h = std::hypot(e.x(), e.y());
    const double v = std::abs(e.z());
    all.hor.push_back(h);
    all.ver.push_back(v);
    m.hor.push_back(h);
    m.ver.push_back(v);
  }
  if (truth && !rows.empty() &&
      static_cast<double>(rep.unmatched) > kMaxUnmatchedFraction * static_cast<double>(rows.size())) {
    throw Error(ErrorCode::InvalidArgument,
                fmt::format("time join failed for {} of {} epochs", rep.unmatched, rows.size()));
  }
  rep.availability_pct = rows.empty() ? 0.0 : 100.0 * static_cast<double>(rep.solved) / rows.size();
  rep.horizontal = stats_of(all.hor);
  rep.vertical = stats_of(all.ver);
  for (auto& [tag, s] : modes) {
    ModeStats ms;
    ms.epochs = s.epochs;
    ms.horizontal = stats_of(s.hor);
    ms.vertical = stats_of(s.ver);
    rep.by_mode[tag] = ms;
  }
  return rep;
}

ojson stats_json(const std::optional<ErrorStats>& s) {
  if (!s) return nullptr;
  return {{"rms", s->rms}, {"p95", s->p95}, {"max", s->max}, {"n", s->count}};
}

}  // namespace

ErrorStats error_stats(const std::vector<double>& abs_errors) {
  if (abs_errors.empty()) throw Error(ErrorCode::InvalidArgument, "no samples");
  std::vector<double> v = abs_errors;
  std::sort(v.begin(), v.end());
  double ss = 0.0;
  for (double x : v) ss += x * x;
  ErrorStats s;
  s.count = v.size();
  s.rms = std::sqrt(ss / static_cast<double>(v.size()));
  const auto rank = static_cast<std::size_t>(std::ceil(0.95 * static_cast<double>(v.size())));
  s.p95 = v[std::max<std::size_t>(rank, 1) - 1];
  s.max = v.back();
  return s;
}

EvaluationReport evaluate(const std::vector<SolutionRow>& rows, const std::vector<TruthRecord>& truth) {
  return build(rows, &truth);
}

EvaluationReport evaluate(const std::vector<SolutionRow>& rows) { return build(rows, nullptr); }

std::string report_to_json(const EvaluationReport& r) {
  ojson j;
  j["epochs"] = r.epochs;
  j["solved"] = r.solved;
  j["availability_pct"] = r.availability_pct;
  if (r.has_truth) {
    j["unmatched"] = r.unmatched;
    j["horizontal"] = stats_json(r.horizontal);
    j["vertical"] = stats_json(r.vertical);
  }
  ojson modes = ojson::object();
  for (const auto& [tag, m] : r.by_mode) {
    ojson o;
    o["epochs"] = m.epochs;
    o["share_pct"] = r.epochs ? 100.0 * static_cast<double>(m.epochs) / r.epochs : 0.0;
    if (r.has_truth) {
      o["horizontal"] = stats_json(m.horizontal);
      o["vertical"] = stats_json(m.vertical);
    }
    modes[tag] = std::move(o);
  }
  j["by_mode"] = std::move(modes);
  return j.dump(2);
}

std::string track_geojson(const std::vector<SolutionRow>& rows, const std::vector<TruthRecord>& truth) {
  auto point = [](const Vec3& ecef) {
    const Geodetic g = ecef_to_geodetic(ecef);
    return ojson::array({g.lon / kDeg, g.lat / kDeg, g.height});
  };
  ojson est = ojson::array();
  for (const auto& r : rows) {
    if (r.solved()) est.push_back(point(*r.pos));
  }
  ojson tru = ojson::array();
  for (const auto& t : truth) tru.push_back(point(t.pos));
  auto feature = [](const char* name, ojson coords) {
    return ojson{{"type", "Feature"},
                 {"properties", {{"name", name}}},
                 {"geometry", {{"type", "LineString"}, {"coordinates", std::move(coords)}}}};
  };
  ojson fc{{"type", "FeatureCollection"},
           {"features", ojson::array({feature("estimated", std::move(est)), feature("truth", std::move(tru))})}};
  return fc.dump();
}

}  // namespace urbanpos::io
