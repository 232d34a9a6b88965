#include <algorithm>
#include <random>

#include <fmt/format.h>

#include "urbanpos/error.hpp"
#include "urbanpos/scenario.hpp"

namespace urbanpos {

namespace {

constexpr double kSpeed = 6.0;  // m/s

ScenarioConfig base(std::string name, double duration, std::uint64_t seed) {
  ScenarioConfig c;
  c.name = std::move(name);
  c.duration = duration;
  c.rate = 1.0;
  c.seed = seed;
  c.constellations = default_constellations();
  c.inter_system_offsets[Constellation::Glonass] = {20.0, 0.0};
  c.inter_system_offsets[Constellation::BeiDou] = {100.0, 0.0};
  c.trajectory = {{Vec3(0.0, 0.0, 0.0), kSpeed}, {Vec3(kSpeed * duration, 0.0, 0.0), 0.0}};
  return c;
}

// Building mask of an east-west street: low towards the street ends, high
// across it.
std::vector<std::pair<double, double>> street_mask(double along_el, double cross_el,
                                                   double half_opening) {
  return {{0.0, cross_el},
          {90.0 - half_opening, cross_el},
          {90.0, along_el},
          {90.0 + half_opening, cross_el},
          {270.0 - half_opening, cross_el},
          {270.0, along_el},
          {270.0 + half_opening, cross_el}};
}

// Satellites the rover sees at time t under the configured mask.
std::vector<SatId> visible_at(const Simulator& sim, double t) {
  std::vector<SatId> out;
  const Vec3 rover = sim.rover_position(t);
  for (const auto& [sat, st] : sim.satellites(t)) {
    const auto ea = elevation_azimuth(rover, st.pos);
    if (ea.el >= sim.mask_elevation(t, ea.az)) out.push_back(sat);
  }
  return out;
}

// Multipath events inside [start, end) for a random subset of the
// satellites visible through the block.
void add_block_events(ScenarioConfig& c, const Simulator& sim, double start, double end,
                      std::mt19937_64& rng, double fraction, double big_fraction) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double len = end - start;
  if (len < 8.0) return;
  const auto a = visible_at(sim, start + 1.0);
  const auto b = visible_at(sim, end - 1.0);
  for (const SatId& sat : a) {
    if (std::find(b.begin(), b.end(), sat) == b.end()) continue;
    if (u(rng) >= fraction) continue;
    MultipathEvent ev;
    ev.sat = sat;
    ev.start = std::floor(start + 2.0 + u(rng) * 0.3 * len);
    ev.end = std::floor(end - 1.0 - u(rng) * 0.2 * len);
    if (ev.end - ev.start < 3.0) continue;
    const double p = u(rng);
    if (p < 0.4) {
      ev.profile = MultipathProfile::Step;
    } else if (p < 0.7) {
      ev.profile = MultipathProfile::Ramp;
    } else {
      ev.profile = MultipathProfile::RandomWalk;
    }
    if (ev.profile == MultipathProfile::RandomWalk) {
      ev.magnitude = 5.0 + 25.0 * u(rng);
    } else if (u(rng) < big_fraction) {
      ev.magnitude = 150.0 + 50.0 * u(rng);
    } else {
      ev.magnitude = 5.0 + 45.0 * u(rng);
    }
    c.multipath_events.push_back(ev);
  }
}

ScenarioConfig open_sky(std::uint64_t seed) { return base("open-sky", 300.0, seed); }

ScenarioConfig boulevard(std::uint64_t seed) {
  ScenarioConfig c = base("boulevard", 600.0, seed);
  c.canyon_mask.push_back(
      {0.0, c.duration, {{0.0, 50.0}, {80.0, 50.0}, {100.0, 10.0}, {260.0, 10.0}, {280.0, 50.0}}});
  const Simulator sim(c);
  std::mt19937_64 rng(seed);
  add_block_events(c, sim, 60.0, 540.0, rng, 0.3, 0.0);
  return c;
}

ScenarioConfig teheran_like(std::uint64_t seed) {
  ScenarioConfig c = base("teheran-like", 1800.0, seed);
  constexpr double kCanyonStart = 150.0;
  constexpr double kCanyonEnd = 1650.0;
  constexpr double kCrossing = 5.0;  // s spent inside an intersection
  std::mt19937_64 rng(seed ^ 0x7e4e7a17ULL);
  std::uniform_real_distribution<double> spacing(200.0 / kSpeed, 400.0 / kSpeed);

  const auto street = street_mask(25.0, 52.0, 25.0);
  const std::vector<std::pair<double, double>> crossing = {{0.0, 15.0}};
  std::vector<std::pair<double, double>> blocks;
  double t = kCanyonStart;
  while (t < kCanyonEnd) {
    const double next = std::min(kCanyonEnd, std::floor(t + spacing(rng)));
    blocks.emplace_back(t, next);
    c.canyon_mask.push_back({t, next, street});
    if (next + kCrossing < kCanyonEnd) c.canyon_mask.push_back({next, next + kCrossing, crossing});
    t = next + kCrossing;
  }

  const Simulator sim(c);
  for (const auto& [a, b] : blocks) add_block_events(c, sim, a, b, rng, 0.45, 0.15);
  return c;
}

}  // namespace

std::vector<std::string> preset_names() { return {"open-sky", "boulevard", "teheran-like"}; }

ScenarioConfig preset(std::string_view name, std::uint64_t seed) {
  if (name == "open-sky") return open_sky(seed);
  if (name == "boulevard") return boulevard(seed);
  if (name == "teheran-like") return teheran_like(seed);
  throw Error(ErrorCode::InvalidArgument, fmt::format("unknown preset '{}'", name));
}

}  // namespace urbanpos
