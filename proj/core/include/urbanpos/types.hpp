#pragma once

#include <Eigen/Core>

#include <array>
#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "urbanpos/time.hpp"

namespace urbanpos {

inline constexpr double kSpeedOfLight = 299792458.0;  // m/s

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;

enum class Constellation : std::uint8_t { Gps, Glonass, BeiDou };

inline constexpr std::array<Constellation, 3> kAllConstellations = {
    Constellation::Gps, Constellation::Glonass, Constellation::BeiDou};

/// RINEX system letter: G, R or C.
char system_letter(Constellation c);
Constellation constellation_from_letter(char letter);

/// Satellite identity. Two ids compare equal when system and PRN match; the
/// GLONASS frequency channel is an attribute, not part of the key.
class SatId {
 public:
  SatId() = default;
  /// Throws Error(InvalidSatId) when the channel/constellation pairing is
  /// inconsistent or the channel is outside -7..+6.
  SatId(Constellation system, int prn, std::optional<int> glonass_channel = std::nullopt);

  static SatId gps(int prn) { return {Constellation::Gps, prn}; }
  static SatId beidou(int prn) { return {Constellation::BeiDou, prn}; }
  static SatId glonass(int prn, int channel) { return {Constellation::Glonass, prn, channel}; }
  /// Parses "G05"; GLONASS ids need the channel supplied separately.
  static SatId parse(std::string_view text, std::optional<int> glonass_channel = std::nullopt);

  Constellation system() const { return system_; }
  int prn() const { return prn_; }
  const std::optional<int>& glonass_channel() const { return channel_; }

  std::string str() const;

  friend bool operator==(const SatId& a, const SatId& b) {
    return a.system_ == b.system_ && a.prn_ == b.prn_;
  }
  friend std::strong_ordering operator<=>(const SatId& a, const SatId& b) {
    if (auto c = a.system_ <=> b.system_; c != 0) return c;
    return a.prn_ <=> b.prn_;
  }

 private:
  Constellation system_ = Constellation::Gps;
  int prn_ = 0;
  std::optional<int> channel_;
};

/// Carrier frequencies of the two bands used for ionosphere-free processing.
struct FrequencyPair {
  double f1 = 0.0;       // Hz
  double f2 = 0.0;       // Hz
  double gamma = 0.0;    // (f1/f2)^2
  double lambda1 = 0.0;  // m
  double lambda2 = 0.0;  // m

  static FrequencyPair from_hz(double f1, double f2);
};

/// GPS L1/L2, GLONASS G1/G2 (FDMA channel dependent), BeiDou B1I/B2I.
FrequencyPair frequencies(const SatId& sat);

inline constexpr double kMinPseudorange = 1.0e7;
inline constexpr double kMaxPseudorange = 5.0e7;

/// Raw observables of one satellite at one epoch, all in range units:
/// phases are cycles times wavelength, Doppler is range-rate with
/// positive meaning range increasing.
struct Observation {
  std::optional<double> code1, code2;
  std::optional<double> phase1, phase2;
  std::optional<double> doppler1, doppler2;
  std::optional<double> cn0;
  std::array<bool, 2> lock_loss{false, false};

  /// Pseudoranges present and inside the (1e7, 5e7) m sanity window.
  bool has_codes() const;
  bool has_phases() const { return phase1.has_value() && phase2.has_value(); }
  bool has_dopplers() const { return doppler1.has_value() && doppler2.has_value(); }
  /// Both bands carry code and phase.
  bool dual_frequency_valid() const { return has_codes() && has_phases(); }

  friend bool operator==(const Observation&, const Observation&) = default;
};

struct SatelliteState {
  Vec3 pos = Vec3::Zero();  // ECEF m
  Vec3 vel = Vec3::Zero();  // ECEF m/s
  double clock_bias = 0.0;  // m, ionosphere-free satellite clock
  double clock_drift = 0.0; // m/s

  bool plausible() const;  // |pos| within the MEO/IGSO/GEO band
};

struct SatEntry {
  SatId sat;
  Observation obs;
  SatelliteState state;
};

struct EpochRecord {
  GnssTime time;
  std::vector<SatEntry> entries;

  const SatEntry* find(const SatId& sat) const;
  /// Appends an entry; throws Error(InvalidArgument) on a duplicate SatId.
  void add(SatEntry entry);
};

}  // namespace urbanpos
