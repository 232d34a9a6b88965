#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace urbanpos {

enum class ErrorCode {
  InvalidArgument,
  InvalidSatId,
  MissingDualFrequency,
  NoTrustedPosition,
  SlippedTrack,
  StaleTrack,
  DegenerateGeometry,
  LowElevation,
  Underdetermined,
  SingularGeometry,
  NoConvergence,
  InsufficientSatellites,
  InsufficientTracks,
  InvalidDof,
  NonPsdCovariance,
  MissingObservable,
  ConfigInvalid,
  ParseError,
  HeaderMalformed,
  UnsupportedVersion,
};

std::string_view to_string(ErrorCode code);

/// Exception carrying a machine-readable code. Every failure the library
/// reports is an Error; callers that need to branch inspect code().
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Input-format error tied to a 1-based line number of the offending text.
class ParseError : public Error {
 public:
  ParseError(ErrorCode code, std::size_t line, const std::string& what)
      : Error(code, "line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace urbanpos
