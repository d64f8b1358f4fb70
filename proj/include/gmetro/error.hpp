#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace gmetro {

enum class ErrorCode {
  // codec
  PayloadTooLong,
  SyncNotFound,
  FecFailure,
  CrcMismatch,
  CodingViolation,
  StreamTooShort,
  // lasers
  NoModeInBand,
  OutOfRange,
  NoCoincidence,
  ChannelUnreachable,
  KnobDimensionMismatch,
  InvalidModel,
  // link
  NoPath,
  UnknownSpan,
  InvalidTopology,
  // protocol
  InvalidEvent,
  NoReport,
  Timeout,
  // engine
  ValidationError,
  Deadlock,
  SafetyViolation,
  // scenario files
  ParseError,
  UnknownKey,
  UnitViolation,
  CrossRefError,
  InvalidArgument,
};

std::string_view to_string(ErrorCode code);

/// Exception type used throughout the library. `position()` is set for
/// errors that point into a sequence (coding violations, channel index,
/// scenario line number).
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what, std::optional<std::size_t> position = std::nullopt)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code), position_(position) {}

  ErrorCode code() const noexcept { return code_; }
  std::optional<std::size_t> position() const noexcept { return position_; }

 private:
  ErrorCode code_;
  std::optional<std::size_t> position_;
};

}  // namespace gmetro
