#include "gmetro/error.hpp"

namespace gmetro {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::PayloadTooLong: return "PAYLOAD_TOO_LONG";
    case ErrorCode::SyncNotFound: return "SYNC_NOT_FOUND";
    case ErrorCode::FecFailure: return "FEC_FAILURE";
    case ErrorCode::CrcMismatch: return "CRC_MISMATCH";
    case ErrorCode::CodingViolation: return "CODING_VIOLATION";
    case ErrorCode::StreamTooShort: return "STREAM_TOO_SHORT";
    case ErrorCode::NoModeInBand: return "NO_MODE_IN_BAND";
    case ErrorCode::OutOfRange: return "OUT_OF_RANGE";
    case ErrorCode::NoCoincidence: return "NO_COINCIDENCE";
    case ErrorCode::ChannelUnreachable: return "CHANNEL_UNREACHABLE";
    case ErrorCode::KnobDimensionMismatch: return "KNOB_DIMENSION_MISMATCH";
    case ErrorCode::InvalidModel: return "INVALID_MODEL";
    case ErrorCode::NoPath: return "NO_PATH";
    case ErrorCode::UnknownSpan: return "UNKNOWN_SPAN";
    case ErrorCode::InvalidTopology: return "INVALID_TOPOLOGY";
    case ErrorCode::InvalidEvent: return "INVALID_EVENT";
    case ErrorCode::NoReport: return "NO_REPORT";
    case ErrorCode::Timeout: return "TIMEOUT";
    case ErrorCode::ValidationError: return "VALIDATION_ERROR";
    case ErrorCode::Deadlock: return "DEADLOCK";
    case ErrorCode::SafetyViolation: return "SAFETY_VIOLATION";
    case ErrorCode::ParseError: return "PARSE_ERROR";
    case ErrorCode::UnknownKey: return "UNKNOWN_KEY";
    case ErrorCode::UnitViolation: return "UNIT_VIOLATION";
    case ErrorCode::CrossRefError: return "CROSS_REF_ERROR";
    case ErrorCode::InvalidArgument: return "INVALID_ARGUMENT";
  }
  return "UNKNOWN";
}

}  // namespace gmetro
