#include "pnps/error.hpp"

namespace pnps {

const char* to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::ZeroVector: return "ZeroVector";
    case ErrorCode::IoFailure: return "IoFailure";
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::BadVersion: return "BadVersion";
    case ErrorCode::Truncated: return "Truncated";
    case ErrorCode::TrailingBytes: return "TrailingBytes";
    case ErrorCode::DuplicateName: return "DuplicateName";
    case ErrorCode::NonFiniteValue: return "NonFiniteValue";
    case ErrorCode::InvalidRecord: return "InvalidRecord";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::InvalidPartition: return "InvalidPartition";
    case ErrorCode::UnknownCategory: return "UnknownCategory";
    case ErrorCode::WrongCount: return "WrongCount";
    case ErrorCode::EmptyFeature: return "EmptyFeature";
    case ErrorCode::DuplicateFeature: return "DuplicateFeature";
    case ErrorCode::MissingCategory: return "MissingCategory";
    case ErrorCode::OutOfRange: return "OutOfRange";
    case ErrorCode::EmptyNegativeSet: return "EmptyNegativeSet";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::EmptySet: return "EmptySet";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::ParseError: return "ParseError";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

}  // namespace pnps
