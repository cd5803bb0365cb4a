#pragma once

#include <stdexcept>
#include <string>

namespace pnps {

enum class ErrorCode {
  ZeroVector,
  IoFailure,
  BadMagic,
  BadVersion,
  Truncated,
  TrailingBytes,
  DuplicateName,
  NonFiniteValue,
  InvalidRecord,
  InvalidArgument,
  InvalidPartition,
  UnknownCategory,
  WrongCount,
  EmptyFeature,
  DuplicateFeature,
  MissingCategory,
  OutOfRange,
  EmptyNegativeSet,
  DimensionMismatch,
  EmptySet,
  LengthMismatch,
  ParseError,
};

const char* to_string(ErrorCode code) noexcept;

/// Every failure raised by the engine. The code is stable and is what the
/// CLI maps onto exit statuses; the message is for humans.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);

  ErrorCode code() const noexcept { return code_; }

  /// True for failures of the underlying byte source/sink rather than of
  /// the data it carried.
  bool is_io() const noexcept { return code_ == ErrorCode::IoFailure; }

 private:
  ErrorCode code_;
};

}  // namespace pnps
