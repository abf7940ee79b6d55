#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace srgnet {

enum class ErrorCode {
  NonFinite,
  NormalLengthViolation,
  EmptyCloud,
  ParseError,
  MixedArity,
  IoError,
  PaletteTooSmall,
  NegativeLabel,
  NoLabels,
  KTooLarge,
  MissingNormals,
  ShapeMismatch,
  TargetOutOfRange,
  MissingGrad,
  LengthMismatch,
  InvalidConfig,
};

std::string_view error_code_name(ErrorCode code) noexcept;

/// Every failure in the library surfaces as this exception; `code()` is the
/// machine-readable part, `what()` carries "<Code>: <detail>".
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& detail);

  ErrorCode code() const noexcept { return code_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorCode code_;
  std::string detail_;
};

}  // namespace srgnet
