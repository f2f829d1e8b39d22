#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace tlta {

enum class ErrorCode {
  InvalidPolygon,
  OutOfGrid,
  OpOutOfGrid,
  NoPerimeter,
  InvalidManifest,
  AlreadyIssued,
  DuplicateTransaction,
  RegistrationDenied,
  NotRegistered,
  UnknownFunction,
  ConfigError,
  InvariantBreach,
  Io,
};

std::string_view to_string(ErrorCode code);

// Single exception type for the library; the code carries the category and
// the message names the offending input.
class Error : public std::runtime_error {
public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

private:
  ErrorCode code_;
};

}  // namespace tlta
