#pragma once

#include <stdexcept>
#include <string>

namespace gazehead {

enum class ErrorCode {
  InvalidInput = 1,
  Parse,
  Validation,
  Config,
  Contract,
  Io,
  FormatVersion,
  Numeric,
};

const char* error_code_name(ErrorCode code);

/// Base exception for every failure raised by the library. The C API maps
/// `code()` onto its status enum one to one.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

inline void require(bool condition, ErrorCode code, const std::string& message) {
  if (!condition) throw Error(code, message);
}

}  // namespace gazehead
