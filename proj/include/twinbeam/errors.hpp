#pragma once

#include <stdexcept>
#include <string>

namespace twinbeam {

// Numeric values are shared with the C API status codes.
enum class ErrorCode : int {
  invalid_argument = 1,
  domain = 2,
  geometry = 3,
  degenerate = 4,
  config = 5,
  corrupt_header = 6,
  truncated_payload = 7,
  digest_mismatch = 8,
  io = 9,
  resource = 10,
};

const char* to_string(ErrorCode code) noexcept;

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
  if (!condition) fail(code, message);
}

}  // namespace twinbeam
