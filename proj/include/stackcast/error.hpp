#pragma once

#include <stdexcept>
#include <string>

namespace stackcast {

/// Error categories. The numeric values are mirrored by the C status codes.
enum class ErrorCode {
  invalid_argument = 1,
  parse = 2,
  numerical = 3,
  io = 4,
  verification = 5,
  internal = 6,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

inline void require(bool condition, const std::string& what) {
  if (!condition) fail(ErrorCode::invalid_argument, what);
}

}  // namespace stackcast
