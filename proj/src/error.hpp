#pragma once

#include <stdexcept>
#include <string>

namespace diagram {

enum class ErrorCode {
  invalid_argument = 1,
  io = 2,
  parse = 3,
  shape = 4,
  numeric = 5,
  mismatch = 6,
  state = 7,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& msg) { throw Error(code, msg); }

}  // namespace diagram
