#pragma once

#include <stdexcept>
#include <string>

namespace dancegen {

// Error categories map 1:1 onto CLI exit codes (see tools/dancegen.cpp --help).
enum class ErrorCode {
  bad_input = 3,        // malformed or unreadable file
  insufficient = 4,     // not enough data (frames, beats, samples)
  incompatible = 5,     // checkpoint / config mismatch
  contract = 6,         // precondition violated (shapes, tags, ranges)
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& msg)
      : std::runtime_error(msg), code_(code) {}
  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

inline Error bad_input_error(const std::string& msg) {
  return Error(ErrorCode::bad_input, msg);
}
inline Error insufficient_error(const std::string& msg) {
  return Error(ErrorCode::insufficient, msg);
}
inline Error incompatible_error(const std::string& msg) {
  return Error(ErrorCode::incompatible, msg);
}
inline Error contract_error(const std::string& msg) {
  return Error(ErrorCode::contract, msg);
}

}  // namespace dancegen
