#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace dynaflow {

enum class ErrorKind {
  Format,         // malformed file contents (bad magic, bad header)
  Length,         // truncated payload
  Dimension,      // size mismatch or nonpositive dimensions
  Io,             // unreadable / unwritable path
  EmptyInput,     // nothing to process
  Configuration,  // invalid parameter value
  Contract,       // caller broke a documented precondition
};

std::string_view to_string(ErrorKind kind);

// Every failure surfaced by the library carries a kind so the CLI can map it
// to a stable exit status.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace dynaflow
