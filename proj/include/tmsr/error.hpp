#pragma once

#include <stdexcept>
#include <string>

namespace tmsr {

enum class ErrorKind {
  ShapeMismatch,
  InvalidArgument,
  Io,
  BadMagic,
  BadVersion,
  PayloadLength,
  ConfigMismatch,
  UnsupportedBitDepth,
  NonDeterministic,
  Numeric,
};

const char* to_string(ErrorKind kind);

// Every failure raised by the library carries a kind so callers (the CLI in
// particular) can map it to an exit code without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace tmsr
