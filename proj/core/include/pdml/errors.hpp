#pragma once

#include <stdexcept>
#include <string>

namespace pdml {

// Error taxonomy mirrored by the CLI exit codes: ConfigError -> 1,
// DataError -> 2, ProtocolError / TransportError -> 3.

struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

struct DataError : std::runtime_error {
  explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

struct ProtocolError : std::runtime_error {
  explicit ProtocolError(const std::string& msg) : std::runtime_error(msg) {}
};

// Transport-level failure (timeout, port binding, peer drop). A kind of
// protocol failure for exit-code purposes.
struct TransportError : ProtocolError {
  explicit TransportError(const std::string& msg) : ProtocolError(msg) {}
};

}  // namespace pdml
