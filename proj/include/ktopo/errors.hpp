#pragma once

#include <stdexcept>
#include <string>

namespace ktopo {

class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Mesh connectivity violates a contract (non-triangle face, bad index, degenerate face,
/// mismatched pose topology).
class TopologyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Non-finite energy or an unrecoverable solver state.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace ktopo
