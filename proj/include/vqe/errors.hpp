#pragma once

#include <stdexcept>
#include <string>

namespace vqe {

// Error categories surfaced by the CLI as machine-parsable exit lines.
struct ShapeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct FormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DivergedError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace vqe
