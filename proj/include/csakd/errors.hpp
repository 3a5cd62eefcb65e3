#pragma once

#include <stdexcept>
#include <string>

namespace csakd {

// Error categories map onto CLI exit codes: config 2, data 3, divergence 4.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& m) : std::runtime_error(m) {}
};

struct DataError : std::runtime_error {
  explicit DataError(const std::string& m) : std::runtime_error(m) {}
};

struct DivergenceError : std::runtime_error {
  explicit DivergenceError(const std::string& m) : std::runtime_error(m) {}
};

}  // namespace csakd
