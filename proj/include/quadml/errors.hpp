#pragma once

#include <stdexcept>
#include <string>

namespace quadml {

// Bad configuration or unusable arguments supplied by the caller.
// The CLI maps this family to exit code 2.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Problems with the data itself (unsuitable composition, failed splits,
// parse failures at runtime). The CLI maps this family to exit code 3.
struct DataError : std::runtime_error {
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// Failures raised while optimizing (non-finite gradients and similar).
struct TrainingError : DataError {
    explicit TrainingError(const std::string& msg) : DataError(msg) {}
};

} // namespace quadml
