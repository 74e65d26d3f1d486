#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace hexcast {

// Bad configuration or usage (CLI maps this to exit code 1).
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Malformed or inconsistent input data (CLI maps this to exit code 2).
struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Shape or contract violation inside the numeric core.
struct ShapeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

using Rng = std::mt19937_64;

enum class Mode { train, eval };

}  // namespace hexcast
