#pragma once

#include <stdexcept>
#include <string>

namespace dualfreq {

/// Shape or dimension violation (mismatched extents, odd sizes, bad ranks).
struct ShapeError : std::runtime_error {
    explicit ShapeError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Invalid configuration value (rates, epsilons, epoch counts, ...).
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Non-finite values where finite ones are required (NaN loss, NaN gradient).
struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Operation invoked in the wrong order (backward without forward, ...).
struct StateError : std::runtime_error {
    explicit StateError(const std::string& msg) : std::runtime_error(msg) {}
};

/// File or dataset input that cannot be read or fails validation.
struct IoError : std::runtime_error {
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace dualfreq
