#pragma once

#include <stdexcept>
#include <string>

namespace leadnet {

/// Base class for all errors raised by this library.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Tensor shape / dimension mismatch.
struct ShapeError : Error {
    explicit ShapeError(const std::string& msg) : Error(msg) {}
};

/// Invalid data: malformed files, bad labels, inconsistent samples.
struct DataError : Error {
    explicit DataError(const std::string& msg) : Error(msg) {}
};

/// Bad configuration value.
struct ConfigError : Error {
    explicit ConfigError(const std::string& msg) : Error(msg) {}
};

/// Non-finite values where finite arithmetic is required (training aborts).
struct NumericError : Error {
    explicit NumericError(const std::string& msg) : Error(msg) {}
};

}  // namespace leadnet
