#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace heraldsim {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid scenario or run configuration. `key` is the dotted config path when known.
class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& what, std::string key = {})
        : Error(key.empty() ? what : key + ": " + what), key_(std::move(key)) {}

    const std::string& key() const noexcept { return key_; }

private:
    std::string key_;
};

/// Malformed input data (event-stream files, CSV fixtures).
class DataError : public Error {
public:
    explicit DataError(const std::string& what, std::size_t line = 0)
        : Error(line == 0 ? what : "line " + std::to_string(line) + ": " + what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

/// A metric whose denominator vanishes or whose inputs are inconsistent.
class UndefinedMetricError : public Error {
public:
    using Error::Error;
};

/// The joint spectral amplitude has no support on the grid.
class DegenerateJsaError : public Error {
public:
    using Error::Error;
};

}  // namespace heraldsim
