#pragma once

#include <stdexcept>
#include <string>

namespace bite {

/// Invalid configuration: bad shapes, bad hyperparameters, mismatched
/// model/data dimensions. Maps to CLI exit code 2.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Unreadable, truncated or inconsistent data: missing files, bad magic,
/// corrupt payloads. Maps to CLI exit code 3.
class DataError : public std::runtime_error {
public:
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace bite
