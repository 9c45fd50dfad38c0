#pragma once

#include <stdexcept>
#include <string>

namespace satnet {

// Invalid or out-of-bounds configuration (bad indices, non-positive sizes, ...).
class ConfigError : public std::invalid_argument {
public:
    explicit ConfigError(const std::string& msg) : std::invalid_argument(msg) {}
};

// Physically impossible geometry, e.g. a slant range shorter than the altitude.
class GeometryError : public std::domain_error {
public:
    explicit GeometryError(const std::string& msg) : std::domain_error(msg) {}
};

// Argument outside the mathematical domain of a model (probabilities, fidelities).
class DomainError : public std::domain_error {
public:
    explicit DomainError(const std::string& msg) : std::domain_error(msg) {}
};

// The requested scenario cannot be satisfied by any configuration in range.
class InfeasibleError : public std::runtime_error {
public:
    explicit InfeasibleError(const std::string& msg) : std::runtime_error(msg) {}
};

// Reading inputs or writing artifacts failed.
class IoError : public std::runtime_error {
public:
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace satnet
