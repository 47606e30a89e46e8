#pragma once

#include <stdexcept>
#include <string>

namespace cacherl {

// Invalid arguments are reported with std::invalid_argument; the types below
// cover the remaining failure classes callers may want to tell apart.

/// Empirical profile requested from a slot without requests.
class NoRequestsError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A tabulation (action enumeration, explicit MDP) would be too large.
class CapacityError : public std::length_error {
public:
    using std::length_error::length_error;
};

/// Non-finite values or a singular system.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Interval aggregation attempted with missing leaf reports.
class IncompleteIntervalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Hyper-DQN file partition does not cover exactly F files.
class InvalidPartitionError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Config parse or validation failure. `field()` names the offending key path.
class ConfigError : public std::runtime_error {
public:
    ConfigError(std::string field, const std::string& what)
        : std::runtime_error(field.empty() ? what : field + ": " + what), field_(std::move(field)) {}

    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

}  // namespace cacherl
