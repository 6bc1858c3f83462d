#pragma once

#include <stdexcept>
#include <string>

namespace cavqed {

/// Malformed or inconsistent user input (parameters, configuration files).
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A computation could not produce a trustworthy result.
class NumericsError : public std::runtime_error {
public:
    NumericsError(const std::string& reason, const std::string& what)
        : std::runtime_error(what), reason_(reason) {}
    explicit NumericsError(const std::string& what) : NumericsError("numerics", what) {}

    /// Short machine-readable code, e.g. "nonunique_steady_state".
    const std::string& reason() const { return reason_; }

private:
    std::string reason_;
};

/// File could not be read, written or decoded.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace cavqed
