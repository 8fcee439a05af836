// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

namespace etrap {

/// Bad input to an operation (non-finite values, violated preconditions).
class InvalidArgument : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

/// A well-formed request the physics or numerics cannot satisfy.
class DomainError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Malformed or incomplete run configuration.
class ConfigError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

namespace detail {

inline void require(bool condition, const std::string& message)
{
    if (!condition) {
        throw InvalidArgument(message);
    }
}

inline void require_finite(double value, const char* what)
{
    if (!std::isfinite(value)) {
        throw InvalidArgument(std::string(what) + " must be finite");
    }
}

}  // namespace detail
}  // namespace etrap
