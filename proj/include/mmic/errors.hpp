#pragma once

#include <stdexcept>
#include <string>

namespace mmic {

/// Invalid user-facing configuration (bad ranges, impossible partition sizes).
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A caller broke a precondition (shape mismatch, empty input, bad ordering).
class ContractError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// Non-finite values appeared during computation.
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace mmic
