#pragma once

#include <stdexcept>
#include <string>

namespace ivhedge {

/// Argument outside the mathematical domain of an operation
/// (non-positive price, maturity outside the surface range, CGF strip violation).
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Invalid user configuration or malformed input file. The CLI maps this to exit code 2.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Numerical failure at run time: negative variance, non-finite policy output,
/// divergent loss. The CLI maps this to exit code 3.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// API misuse, e.g. running a backward pass on a tape that recorded nothing.
class UsageError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

}  // namespace ivhedge
