#pragma once

#include <stdexcept>
#include <string>

namespace hemfl {

/// Invalid argument values or inconsistent dimensions.
class ArgumentError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Malformed external input (dataset bytes, report files).
class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Non-finite parameters or a diverging loss.
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A documented precondition that the caller failed to establish.
class PreconditionError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// Rejected experiment configuration.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// MPI has no defined value because every client was excluded.
class UndefinedMpiError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

}  // namespace hemfl
