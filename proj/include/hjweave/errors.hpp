#pragma once

#include <stdexcept>
#include <string>

namespace hjweave {

/// Base of every error raised by the library. Each subclass maps onto one
/// CLI exit code (see runner.hpp).
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed matrix, mismatched dimensions, non-finite inputs.
class InvalidInputError : public Error {
public:
    using Error::Error;
};

/// Two fields that cannot be compared (different grids, times or sizes).
class ComparisonError : public InvalidInputError {
public:
    using InvalidInputError::InvalidInputError;
};

/// Argument outside the domain an operation is defined on (t <= 0, kappa >= 1, ...).
class DomainError : public Error {
public:
    using Error::Error;
};

/// Result would overflow double precision.
class RangeError : public Error {
public:
    using Error::Error;
};

/// A documented precondition (cooperativity, positive weights, ...) does not hold.
class PreconditionError : public Error {
public:
    using Error::Error;
};

/// An iterative solver stopped before reaching its tolerance.
class ConvergenceError : public Error {
public:
    using Error::Error;
};

/// Step-halving error estimate never dropped below tolerance.
class AccuracyError : public ConvergenceError {
public:
    using ConvergenceError::ConvergenceError;
};

/// A linear system that must be solved along a flow is (numerically) singular.
class SingularityError : public ConvergenceError {
public:
    using ConvergenceError::ConvergenceError;
};

/// Explicit scheme left its monotone/stable regime.
class StabilityError : public Error {
public:
    using Error::Error;
};

/// Outer minimization kept landing on the boundary of its search box.
class SearchBoxError : public Error {
public:
    using Error::Error;
};

/// Bad or inconsistent configuration file.
class ConfigError : public Error {
public:
    using Error::Error;
};

}  // namespace hjweave
