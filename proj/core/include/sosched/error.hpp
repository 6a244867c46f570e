#pragma once

#include <stdexcept>
#include <string>

namespace sosched {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// An argument lies outside the mathematical domain of the operation.
class DomainError : public Error {
public:
    using Error::Error;
};

/// A quantity that is analytically nonnegative came out negative.
class NumericalInconsistency : public Error {
public:
    using Error::Error;
};

class DimensionMismatch : public Error {
public:
    using Error::Error;
};

/// Subset enumeration was asked for more clients than the guard allows.
class TooManyClients : public Error {
public:
    using Error::Error;
};

class InfeasibleRegion : public Error {
public:
    using Error::Error;
};

class InsufficientRuns : public Error {
public:
    using Error::Error;
};

class EmptySamples : public Error {
public:
    using Error::Error;
};

/// Malformed or out-of-range configuration.
class ConfigError : public Error {
public:
    using Error::Error;
};

} // namespace sosched
