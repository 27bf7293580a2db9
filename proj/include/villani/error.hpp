#pragma once

#include <stdexcept>
#include <string>

namespace villani {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
public:
    using Error::Error;
};

class DimensionMismatch : public Error {
public:
    using Error::Error;
};

/// A bound that needs a finite sup|sigma| was asked for an unbounded activation.
class UnboundedActivation : public Error {
public:
    using Error::Error;
};

/// Non-finite iterate or runaway risk during SGD / SDE integration.
class Divergence : public Error {
public:
    using Error::Error;
};

class IdxFormatError : public Error {
public:
    using Error::Error;
};

class NumericalError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

}  // namespace villani
