#pragma once

#include <stdexcept>
#include <string>

namespace quantbsde {

// Base for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Argument or configuration outside the documented domain.
class InvalidArgument : public Error {
public:
    using Error::Error;
};

// A numerical invariant failed (row sums, NaN from a driver, ...).
class NumericalError : public Error {
public:
    using Error::Error;
};

// File or stream failure; the message carries the path.
class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace quantbsde
