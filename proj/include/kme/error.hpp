#ifndef KME_ERROR_HPP
#define KME_ERROR_HPP
#pragma once

#include <stdexcept>
#include <string>

namespace kme {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid argument, precondition violation or malformed input data.
class ValidationError : public Error {
public:
    using Error::Error;
};

/// File could not be opened, read or written.
class IoError : public Error {
public:
    using Error::Error;
};

/// A numerical result contradicts a mathematical invariant (e.g. a Gram
/// matrix that is clearly not positive semidefinite). Signals a bug or a
/// broken kernel rather than bad user input.
class DiagnosticsError : public Error {
public:
    using Error::Error;
};

} // namespace kme

#endif // KME_ERROR_HPP
