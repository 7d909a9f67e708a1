#pragma once

#include <stdexcept>
#include <string>

namespace rti {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Bad argument to an operation (out-of-range index, invalid width, ...).
class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// tx and rx coincide.
class DegenerateLink : public InvalidArgument {
public:
    using InvalidArgument::InvalidArgument;
};

/// Least-squares or linear system without a unique solution.
class SingularSystem : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

} // namespace rti
