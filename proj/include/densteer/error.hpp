#pragma once

#include <stdexcept>
#include <string>

namespace densteer {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Bad input: malformed configuration, degenerate grid, inconsistent shapes.
class ValidationError : public Error {
public:
    using Error::Error;
};

/// Numerical failure inside a solver (singular system, empty control set).
class SolverError : public Error {
public:
    using Error::Error;
};

}  // namespace densteer
