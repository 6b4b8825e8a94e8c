// errors.hpp: exception types shared by the ptherm headers

#pragma once

#include <stdexcept>
#include <string>

namespace ptherm {

/// A density or operator failed a physical-validity check (hermiticity, trace, positivity).
class InvalidStateError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A model or integrator parameter is outside its admissible range.
class ParameterError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Configuration file or flag could not be resolved into a RunConfig.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A solver produced non-finite values or a library routine failed.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// File output/input failure, message carries the path.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace ptherm
