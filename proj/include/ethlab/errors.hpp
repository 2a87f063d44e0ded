#pragma once

#include <stdexcept>
#include <string>

namespace ethlab {

// Invalid configuration or parameter set; the CLI maps it to exit code 2.
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// A numerical procedure could not deliver its contract; exit code 3.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace ethlab
