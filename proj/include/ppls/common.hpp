#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace ppls {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Shape/rank mismatches between inputs.
struct DimensionError : Error {
    using Error::Error;
};

// Malformed user-supplied data (files, matrices violating preconditions).
struct InputError : Error {
    using Error::Error;
};

// Invalid configuration (flags, study setup, unknown options).
struct ConfigError : Error {
    using Error::Error;
};

// Numerical failure (indefiniteness, non-finite values, failed brackets).
struct NumericalError : Error {
    using Error::Error;
};

// All numeric text output uses 17 significant digits.
std::string fmt17(double v);

}  // namespace ppls
