#pragma once

#include <stdexcept>
#include <string>

namespace lrscat {

// Base class for all toolkit errors.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct CalibrationFailed : Error { using Error::Error; };
struct StepSizeUnderflow : Error { using Error::Error; };
struct EnergyDriftExceeded : Error { using Error::Error; };
struct DegenerateDirection : Error { using Error::Error; };
struct PreconditionViolation : Error { using Error::Error; };
struct FixedPointDiverged : Error { using Error::Error; };
struct LimitNotConverged : Error { using Error::Error; };
struct SingularHessian : Error { using Error::Error; };
struct SurfaceDegenerate : Error { using Error::Error; };
struct InsufficientRange : Error { using Error::Error; };
struct QuadratureFailure : Error { using Error::Error; };
struct IOError : Error { using Error::Error; };

struct NewtonDiverged : Error {
    double residual = 0.0;
    NewtonDiverged(const std::string& what, double res)
        : Error(what + " (last residual " + std::to_string(res) + ")"), residual(res) {}
};

// Configuration errors carry a JSON pointer to the offending key.
struct SchemaError : Error {
    std::string pointer;
    SchemaError(const std::string& ptr, const std::string& msg)
        : Error(ptr + ": " + msg), pointer(ptr) {}
};

}  // namespace lrscat
