#pragma once

#include <stdexcept>
#include <string>

namespace cara {

/// Base of every error the library throws. `kind()` names the error class in
/// machine-readable records.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
    virtual const char* kind() const noexcept { return "Error"; }
};

#define CARA_DEFINE_ERROR(Name)                                          \
    class Name : public Error {                                          \
    public:                                                              \
        using Error::Error;                                              \
        const char* kind() const noexcept override { return #Name; }     \
    };

CARA_DEFINE_ERROR(ParamError)
CARA_DEFINE_ERROR(DomainError)
CARA_DEFINE_ERROR(NumericsError)
CARA_DEFINE_ERROR(ConvergenceError)
CARA_DEFINE_ERROR(ExtrapolationError)
CARA_DEFINE_ERROR(MeasureError)
CARA_DEFINE_ERROR(NoEquilibrium)
CARA_DEFINE_ERROR(SampleError)
CARA_DEFINE_ERROR(ConfigError)

#undef CARA_DEFINE_ERROR

}  // namespace cara
