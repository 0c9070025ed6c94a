#pragma once

#include <stdexcept>
#include <string>

namespace sievekit {

// Error classes map onto CLI exit codes: usage = 1, data = 2, degeneracy = 3.
enum class ErrorClass { Usage = 1, Data = 2, Degeneracy = 3 };

class Error : public std::runtime_error {
public:
    Error(ErrorClass cls, std::string kind, const std::string& message)
        : std::runtime_error(message), cls_(cls), kind_(std::move(kind)) {}

    ErrorClass error_class() const noexcept { return cls_; }
    const std::string& kind() const noexcept { return kind_; }
    int exit_code() const noexcept { return static_cast<int>(cls_); }

private:
    ErrorClass cls_;
    std::string kind_;
};

#define SIEVEKIT_DEFINE_ERROR(Name, Class)                                   \
    class Name : public Error {                                              \
    public:                                                                  \
        explicit Name(const std::string& message)                            \
            : Error(ErrorClass::Class, #Name, message) {}                    \
    };

SIEVEKIT_DEFINE_ERROR(ConfigurationError, Usage)
SIEVEKIT_DEFINE_ERROR(ConflictingConfig, Usage)
SIEVEKIT_DEFINE_ERROR(ParseError, Data)
SIEVEKIT_DEFINE_ERROR(DomainError, Data)
SIEVEKIT_DEFINE_ERROR(MissingExposure, Data)
SIEVEKIT_DEFINE_ERROR(DegenerateCounts, Degeneracy)
SIEVEKIT_DEFINE_ERROR(DegenerateIncidence, Degeneracy)
SIEVEKIT_DEFINE_ERROR(RiskSetExhausted, Degeneracy)
SIEVEKIT_DEFINE_ERROR(CoxNoConverge, Degeneracy)
SIEVEKIT_DEFINE_ERROR(SeparationError, Degeneracy)
SIEVEKIT_DEFINE_ERROR(BootstrapFailure, Degeneracy)
SIEVEKIT_DEFINE_ERROR(TestInfeasible, Degeneracy)
SIEVEKIT_DEFINE_ERROR(OutOfRegime, Degeneracy)

#undef SIEVEKIT_DEFINE_ERROR

}  // namespace sievekit
