#pragma once

#include <stdexcept>
#include <string>

namespace densesvm {

/// Root of every error the library throws. `code()` is a stable
/// machine-readable identifier (used verbatim in HTTP error bodies).
class Error : public std::runtime_error {
public:
    Error(std::string code, const std::string& what)
        : std::runtime_error(what), code_(std::move(code)) {}

    const std::string& code() const noexcept { return code_; }

private:
    std::string code_;
};

#define DENSESVM_DEFINE_ERROR(Name, code_str)                                     \
    class Name : public Error {                                                   \
    public:                                                                       \
        explicit Name(const std::string& what) : Error(code_str, what) {}         \
    };

DENSESVM_DEFINE_ERROR(DecodeError, "decode_error")
DENSESVM_DEFINE_ERROR(BundleError, "bundle_error")
DENSESVM_DEFINE_ERROR(ShapeError, "shape_error")
DENSESVM_DEFINE_ERROR(ReshapeError, "reshape_error")
DENSESVM_DEFINE_ERROR(DimError, "dim_error")
DENSESVM_DEFINE_ERROR(InfeasibleNu, "infeasible_nu")
DENSESVM_DEFINE_ERROR(InvalidData, "invalid_data")
DENSESVM_DEFINE_ERROR(SingularGram, "singular_gram")
DENSESVM_DEFINE_ERROR(BadK, "bad_k")
DENSESVM_DEFINE_ERROR(SingleClass, "single_class")
DENSESVM_DEFINE_ERROR(FormatError, "format_error")
DENSESVM_DEFINE_ERROR(StartupError, "startup_error")

#undef DENSESVM_DEFINE_ERROR

}  // namespace densesvm
