#pragma once

#include <stdexcept>
#include <string>

namespace vr {

enum class ErrorCode {
    InvalidArgument = 1,
    Io,
    UnsupportedDatatype,
    HeaderCorrupt,
    SizeMismatch,
    EmptyMask,
    EmptySkeleton,
    EvenKernel,
    DimMismatch,
    TooShort,
    ConstantSeries,
    UntrainedOracle,
    DegenerateTangent,
    SpecInvalid,
    ConfigInvalid,
    Internal,
};

const char* error_code_name(ErrorCode code) noexcept;

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

}  // namespace vr
