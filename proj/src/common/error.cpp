#include "common/error.hpp"

namespace vr {

const char* error_code_name(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::InvalidArgument: return "InvalidArgument";
        case ErrorCode::Io: return "Io";
        case ErrorCode::UnsupportedDatatype: return "UnsupportedDatatype";
        case ErrorCode::HeaderCorrupt: return "HeaderCorrupt";
        case ErrorCode::SizeMismatch: return "SizeMismatch";
        case ErrorCode::EmptyMask: return "EmptyMask";
        case ErrorCode::EmptySkeleton: return "EmptySkeleton";
        case ErrorCode::EvenKernel: return "EvenKernel";
        case ErrorCode::DimMismatch: return "DimMismatch";
        case ErrorCode::TooShort: return "TooShort";
        case ErrorCode::ConstantSeries: return "ConstantSeries";
        case ErrorCode::UntrainedOracle: return "UntrainedOracle";
        case ErrorCode::DegenerateTangent: return "DegenerateTangent";
        case ErrorCode::SpecInvalid: return "SpecInvalid";
        case ErrorCode::ConfigInvalid: return "ConfigInvalid";
        case ErrorCode::Internal: return "Internal";
    }
    return "Unknown";
}

}  // namespace vr
