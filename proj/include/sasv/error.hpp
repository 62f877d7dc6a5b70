#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace sasv {

enum class ErrorCode {
    MalformedLine,
    DuplicateEnrollment,
    UnenrolledSpeaker,
    BadMagic,
    DimMismatch,
    DuplicateUtterance,
    ZeroVector,
    TruncatedFile,
    LengthMismatch,
    ZeroNorm,
    MissingUtterance,
    ShapeMismatch,
    EmptyBatch,
    EmptyClass,
    EmptyInput,
    SpecInvalid,
    IoError,
    InvalidArgument,
};

std::string_view error_code_name(ErrorCode code);

/// Every failure raised by the library. The message always starts with the
/// code name, e.g. "MalformedLine: line 3: unknown label 'bonafide'".
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& detail)
        : std::runtime_error(std::string(error_code_name(code)) + ": " + detail), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

inline std::string_view error_code_name(ErrorCode code) {
    switch (code) {
    case ErrorCode::MalformedLine: return "MalformedLine";
    case ErrorCode::DuplicateEnrollment: return "DuplicateEnrollment";
    case ErrorCode::UnenrolledSpeaker: return "UnenrolledSpeaker";
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::DimMismatch: return "DimMismatch";
    case ErrorCode::DuplicateUtterance: return "DuplicateUtterance";
    case ErrorCode::ZeroVector: return "ZeroVector";
    case ErrorCode::TruncatedFile: return "TruncatedFile";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::ZeroNorm: return "ZeroNorm";
    case ErrorCode::MissingUtterance: return "MissingUtterance";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::EmptyBatch: return "EmptyBatch";
    case ErrorCode::EmptyClass: return "EmptyClass";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::SpecInvalid: return "SpecInvalid";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    }
    return "Unknown";
}

} // namespace sasv
