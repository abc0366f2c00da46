#pragma once

#include <stdexcept>
#include <string>

namespace umc {

enum class ErrorCode {
    NormZero,
    DimMismatch,
    GradNonFinite,
    BadContainer,
    CountMismatch,
    CorruptData,
    LabelOutOfRange,
    SpecTooSmall,
    EmptySequence,
    BatchTooSmall,
    NoPositives,
    BadRate,
    TooFewPoints,
    ClusterTooSmall,
    SubsetTooSmall,
    TooFewSamples,
    BadK,
    BadGrid,
    BadConfig,
    IoError,
};

const char* to_string(ErrorCode code);

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

}  // namespace umc
