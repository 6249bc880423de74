#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ktrace {

enum class ErrorKind {
    // dataset
    MissingColumn,
    BadBoolean,
    BadNumber,
    DuplicateAttemptKey,
    DuplicateOrderIndex,
    NotFirstAttempt,
    UnknownSkill,
    ScoreOutOfRange,
    DuplicateKey,
    // models
    DegenerateDenominator,
    EmptyData,
    IndexOutOfRange,
    NonFiniteLoss,
    BadCheckpoint,
    // stats
    ZeroVariance,
    TooFewPairs,
    SingularCorrelationMatrix,
    // pipeline
    InvalidConfig,
    MalformedReport,
    IoError,
    InvalidArgument,
};

std::string_view to_string(ErrorKind kind) noexcept;

// Every failure in the library is reported through this type. The message
// names the offending entity (row number, skill id, path, epoch).
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind), detail_(message) {}

    ErrorKind kind() const noexcept { return kind_; }
    // The message without the kind prefix.
    const std::string& detail() const noexcept { return detail_; }

private:
    ErrorKind kind_;
    std::string detail_;
};

}  // namespace ktrace
