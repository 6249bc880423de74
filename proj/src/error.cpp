#include "ktrace/error.hpp"

namespace ktrace {

std::string_view to_string(ErrorKind kind) noexcept {
    switch (kind) {
        case ErrorKind::MissingColumn: return "MissingColumn";
        case ErrorKind::BadBoolean: return "BadBoolean";
        case ErrorKind::BadNumber: return "BadNumber";
        case ErrorKind::DuplicateAttemptKey: return "DuplicateAttemptKey";
        case ErrorKind::DuplicateOrderIndex: return "DuplicateOrderIndex";
        case ErrorKind::NotFirstAttempt: return "NotFirstAttempt";
        case ErrorKind::UnknownSkill: return "UnknownSkill";
        case ErrorKind::ScoreOutOfRange: return "ScoreOutOfRange";
        case ErrorKind::DuplicateKey: return "DuplicateKey";
        case ErrorKind::DegenerateDenominator: return "DegenerateDenominator";
        case ErrorKind::EmptyData: return "EmptyData";
        case ErrorKind::IndexOutOfRange: return "IndexOutOfRange";
        case ErrorKind::NonFiniteLoss: return "NonFiniteLoss";
        case ErrorKind::BadCheckpoint: return "BadCheckpoint";
        case ErrorKind::ZeroVariance: return "ZeroVariance";
        case ErrorKind::TooFewPairs: return "TooFewPairs";
        case ErrorKind::SingularCorrelationMatrix: return "SingularCorrelationMatrix";
        case ErrorKind::InvalidConfig: return "InvalidConfig";
        case ErrorKind::MalformedReport: return "MalformedReport";
        case ErrorKind::IoError: return "IoError";
        case ErrorKind::InvalidArgument: return "InvalidArgument";
    }
    return "Unknown";
}

}  // namespace ktrace
