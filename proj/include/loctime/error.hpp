#pragma once

#include <stdexcept>
#include <string>

namespace loctime {

enum class ErrorKind {
    NegativeRate,
    TooSmall,
    NonConservative,
    EmptySubset,
    UnknownLabel,
    BudgetExceeded,
    ExplosionGuard,
    NonConvergedTruncation,
    DomainError,
    ResidualImaginary,
    NotTridiagonal,
    NotInterval,
    NotSymmetric,
    Unbounded,
    NotConverged,
    TooEarly,
    NotSRW,
    InsufficientConditioned,
    ConfigParse,
};

const char* to_string(ErrorKind kind) noexcept;

// Every failure raised by the library carries one of the kinds above so callers
// (and the CLI exit-code mapping) can branch on it without parsing messages.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

inline const char* to_string(ErrorKind kind) noexcept {
    switch (kind) {
    case ErrorKind::NegativeRate: return "NegativeRate";
    case ErrorKind::TooSmall: return "TooSmall";
    case ErrorKind::NonConservative: return "NonConservative";
    case ErrorKind::EmptySubset: return "EmptySubset";
    case ErrorKind::UnknownLabel: return "UnknownLabel";
    case ErrorKind::BudgetExceeded: return "BudgetExceeded";
    case ErrorKind::ExplosionGuard: return "ExplosionGuard";
    case ErrorKind::NonConvergedTruncation: return "NonConvergedTruncation";
    case ErrorKind::DomainError: return "DomainError";
    case ErrorKind::ResidualImaginary: return "ResidualImaginary";
    case ErrorKind::NotTridiagonal: return "NotTridiagonal";
    case ErrorKind::NotInterval: return "NotInterval";
    case ErrorKind::NotSymmetric: return "NotSymmetric";
    case ErrorKind::Unbounded: return "Unbounded";
    case ErrorKind::NotConverged: return "NotConverged";
    case ErrorKind::TooEarly: return "TooEarly";
    case ErrorKind::NotSRW: return "NotSRW";
    case ErrorKind::InsufficientConditioned: return "InsufficientConditioned";
    case ErrorKind::ConfigParse: return "ConfigParse";
    }
    return "Unknown";
}

} // namespace loctime
