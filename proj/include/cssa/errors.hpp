#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace cssa {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

#define CSSA_DECLARE_ERROR(Name)                 \
    class Name : public Error {                  \
    public:                                      \
        using Error::Error;                      \
    }

CSSA_DECLARE_ERROR(SingularState);
CSSA_DECLARE_ERROR(IntegrationFailure);
CSSA_DECLARE_ERROR(EigenFailure);
CSSA_DECLARE_ERROR(DomainError);
CSSA_DECLARE_ERROR(DegenerateGeometry);
CSSA_DECLARE_ERROR(ObserverInsideBody);
CSSA_DECLARE_ERROR(ConfigError);
CSSA_DECLARE_ERROR(DimensionMismatch);
CSSA_DECLARE_ERROR(EmptyDemand);
CSSA_DECLARE_ERROR(InfeasibleSolution);
CSSA_DECLARE_ERROR(IoError);
CSSA_DECLARE_ERROR(PermutationCap);
CSSA_DECLARE_ERROR(NoFeasibleSolution);
CSSA_DECLARE_ERROR(TooLarge);

#undef CSSA_DECLARE_ERROR

// Line and column are 1-based; column 0 means "whole line".
class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t line, std::size_t column = 0)
        : Error(format(what, line, column)), line_(line), column_(column) {}

    std::size_t line() const noexcept { return line_; }
    std::size_t column() const noexcept { return column_; }

private:
    static std::string format(const std::string& what, std::size_t line, std::size_t column) {
        std::string out = "line " + std::to_string(line);
        if (column != 0) out += ", column " + std::to_string(column);
        return out + ": " + what;
    }

    std::size_t line_;
    std::size_t column_;
};

}  // namespace cssa
