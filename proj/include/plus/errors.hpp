#pragma once

#include <stdexcept>
#include <string>

namespace plus {

struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

struct DimensionError : Error {
    using Error::Error;
};

struct ZeroColumnError : Error {
    std::size_t column;
    explicit ZeroColumnError(std::size_t j)
        : Error("column " + std::to_string(j) + " has zero norm"), column(j) {}
};

struct IndexError : Error {
    using Error::Error;
};

struct SingularMatrixError : Error {
    double condition_estimate;
    explicit SingularMatrixError(double cond)
        : Error("matrix is singular or numerically rank deficient (condition estimate "
                + std::to_string(cond) + ")"),
          condition_estimate(cond) {}
};

struct NotSymmetricError : Error {
    using Error::Error;
};

struct BadGammaError : Error {
    using Error::Error;
};

struct InvalidPenaltyError : Error {
    using Error::Error;
};

struct DomainError : Error {
    using Error::Error;
};

struct LambdaNotReachedError : Error {
    using Error::Error;
};

struct SingularSubGramError : Error {
    using Error::Error;
};

struct RankDeficientDesignError : Error {
    using Error::Error;
};

struct EmptyActiveSetError : Error {
    using Error::Error;
};

struct DegenerateDoFError : Error {
    using Error::Error;
};

struct ConfigError : Error {
    using Error::Error;
};

struct IoError : Error {
    using Error::Error;
};

} // namespace plus
