#pragma once
/**
 * @file errors.hpp
 * @brief Exception hierarchy shared by the library and the command-line tool.
 *
 * Every failure is one of three families. The CLI maps them to exit codes
 * (config 2, data 3, numeric 4), so new error types must derive from one of
 * them rather than from Error directly.
 */

#include <stdexcept>
#include <string>

namespace glancevad {

enum class ErrorKind { Config, Data, Numeric };

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    [[nodiscard]] ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

/// Invalid user configuration or API misuse (bad K, missing class, bad flags).
class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& what) : Error(ErrorKind::Config, what) {}
};

/// Inputs that violate a data invariant: shapes, ranges, file formats.
class DataError : public Error {
public:
    explicit DataError(const std::string& what) : Error(ErrorKind::Data, what) {}
};

/// NaN/Inf produced during evaluation, training or optimisation.
class NumericError : public Error {
public:
    explicit NumericError(const std::string& what) : Error(ErrorKind::Numeric, what) {}
};

class ShapeError : public DataError {
public:
    using DataError::DataError;
};

class OutOfRangeError : public DataError {
public:
    using DataError::DataError;
};

class InvariantError : public DataError {
public:
    using DataError::DataError;
};

class FormatError : public DataError {
public:
    using DataError::DataError;
};

class ValidationError : public DataError {
public:
    using DataError::DataError;
};

/// A metric is not defined for the given labels (e.g. only one class present).
class UndefinedMetricError : public DataError {
public:
    using DataError::DataError;
};

class ParameterError : public ConfigError {
public:
    using ConfigError::ConfigError;
};

/// The requested synthetic dataset cannot be generated (e.g. intervals do not fit).
class GenerationError : public ConfigError {
public:
    using ConfigError::ConfigError;
};

inline int exit_code_for(ErrorKind kind) noexcept {
    switch (kind) {
        case ErrorKind::Config: return 2;
        case ErrorKind::Data: return 3;
        case ErrorKind::Numeric: return 4;
    }
    return 1;
}

}  // namespace glancevad
