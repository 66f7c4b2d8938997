#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace sbrel {

// Base of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Problems with user input or configuration. The CLI maps these to exit code 1.
class ValidationError : public Error {
public:
    using Error::Error;
};

// A required column is missing from a log header.
class SchemaError : public ValidationError {
public:
    explicit SchemaError(const std::string& column)
        : ValidationError("missing required column '" + column + "'"), column_(column) {}

    const std::string& column() const noexcept { return column_; }

private:
    std::string column_;
};

// A data row could not be parsed. Line numbers are 1-based and count the header.
class RowError : public ValidationError {
public:
    RowError(std::size_t line, const std::string& what)
        : ValidationError("line " + std::to_string(line) + ": " + what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class ConfigurationError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

// Failures inside the statistical model. The CLI maps these to exit code 2.
class ModelError : public Error {
public:
    using Error::Error;
};

class DomainError : public ModelError {
public:
    using ModelError::ModelError;
};

class DegenerateError : public ModelError {
public:
    using ModelError::ModelError;
};

// Negative binomial size r_k = F_k - sum_{i<k} F_i is not positive at phase k (1-based).
class InfeasibleError : public ModelError {
public:
    InfeasibleError(std::size_t phase, const std::string& what)
        : ModelError("phase " + std::to_string(phase) + ": " + what), phase_(phase) {}

    std::size_t phase() const noexcept { return phase_; }

private:
    std::size_t phase_;
};

class InitializationError : public ModelError {
public:
    using ModelError::ModelError;
};

class InsufficientDataError : public ModelError {
public:
    using ModelError::ModelError;
};

class TemporalOrderError : public ModelError {
public:
    using ModelError::ModelError;
};

}  // namespace sbrel
