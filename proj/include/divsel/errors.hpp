#pragma once

#include <cstddef>
#include <string>
#include <stdexcept>

namespace divsel {

/// Base of every error raised by the library. The message can be prefixed
/// with context (e.g. the subspace index) and rethrown with `throw;`, which
/// keeps the dynamic type intact.
class Error : public std::exception {
public:
    explicit Error(std::string message) : message_(std::move(message)) {}

    const char* what() const noexcept override { return message_.c_str(); }
    void prepend(const std::string& context) { message_ = context + ": " + message_; }

private:
    std::string message_;
};

class IoError : public Error { using Error::Error; };
class ConfigError : public Error { using Error::Error; };
class IndexError : public Error { using Error::Error; };
class ShapeError : public Error { using Error::Error; };
class DegenerateError : public Error { using Error::Error; };
class UndefinedMeasure : public Error { using Error::Error; };
class TrainError : public Error { using Error::Error; };

/// Malformed CSV content. `row` is the 1-based data row (header = 0),
/// `column` the 0-based column index.
class SchemaError : public Error {
public:
    SchemaError(std::string message, std::size_t row, std::size_t column)
        : Error(std::move(message) + " (row " + std::to_string(row) + ", column " +
                std::to_string(column) + ")"),
          row_(row), column_(column) {}

    std::size_t row() const noexcept { return row_; }
    std::size_t column() const noexcept { return column_; }

private:
    std::size_t row_;
    std::size_t column_;
};

} // namespace divsel
