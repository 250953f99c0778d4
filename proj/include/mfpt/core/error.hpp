#pragma once

#include <stdexcept>
#include <string>

namespace mfpt {

// Error taxonomy shared by the library and the CLI. The CLI maps each kind
// to a process exit code: usage/config -> 2, data -> 3, numeric -> 4.
enum class ErrorKind {
    Usage,
    Data,
    Numeric,
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}

    ErrorKind kind() const { return kind_; }

    int exit_code() const {
        switch (kind_) {
            case ErrorKind::Usage: return 2;
            case ErrorKind::Data: return 3;
            case ErrorKind::Numeric: return 4;
        }
        return 1;
    }

private:
    ErrorKind kind_;
};

class UsageError : public Error {
public:
    explicit UsageError(const std::string& message) : Error(ErrorKind::Usage, message) {}
};

class DataError : public Error {
public:
    explicit DataError(const std::string& message) : Error(ErrorKind::Data, message) {}
};

class NumericError : public Error {
public:
    explicit NumericError(const std::string& message) : Error(ErrorKind::Numeric, message) {}
};

}  // namespace mfpt
