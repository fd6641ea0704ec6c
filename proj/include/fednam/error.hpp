#pragma once

#include <stdexcept>
#include <string>

namespace fednam {

// Exit codes used by the CLI. Library errors carry the code so main()
// can translate an exception into the right process status.
enum ExitCode : int {
    kOk = 0,
    kConfigError = 2,
    kDataError = 3,
    kDivergenceError = 4,
    kIoError = 5,
};

class Error : public std::runtime_error {
public:
    Error(std::string message, int exit_code)
        : std::runtime_error(std::move(message)), exit_code_(exit_code) {}

    int exit_code() const noexcept { return exit_code_; }

private:
    int exit_code_;
};

// Bad configuration values or unusable option combinations.
class ConfigError : public Error {
public:
    explicit ConfigError(std::string message)
        : Error(std::move(message), kConfigError) {}
};

// Malformed or inconsistent input data, including shape mismatches.
class DataError : public Error {
public:
    explicit DataError(std::string message)
        : Error(std::move(message), kDataError) {}
};

class DimensionError : public DataError {
public:
    explicit DimensionError(std::string message)
        : DataError(std::move(message)) {}
};

// Training or evaluation produced a non-finite value.
class DivergenceError : public Error {
public:
    explicit DivergenceError(std::string message)
        : Error(std::move(message), kDivergenceError) {}
};

class IoError : public Error {
public:
    explicit IoError(std::string message)
        : Error(std::move(message), kIoError) {}
};

}  // namespace fednam
