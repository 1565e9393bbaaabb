#pragma once

#include <stdexcept>
#include <string>

namespace vitlab {

// Error taxonomy used across the library. Each failure mode gets its own
// type so callers and tests can catch precisely.

struct ShapeError : std::runtime_error {
    explicit ShapeError(const std::string& msg) : std::runtime_error("shape error: " + msg) {}
};

struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& msg) : std::runtime_error("numeric error: " + msg) {}
};

struct IndexError : std::runtime_error {
    explicit IndexError(const std::string& msg) : std::runtime_error("index error: " + msg) {}
};

struct InputError : std::runtime_error {
    explicit InputError(const std::string& msg) : std::runtime_error("input error: " + msg) {}
};

struct BudgetError : std::runtime_error {
    explicit BudgetError(const std::string& msg) : std::runtime_error("budget error: " + msg) {}
};

struct CoverageError : std::runtime_error {
    explicit CoverageError(const std::string& msg) : std::runtime_error("coverage error: " + msg) {}
};

struct FormatError : std::runtime_error {
    explicit FormatError(const std::string& msg) : std::runtime_error("format error: " + msg) {}
};

struct PathError : std::runtime_error {
    explicit PathError(const std::string& msg) : std::runtime_error("path error: " + msg) {}
};

}  // namespace vitlab
