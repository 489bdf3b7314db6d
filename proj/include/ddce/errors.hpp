#pragma once

#include <stdexcept>
#include <string>

namespace ddce {

/// Input dimensions or lengths do not match what an operation requires.
struct ShapeError : std::invalid_argument {
    explicit ShapeError(const std::string& msg) : std::invalid_argument(msg) {}
};

/// Invalid or inconsistent configuration (unknown model, missing parameter, ...).
struct ConfigError : std::invalid_argument {
    explicit ConfigError(const std::string& msg) : std::invalid_argument(msg) {}
};

/// File read/write failure; carries the offending path in the message.
struct IoError : std::runtime_error {
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Division by an exactly-zero reference value (e.g. a zero preamble entry).
struct DivideByZeroError : std::domain_error {
    explicit DivideByZeroError(const std::string& msg) : std::domain_error(msg) {}
};

/// Training produced a non-finite loss; carries the epoch index.
struct TrainingDivergence : std::runtime_error {
    int epoch;
    explicit TrainingDivergence(int epoch_, const std::string& msg)
        : std::runtime_error(msg), epoch(epoch_) {}
};

}  // namespace ddce
