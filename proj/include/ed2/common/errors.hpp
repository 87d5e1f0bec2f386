#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ed2 {

// Input that violates an operation's preconditions (shape mismatch, bad partition, ...).
class InvalidInput : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Malformed file content. `line` is 1-based; 0 when the error is not tied to a line.
class ParseError : public std::runtime_error {
public:
    ParseError(std::size_t line, const std::string& what)
        : std::runtime_error(line == 0 ? what : "line " + std::to_string(line) + ": " + what),
          line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

// NaN/Inf encountered during training or rollout. `step` is the offending step index.
class NumericalError : public std::runtime_error {
public:
    NumericalError(std::size_t step, const std::string& what)
        : std::runtime_error(what + " at step " + std::to_string(step)), step_(step) {}

    std::size_t step() const noexcept { return step_; }

private:
    std::size_t step_;
};

}  // namespace ed2
