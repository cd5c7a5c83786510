#pragma once

#include <stdexcept>
#include <string>

namespace feetiming {

/// Argument outside the mathematical domain of an operation (negative time,
/// probability outside [0,1], fee above valuation, ...).
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// The requested evaluation makes no sense in the current state, e.g. a
/// fixed-interval block that is already due.
class InvalidStateError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// Inconsistent model parameters (n <= m for the bumping chain, bad
/// distribution parameters, ...).
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A numerical routine could not meet its accuracy contract.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Scenario file problem, carries the 1-based line of the offending node
/// (0 when no line applies).
class ParseError : public std::runtime_error {
public:
    ParseError(int line, const std::string& what)
        : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}

    int line() const noexcept { return line_; }

private:
    int line_;
};

}  // namespace feetiming
