#pragma once

#include <stdexcept>
#include <string>

namespace synergy {

/// Malformed input file; carries the 1-based line number when known.
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& what, std::size_t line = 0)
        : std::runtime_error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class ConfigError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Input outside the mathematical domain of an operation.
class DomainError : public std::domain_error {
    using std::domain_error::domain_error;
};

class LookupError : public std::out_of_range {
    using std::out_of_range::out_of_range;
};

class NumericalError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace synergy
