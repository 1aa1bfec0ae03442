#ifndef ATTNSENSE_ERRORS_HPP
#define ATTNSENSE_ERRORS_HPP

#include <cstddef>
#include <stdexcept>
#include <string>

namespace attnsense {

// Precondition violated by the caller (bad dimensions, empty selections, ...).
class ContractError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

// A requested (layer, timestep, projection) or similar key does not exist.
class LookupError : public std::out_of_range {
public:
    using std::out_of_range::out_of_range;
};

// Incomplete or inconsistent data that passed parsing.
class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Malformed text. line is 1-based, 0 when not attributable to a line.
class ParseError : public std::runtime_error {
public:
    ParseError(std::size_t line, const std::string& what)
        : std::runtime_error(line ? "line " + std::to_string(line) + ": " + what : what),
          line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

// Well-formed text whose content disagrees with its declared header.
class SchemaError : public ParseError {
public:
    using ParseError::ParseError;
};

}  // namespace attnsense

#endif  // ATTNSENSE_ERRORS_HPP
