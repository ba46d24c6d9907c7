#pragma once

#include <stdexcept>
#include <string>

namespace stemmed {

// Bad argument shapes, out-of-range times, malformed config.
class InvalidInputError : public std::invalid_argument {
public:
    explicit InvalidInputError(const std::string& what) : std::invalid_argument(what) {}
};

// Exponent argument left the safe range; surfaced instead of returning inf.
class OverflowGuardError : public std::domain_error {
public:
    explicit OverflowGuardError(const std::string& what) : std::domain_error(what) {}
};

// Quantities that must be finite/positive came out degenerate.
class NumericDegenerateError : public std::runtime_error {
public:
    explicit NumericDegenerateError(const std::string& what) : std::runtime_error(what) {}
};

class IoError : public std::runtime_error {
public:
    explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

} // namespace stemmed
