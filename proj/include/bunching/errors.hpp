#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace bunching {

// Invalid arguments (out-of-range parameters, bad pockets) are reported with
// std::invalid_argument / std::out_of_range. Everything below is a domain
// failure of a well-formed request.
class DomainError : public std::runtime_error {
public:
    DomainError(std::string code, const std::string& message)
        : std::runtime_error(message), code_(std::move(code)) {}

    /// Stable machine-readable identifier, e.g. "budget_exceeded".
    const std::string& code() const noexcept { return code_; }

private:
    std::string code_;
};

class BudgetExceeded : public DomainError {
public:
    explicit BudgetExceeded(const std::string& message)
        : DomainError("budget_exceeded", message) {}
};

class NoCriticality : public DomainError {
public:
    explicit NoCriticality(const std::string& message)
        : DomainError("no_criticality", message) {}
};

class NoCriticalCapital : public DomainError {
public:
    explicit NoCriticalCapital(const std::string& message)
        : DomainError("no_critical_capital", message) {}
};

class RootBeyondRange : public DomainError {
public:
    explicit RootBeyondRange(const std::string& message)
        : DomainError("root_beyond_range", message) {}
};

class Cancelled : public DomainError {
public:
    Cancelled() : DomainError("cancelled", "computation cancelled") {}
};

/// Malformed persisted data; carries the 1-based line number.
class ParseError : public DomainError {
public:
    ParseError(std::size_t line, const std::string& message)
        : DomainError("parse_error", "line " + std::to_string(line) + ": " + message),
          line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

}  // namespace bunching
