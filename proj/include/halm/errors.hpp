#pragma once

#include <stdexcept>
#include <string>

namespace halm {

/// Broad failure classes. The CLI maps each to a distinct exit status.
enum class ErrorKind {
    config = 2,
    transport = 3,
    capability = 4,
    data = 5,
    domain = 6,
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

struct ConfigError : Error {
    explicit ConfigError(const std::string& what) : Error(ErrorKind::config, what) {}
};

/// Network failure that survived every retry.
struct TransportError : Error {
    explicit TransportError(const std::string& what) : Error(ErrorKind::transport, what) {}
};

/// The endpoint works but lacks a feature we require (per-token log-probabilities).
struct CapabilityError : Error {
    explicit CapabilityError(const std::string& what) : Error(ErrorKind::capability, what) {}
};

struct DataError : Error {
    explicit DataError(const std::string& what) : Error(ErrorKind::data, what) {}
};

/// Malformed input line; carries the 1-based line number.
struct ParseError : DataError {
    ParseError(std::size_t line, const std::string& what)
        : DataError("line " + std::to_string(line) + ": " + what), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

/// Two collections that must line up by record id do not.
struct PairingError : DataError {
    using DataError::DataError;
};

/// Argument outside the mathematical domain of an operation.
struct DomainError : Error {
    explicit DomainError(const std::string& what) : Error(ErrorKind::domain, what) {}
};

}  // namespace halm
