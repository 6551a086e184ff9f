#pragma once

#include <stdexcept>
#include <string>

namespace rectfree {

/// Category of a library failure. The CLI maps categories to exit codes.
enum class ErrorKind {
    validation,     ///< malformed or inconsistent input data
    usage,          ///< API misuse (unknown names, duplicated generators, ...)
    precondition,   ///< a documented precondition does not hold
    domain,         ///< argument outside the mathematical domain (e.g. σ ≰ π)
    capacity,       ///< request exceeds a configured size ceiling
    configuration   ///< simulation plan cannot be realized (empty blocks, ...)
};

inline const char* to_string(ErrorKind k) {
    switch (k) {
        case ErrorKind::validation: return "validation";
        case ErrorKind::usage: return "usage";
        case ErrorKind::precondition: return "precondition";
        case ErrorKind::domain: return "domain";
        case ErrorKind::capacity: return "capacity";
        case ErrorKind::configuration: return "configuration";
    }
    return "unknown";
}

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(what), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

struct ValidationError : Error {
    explicit ValidationError(const std::string& w) : Error(ErrorKind::validation, w) {}
};
struct UsageError : Error {
    explicit UsageError(const std::string& w) : Error(ErrorKind::usage, w) {}
};
struct PreconditionError : Error {
    explicit PreconditionError(const std::string& w) : Error(ErrorKind::precondition, w) {}
};
struct DomainError : Error {
    explicit DomainError(const std::string& w) : Error(ErrorKind::domain, w) {}
};
struct CapacityError : Error {
    explicit CapacityError(const std::string& w) : Error(ErrorKind::capacity, w) {}
};
struct ConfigurationError : Error {
    explicit ConfigurationError(const std::string& w) : Error(ErrorKind::configuration, w) {}
};

}  // namespace rectfree
