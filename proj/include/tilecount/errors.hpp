#pragma once

#include <stdexcept>
#include <string>

namespace tilecount {

/// File could not be parsed as the expected format.
class ParseError : public std::runtime_error {
public:
    explicit ParseError(const std::string& what) : std::runtime_error(what) {}
};

/// File parsed but violates a structural invariant (dangling reference,
/// out-of-range value, degenerate geometry). The message names the record.
class IntegrityError : public std::runtime_error {
public:
    explicit IntegrityError(const std::string& what) : std::runtime_error(what) {}
};

/// Invalid parameter or configuration value.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// Filesystem or image decode failure.
class IoError : public std::runtime_error {
public:
    explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

/// A detector backend failed. `kind` distinguishes the failure modes of
/// external adapters; in-process backends report Other.
class BackendError : public std::runtime_error {
public:
    enum class Kind { Timeout, ProcessExit, Protocol, Other };

    BackendError(Kind kind, const std::string& what)
        : std::runtime_error(what), kind_(kind) {}

    Kind kind() const { return kind_; }

private:
    Kind kind_;
};

} // namespace tilecount
