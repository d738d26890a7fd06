#pragma once

#include <stdexcept>
#include <string>

namespace screenloop {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A precondition on an argument was violated (empty target, bad range, ...).
class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// A sample id was moved that is not currently in the inference set.
class InvalidTransfer : public Error {
public:
    using Error::Error;
};

/// Malformed binary or text input (IDX, CSV, checkpoints).
class FormatError : public Error {
public:
    using Error::Error;
};

/// Configuration does not satisfy its schema or cross-field constraints.
/// `field` carries a JSON-pointer-like path when known.
class ConfigError : public Error {
public:
    ConfigError(std::string field, const std::string& message)
        : Error(field.empty() ? message : field + ": " + message), field_(std::move(field)) {}

    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

/// Acquisition or stopping rule applied to the wrong task kind.
class PolicyMismatch : public Error {
public:
    using Error::Error;
};

/// The label oracle failed while a campaign was running.
class OracleError : public Error {
public:
    using Error::Error;
};

}  // namespace screenloop
