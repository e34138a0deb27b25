#pragma once

#include <stdexcept>
#include <string>

namespace cgame {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid configuration or argument. `field` names the offending config path when known.
class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& msg, std::string field = {})
        : Error(field.empty() ? msg : field + ": " + msg), field_(std::move(field)) {}
    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

/// Malformed, corrupted or incompatible data (shapes, indices, containers).
class DataError : public Error {
public:
    using Error::Error;
};

class IndexError : public DataError {
public:
    using DataError::DataError;
};

class ShapeError : public DataError {
public:
    using DataError::DataError;
};

class FormatError : public DataError {
public:
    using DataError::DataError;
};

class VersionError : public FormatError {
public:
    using FormatError::FormatError;
};

class ChecksumError : public FormatError {
public:
    using FormatError::FormatError;
};

/// NaN/Inf or other numeric breakdown during computation or training.
class NumericError : public Error {
public:
    using Error::Error;
};

/// A metric is not defined for the given input (e.g. zero variance ground truth).
class UndefinedMetricError : public Error {
public:
    using Error::Error;
};

} // namespace cgame
