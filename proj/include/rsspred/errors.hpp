#pragma once

#include <stdexcept>
#include <string>

namespace rsspred {

// Base class for all library errors. The CLI maps these to exit code 1
// with the message as the single-line diagnostic.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// File cannot be opened / written.
class IoError : public Error {
public:
    using Error::Error;
};

// Malformed file content (bad header, truncated values, version mismatch).
class FormatError : public Error {
public:
    using Error::Error;
};

// Coordinate or index outside a grid / matrix.
class BoundsError : public Error {
public:
    using Error::Error;
};

// CSV column set does not match the expected schema.
class SchemaError : public Error {
public:
    using Error::Error;
};

// A field failed to parse as the expected type.
class ParseError : public Error {
public:
    using Error::Error;
};

// Inconsistent or incomplete configuration.
class ConfigError : public Error {
public:
    using Error::Error;
};

// Invalid dataset handed to a numeric routine (empty, non-finite, too small).
class DataError : public Error {
public:
    using Error::Error;
};

// Argument outside a formula's mathematical domain.
class DomainError : public Error {
public:
    using Error::Error;
};

// An identifier that should resolve against a known set does not.
class ReferenceError : public Error {
public:
    using Error::Error;
};

// A persisted or in-memory model violates a structural requirement.
class ModelError : public Error {
public:
    using Error::Error;
};

} // namespace rsspred
