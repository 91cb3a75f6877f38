/// @file error.hpp
/// @brief Exception hierarchy shared by every pipeline stage.

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace phasetrace {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Unreadable or unwritable file / stream.
class IoError : public Error {
public:
    using Error::Error;
};

/// Invalid configuration value (unknown format tag, even smoothing window, ...).
class ConfigError : public Error {
public:
    using Error::Error;
};

/// A documented precondition of an operation was violated by the caller.
class ContractError : public Error {
public:
    using Error::Error;
};

/// Data failed an invariant check (distribution does not sum to one, corrupted artifact, ...).
class ValidationError : public Error {
public:
    using Error::Error;
};

/// Structured input could not be parsed. `line()` is 1-based, 0 when unknown.
class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t line = 0)
        : Error(line == 0 ? what : "line " + std::to_string(line) + ": " + what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

/// Remote backend unavailable or timed out. Callers may retry.
class TransportError : public Error {
public:
    using Error::Error;
};

class NotFoundError : public Error {
public:
    using Error::Error;
};

/// No timestamp can be reconstructed for a record set.
class UnrecoverableDataError : public Error {
public:
    using Error::Error;
};

/// Downstream stages need at least one daily point.
class EmptySeriesError : public Error {
public:
    using Error::Error;
};

/// Segmentation needs at least two daily points.
class SeriesTooShortError : public Error {
public:
    using Error::Error;
};

/// Precomputed annotations have no entry for an event.
class MissingAnnotationError : public Error {
public:
    using Error::Error;
};

}  // namespace phasetrace
