#pragma once

#include <stdexcept>
#include <string>

namespace dragkit {

/// Base class of every exception thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
public:
    using Error::Error;
};

class DimensionMismatch : public Error {
public:
    using Error::Error;
};

class SingularTransformError : public Error {
public:
    using Error::Error;
};

class EmptyRegionError : public Error {
public:
    using Error::Error;
};

class ConvexityError : public Error {
public:
    using Error::Error;
};

class UndefinedAngleError : public Error {
public:
    using Error::Error;
};

class NonFiniteLossError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

// A long-running operation stopped because its caller asked it to.
class CancelledError : public Error {
public:
    using Error::Error;
};

// Thrown when a JSON document violates a schema. `path()` names the
// offending field in dotted form, e.g. "region_operations.0.anchors".
class FormatError : public Error {
public:
    FormatError(std::string path, const std::string& message);

    const std::string& path() const noexcept { return path_; }
    /// The message without the path prefix.
    const std::string& message() const noexcept { return message_; }

private:
    std::string path_;
    std::string message_;
};

}  // namespace dragkit
