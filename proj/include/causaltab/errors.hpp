#pragma once

#include <stdexcept>
#include <string>

namespace causaltab {

/// Coarse error class used to map failures onto process exit codes.
enum class ErrorClass { usage, data, resource, internal };

class Error : public std::runtime_error {
public:
    Error(ErrorClass klass, const std::string& message)
        : std::runtime_error(message), klass_(klass) {}

    ErrorClass klass() const { return klass_; }

private:
    ErrorClass klass_;
};

/// Bad arguments, bad configuration, or misuse of an API contract.
class UsageError : public Error {
public:
    explicit UsageError(const std::string& message) : Error(ErrorClass::usage, message) {}
};

/// Problems with input data content.
class DataError : public Error {
public:
    explicit DataError(const std::string& message) : Error(ErrorClass::data, message) {}
};

/// Malformed file structure (ragged rows, broken quoting, truncated records).
class StructuralError : public DataError {
public:
    using DataError::DataError;
};

/// A file that parses but does not match its declared schema.
class SchemaError : public DataError {
public:
    using DataError::DataError;
};

/// References to unknown columns or factors.
class MappingError : public DataError {
public:
    using DataError::DataError;
};

/// A value outside its declared domain.
class DomainError : public DataError {
public:
    using DataError::DataError;
};

/// Dimension mismatch between related inputs.
class ShapeError : public DataError {
public:
    using DataError::DataError;
};

/// Too few samples for a statistical procedure.
class InsufficientDataError : public DataError {
public:
    using DataError::DataError;
};

/// A metric that is undefined for the given inputs.
class MetricError : public DataError {
public:
    using DataError::DataError;
};

/// A keyed dataset with required entries absent.
class CompletenessError : public DataError {
public:
    using DataError::DataError;
};

/// A configured resource limit was exceeded.
class ResourceError : public Error {
public:
    explicit ResourceError(const std::string& message) : Error(ErrorClass::resource, message) {}
};

}  // namespace causaltab
