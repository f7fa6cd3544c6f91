#pragma once

#include <stdexcept>
#include <string>

namespace openreid {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Bad input values or violated preconditions. The CLI maps these to exit code 1.
class ValidationError : public Error {
public:
    using Error::Error;
};

/// Filesystem and file-format failures. The CLI maps these to exit code 2.
class IoError : public Error {
public:
    using Error::Error;
};

class ZeroNormError : public ValidationError {
public:
    ZeroNormError() : ValidationError("cannot normalize a zero-norm vector") {}
};

class NonFiniteError : public ValidationError {
public:
    NonFiniteError() : ValidationError("vector contains non-finite components") {}
};

class DimensionMismatchError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

enum class StoreFault {
    bad_magic,
    bad_version,
    bad_header,
    row_count_mismatch,
    truncated_matrix,
    bad_metadata,
};

/// Embedding store decoding failure; `fault()` tells the cases apart.
class StoreFormatError : public IoError {
public:
    StoreFormatError(StoreFault fault, const std::string& what) : IoError(what), fault_(fault) {}

    StoreFault fault() const noexcept { return fault_; }

private:
    StoreFault fault_;
};

}  // namespace openreid
