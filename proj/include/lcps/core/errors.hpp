#pragma once

#include <stdexcept>
#include <string>

namespace lcps {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Incompatible tensor shapes; the message names the offending layer.
class DimensionError : public Error {
public:
    using Error::Error;
};

/// Non-finite values or a failed factorization.
class NumericError : public Error {
public:
    using Error::Error;
};

/// A trace, mask or checkpoint that does not belong to the model it is used with.
class StructuralError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class RegistryError : public Error {
public:
    using Error::Error;
};

class LookupError : public Error {
public:
    using Error::Error;
};

/// Operation called on an object in the wrong lifecycle state (e.g. unfinalized LDA).
class StateError : public Error {
public:
    using Error::Error;
};

class PruningError : public Error {
public:
    using Error::Error;
};

/// Bad magic, unknown version or truncated payload in a binary file.
class FormatError : public Error {
public:
    using Error::Error;
};

class IngestionError : public Error {
public:
    using Error::Error;
};

} // namespace lcps
