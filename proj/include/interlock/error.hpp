#pragma once

#include <stdexcept>
#include <string>

namespace interlock {

// Base of every error thrown by the library. The CLI maps each subclass to an
// exit code.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class IoError : public Error {
public:
    using Error::Error;
};

// Header or column layout does not match the documented file schema.
class SchemaError : public Error {
public:
    using Error::Error;
};

class ParameterError : public Error {
public:
    using Error::Error;
};

// Bad command-line use or a missing user-supplied input file.
class UsageError : public Error {
public:
    using Error::Error;
};

// A precondition of an operation was violated by the caller.
class ContractViolation : public Error {
public:
    using Error::Error;
};

// An upstream artifact is missing or its hash no longer matches the manifest.
class StalenessError : public Error {
public:
    StalenessError(std::string stage, const std::string& what)
        : Error(what), stage_(std::move(stage)) {}

    const std::string& stage() const noexcept { return stage_; }

private:
    std::string stage_;
};

}  // namespace interlock
