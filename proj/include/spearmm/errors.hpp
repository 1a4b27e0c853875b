#pragma once

#include <stdexcept>
#include <string>

namespace spearmm {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Bad user input: malformed files, invalid flags, mismatched checkpoints.
// The CLI maps every InputError to exit code 2.
class InputError : public Error {
public:
    using Error::Error;
};

class ParseError : public InputError {
public:
    ParseError(const std::string & tensor, const std::string & what)
        : InputError(tensor.empty() ? what : "tensor '" + tensor + "': " + what), tensor_(tensor) {}

    const std::string & tensor() const noexcept { return tensor_; }

private:
    std::string tensor_;
};

class AlignmentError : public InputError {
public:
    using InputError::InputError;
};

class ValidationError : public InputError {
public:
    using InputError::InputError;
};

} // namespace spearmm
