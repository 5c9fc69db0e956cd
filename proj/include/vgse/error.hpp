#pragma once

#include <stdexcept>
#include <string>

namespace vgse {

// Raised for anything the caller can fix: malformed files, invariant
// violations in inputs, bad arguments. The CLI maps it to exit code 1.
class InputError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A documented precondition was violated by the calling code.
class UsageError : public InputError {
public:
    using InputError::InputError;
};

}  // namespace vgse
