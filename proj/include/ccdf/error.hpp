#pragma once

#include <stdexcept>
#include <string>

namespace ccdf {

/// Bad arguments, malformed files, violated preconditions. CLI exit code 1.
class ValidationError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Numerical failure: a certificate that does not hold, non-finite state,
/// an infeasible shortcut window. CLI exit code 2.
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

namespace detail {

[[noreturn]] inline void fail(const std::string& what) { throw ValidationError(what); }

inline void require(bool ok, const std::string& what)
{
    if (!ok)
        throw ValidationError(what);
}

} // namespace detail
} // namespace ccdf
