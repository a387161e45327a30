#pragma once

#include <stdexcept>
#include <string>

namespace intrafair {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Caller violated an operation's precondition (bad shape, bad config value).
class PreconditionError : public Error {
public:
    using Error::Error;
};

/// A protected group (or the positive rows of one) is empty, so a rate or
/// group mean is undefined. Never silently turned into NaN.
class DegenerateGroupError : public Error {
public:
    using Error::Error;
};

/// Training or fine-tuning produced a non-finite loss.
class DivergenceError : public Error {
public:
    using Error::Error;
};

class ParseError : public Error {
public:
    ParseError(const std::string& what, long line = -1)
        : Error(line >= 0 ? what + " (line " + std::to_string(line) + ")" : what), line_(line) {}
    long line() const noexcept { return line_; }

private:
    long line_;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

}  // namespace intrafair
