#pragma once

#include <stdexcept>
#include <string>

namespace waffle {

// Base class for all recoverable library errors. The CLI maps these to
// exit status 2 (data/contract error).
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed input file content (bad line, wrong field count, ...).
class ParseError : public Error {
public:
    ParseError(const std::string& file, std::size_t line, const std::string& msg)
        : Error(file + ":" + std::to_string(line) + ": " + msg), line_(line) {}
    explicit ParseError(const std::string& msg) : Error(msg), line_(0) {}
    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

// Structured container (model file, report) with bad magic/version/shape.
class FormatError : public Error {
public:
    using Error::Error;
};

// Violated runtime contract: empty dataset, mismatched lengths, bad label.
class DataError : public Error {
public:
    using Error::Error;
};

// Filesystem problem: missing or unwritable path.
class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace waffle
