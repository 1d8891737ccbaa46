#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace neuroqc {

// Base of everything the library throws. The CLI maps the subclasses onto
// exit codes: data_error -> 2, io_error -> 3.
class error: public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Input content is malformed or violates an invariant.
class data_error: public error {
public:
    using error::error;
};

class parse_error: public data_error {
public:
    parse_error(const std::string& msg, std::size_t line);
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class validation_error: public data_error {
public:
    using data_error::data_error;
};

// A file could not be opened, read or written.
class io_error: public error {
public:
    using error::error;
};

} // namespace neuroqc
