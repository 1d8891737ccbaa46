#include <neuroqc/error.hpp>

namespace neuroqc {

parse_error::parse_error(const std::string& msg, std::size_t line):
    data_error("line " + std::to_string(line) + ": " + msg),
    line_(line)
{}

} // namespace neuroqc
