#pragma once

#include <iosfwd>

namespace neuroqc::cli {

enum exit_code: int {
    ok = 0,
    usage_error = 1,
    data_failure = 2,
    io_failure = 3,
};

// Entry point of the `neuroqc` tool. Results go to the files named on the
// command line; progress and diagnostics go to `log`.
int run(int argc, const char* const* argv, std::ostream& log);

} // namespace neuroqc::cli
