#pragma once

#include <iosfwd>

namespace qg2rom {

// Entry point of the qg2rom command. Returns the process exit code: 0 on
// success, 2 for configuration errors, 1 for any other failure.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace qg2rom
