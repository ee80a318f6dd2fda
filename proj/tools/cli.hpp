#pragma once

#include <iosfwd>

namespace legimpact {

// Runs one command line. Exit codes: 0 success, 1 usage error, 2 runtime
// error. Output paths go to `out`, one per line; diagnostics go to `err`.
int cli_dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace legimpact
