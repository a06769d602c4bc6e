#pragma once

#include <ostream>

namespace pvsql::cli {

enum ExitCode : int { kOk = 0, kTaskFailure = 1, kUsage = 2 };

// Entry point of the pvsql binary. Human or JSON output goes to `out`,
// diagnostics and the usage synopsis to `err`; logs go to stderr.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace pvsql::cli
