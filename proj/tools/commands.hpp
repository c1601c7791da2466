#pragma once

#include <ostream>

namespace ivhedge::cli {

/// Exit codes of the command-line tool.
enum ExitCode : int { kSuccess = 0, kConfigError = 2, kRuntimeError = 3 };

/// Parses and runs one command line. Messages go to `out` and `err`; the return
/// value is the process exit code.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace ivhedge::cli
