#pragma once

#include <string>
#include <vector>

namespace nonstat::cli {

enum ExitCode : int { Ok = 0, Validation = 2, Numerical = 3, DiagnosticFailed = 4 };

/// Runs the `nonstat` command line; args[0] is the program name. Returns the
/// process exit code. Diagnostics go to stderr.
int run(const std::vector<std::string>& args);

} // namespace nonstat::cli
