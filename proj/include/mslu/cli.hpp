#pragma once

#include <string>
#include <vector>

namespace mslu {

/// Exit codes of the command-line tool.
enum ExitCode : int { kExitOk = 0, kExitIo = 1, kExitValidation = 2, kExitNumerical = 3 };

/// Runs the `mslu` command line. `args` excludes the program name. Returns
/// the process exit code; diagnostics go to stderr.
int run_cli(const std::vector<std::string>& args);
int run_cli(int argc, const char* const* argv);

}  // namespace mslu
