#pragma once

#include <string>
#include <vector>

namespace ratebv
{

/// Process exit codes of the command-line tool.
enum ExitCode : int
{
    exit_ok = 0,
    /// The pipeline ran but a certificate did not pass.
    exit_certificate_failed = 1,
    /// Invalid configuration or command line.
    exit_config_error = 2,
    exit_file_error = 3,
    /// A solver broke down (iteration cap, non-finite values, no evaluations).
    exit_numerical_failure = 4
};

/// Entry point of `ratebv <subcommand> --config PATH [--out DIR] [--seed N]
/// [--threads N] [--profile strict|standard]`. Every failure also writes
/// error.json into the output directory.
int run_cli(int argc, const char* const* argv);

/// Convenience overload; `args` excludes the program name.
int run_cli(const std::vector<std::string>& args);

}  // namespace ratebv
